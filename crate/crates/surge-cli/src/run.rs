//! Algorithm registry and the replay loop shared by the CLI and the bench
//! harness.

use std::io::Write;

use surge_core::approx::{GridDetector, MultiGridDetector};
use surge_core::cellindex::{BoundMode, CellDetector, DetectorConfig};
use surge_core::detector::{Detector, DetectorError, OracleDetector};
use surge_core::model::{ModelError, Query, SpatialObject};
use surge_core::oracle::OracleError;
use surge_core::topk::LeveledCellDetector;
use surge_core::window::{EventScheduler, StreamError};
use thiserror::Error;

use crate::emit::Emitter;

/// Process exit codes: input problems map to 2, guard refusals to 3.
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_GUARD: i32 = 3;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Stream(#[from] StreamError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Parse(#[from] crate::stream::ParseError),
    #[error(transparent)]
    Gen(#[from] crate::gen::GenError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("oracle guard: {0}")]
    Guard(OracleError),
}

impl From<DetectorError> for RunError {
    fn from(e: DetectorError) -> Self {
        match e {
            DetectorError::Oracle(o) => RunError::Guard(o),
        }
    }
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Guard(_) => EXIT_GUARD,
            _ => EXIT_INPUT,
        }
    }
}

/// The selectable algorithms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algo {
    Ccs,
    Gaps,
    Mgaps,
    Kccs,
    Kgaps,
    Kmgaps,
    Oracle,
    Naive,
}

impl Algo {
    pub const ALL: [Algo; 8] = [
        Algo::Ccs,
        Algo::Gaps,
        Algo::Mgaps,
        Algo::Kccs,
        Algo::Kgaps,
        Algo::Kmgaps,
        Algo::Oracle,
        Algo::Naive,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Algo::Ccs => "ccs",
            Algo::Gaps => "gaps",
            Algo::Mgaps => "mgaps",
            Algo::Kccs => "kccs",
            Algo::Kgaps => "kgaps",
            Algo::Kmgaps => "kmgaps",
            Algo::Oracle => "oracle",
            Algo::Naive => "naive",
        }
    }

    pub fn parse(s: &str) -> Result<Algo, RunError> {
        Algo::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| RunError::Input(format!("unknown algorithm {s:?}")))
    }

    /// True for the single-region detectors that require `k = 1`.
    pub fn single_region(&self) -> bool {
        matches!(self, Algo::Ccs | Algo::Gaps | Algo::Mgaps | Algo::Naive)
    }

    pub fn build(
        &self,
        q: &Query,
        bound_mode: BoundMode,
    ) -> Result<Box<dyn Detector>, RunError> {
        if self.single_region() && q.k != 1 {
            return Err(RunError::Input(format!(
                "algorithm {} reports a single region; use its top-k variant for k = {}",
                self.name(),
                q.k
            )));
        }
        Ok(match self {
            Algo::Ccs => Box::new(CellDetector::new(
                q.clone(),
                DetectorConfig { bound_mode, ..DetectorConfig::default() },
            )?),
            Algo::Naive => Box::new(CellDetector::new(q.clone(), DetectorConfig::naive())?),
            Algo::Gaps | Algo::Kgaps => Box::new(GridDetector::new(q.clone())?),
            Algo::Mgaps | Algo::Kmgaps => Box::new(MultiGridDetector::new(q.clone())?),
            Algo::Kccs => Box::new(LeveledCellDetector::new(q.clone())?),
            Algo::Oracle => Box::new(OracleDetector::new(q.clone())?),
        })
    }
}

/// Replays a stream of objects through a detector, reporting each result to
/// the emitter. Returns the number of processed events.
pub fn replay<W: Write>(
    objects: impl IntoIterator<Item = Result<SpatialObject, crate::stream::ParseError>>,
    q: &Query,
    detector: &mut dyn Detector,
    emitter: &mut Emitter<W>,
) -> Result<u64, RunError> {
    let mut sched = EventScheduler::new(q.clone())?;
    let mut events = 0u64;
    for obj in objects {
        let obj = obj?;
        for e in sched.advance(obj.t_c) {
            events += 1;
            emitter.observe(e.due, detector.on_event(&e)?)?;
        }
        for e in sched.admit(&obj)? {
            events += 1;
            emitter.observe(e.due, detector.on_event(&e)?)?;
        }
    }
    for e in sched.drain() {
        events += 1;
        emitter.observe(e.due, detector.on_event(&e)?)?;
    }
    emitter.finish()?;
    Ok(events)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::emit::EmitMode;

    #[test]
    fn algo_names_round_trip() {
        for a in Algo::ALL {
            assert_eq!(Algo::parse(a.name()).unwrap(), a);
        }
        assert!(Algo::parse("nope").is_err());
    }

    #[test]
    fn single_region_algos_reject_k_above_one() {
        let q = Query::new(1.0, 1.0, 1.0).with_k(2);
        assert!(Algo::Ccs.build(&q, BoundMode::Both).is_err());
        assert!(Algo::Kccs.build(&q, BoundMode::Both).is_ok());
    }

    #[test]
    fn replay_counts_three_events_per_object() {
        let q = Query::new(1.0, 1.0, 5.0);
        let mut det = Algo::Gaps.build(&q, BoundMode::Both).unwrap();
        let mut emitter = Emitter::new(EmitMode::PerEvent, "gaps", Vec::new());
        let objs = (0..10u64).map(|i| {
            Ok(SpatialObject { id: i, w: 1.0, x: i as f64, y: 0.0, t_c: i as f64 })
        });
        let events = replay(objs, &q, det.as_mut(), &mut emitter).unwrap();
        assert_eq!(events, 30);
        assert_eq!(emitter.lines_written(), 30);
    }
}
