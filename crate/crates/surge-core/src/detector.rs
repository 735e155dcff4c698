//! Uniform event-driven interface over the detectors, used by the CLI and
//! the benchmark harness.

use thiserror::Error;

use crate::approx::{GridDetector, MultiGridDetector};
use crate::cellindex::CellDetector;
use crate::model::TopKResult;
use crate::oracle::{brute_topk, OracleError, Snapshot};
use crate::topk::LeveledCellDetector;
use crate::window::Event;

#[derive(Debug, Error)]
pub enum DetectorError {
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

/// Anything that consumes lifecycle events and reports top-k regions.
pub trait Detector {
    fn on_event(&mut self, e: &Event) -> Result<TopKResult, DetectorError>;

    /// Sweep-line invocations so far, for detectors that search cells.
    fn sweep_count(&self) -> Option<u64> {
        None
    }
}

impl Detector for CellDetector {
    fn on_event(&mut self, e: &Event) -> Result<TopKResult, DetectorError> {
        Ok(TopKResult::single(self.on_event(e)))
    }

    fn sweep_count(&self) -> Option<u64> {
        Some(self.sweep_count())
    }
}

impl Detector for GridDetector {
    fn on_event(&mut self, e: &Event) -> Result<TopKResult, DetectorError> {
        let k = self.query().k;
        if k == 1 {
            Ok(TopKResult::single(self.on_event(e)))
        } else {
            self.on_event(e);
            Ok(self.top_k(k).expect("k validated at construction"))
        }
    }
}

impl Detector for MultiGridDetector {
    fn on_event(&mut self, e: &Event) -> Result<TopKResult, DetectorError> {
        let k = self.query().k;
        if k == 1 {
            Ok(TopKResult::single(self.on_event(e)))
        } else {
            self.on_event(e);
            Ok(self.top_k(k).expect("k validated at construction"))
        }
    }
}

impl Detector for LeveledCellDetector {
    fn on_event(&mut self, e: &Event) -> Result<TopKResult, DetectorError> {
        Ok(self.on_event(e))
    }

    fn sweep_count(&self) -> Option<u64> {
        Some(self.sweep_count())
    }
}

/// Replays the brute-force reference per event; only viable for small live
/// sets (the oracle guard applies).
#[derive(Debug)]
pub struct OracleDetector {
    query: crate::model::Query,
    mirror: crate::oracle::LiveMirror,
}

impl OracleDetector {
    pub fn new(query: crate::model::Query) -> Result<Self, crate::model::ModelError> {
        query.validate()?;
        let mirror = crate::oracle::LiveMirror::new(query.window_len);
        Ok(OracleDetector { query, mirror })
    }

    pub fn snapshot(&self) -> Snapshot {
        self.mirror.snapshot()
    }
}

impl Detector for OracleDetector {
    fn on_event(&mut self, e: &Event) -> Result<TopKResult, DetectorError> {
        self.mirror.apply(e);
        Ok(brute_topk(&self.mirror.snapshot(), &self.query, self.query.k)?)
    }
}
