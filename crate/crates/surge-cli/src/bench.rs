//! Benchmark harness: replays one stream through several algorithms
//! sequentially, timing every event, and emits a machine-readable report
//! plus a human-readable table.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use surge_core::cellindex::BoundMode;
use surge_core::model::{Query, SpatialObject};
use surge_core::window::EventScheduler;

use crate::run::{Algo, RunError};

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct ScoreSample {
    pub t: f64,
    pub score: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct AlgoReport {
    pub algo: String,
    pub objects: u64,
    pub events: u64,
    /// Events excluded from the timing statistics by warm-up.
    pub warmup_skipped: u64,
    pub mean_event_ns: f64,
    pub median_event_ns: f64,
    pub p99_event_ns: f64,
    /// Sweep-line searches, for the cell-based exact variants.
    pub sweeps: Option<u64>,
    pub final_score: f64,
    /// Rank-1 score at sampled snapshots.
    pub score_samples: Vec<ScoreSample>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct BenchReport {
    pub width: f64,
    pub height: f64,
    pub window_len: f64,
    pub alpha: f64,
    pub k: usize,
    pub algos: Vec<AlgoReport>,
}

fn percentile(sorted: &[u64], p: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let idx = ((sorted.len() as f64 - 1.0) * p).round() as usize;
    sorted[idx] as f64
}

/// Runs one algorithm over the whole stream, timing each `on_event` call.
/// With `warmup`, events before the first expiry are processed but excluded
/// from the timing statistics, measuring only the stable regime where both
/// windows carry mass.
pub fn run_algo(
    objects: &[SpatialObject],
    q: &Query,
    algo: Algo,
    bound_mode: BoundMode,
    warmup: bool,
) -> Result<AlgoReport, RunError> {
    let mut detector = algo.build(q, bound_mode)?;
    let mut sched = EventScheduler::new(q.clone())?;
    let mut timings: Vec<u64> = Vec::new();
    let mut events = 0u64;
    let mut skipped = 0u64;
    let mut stable = !warmup;
    let mut samples: Vec<ScoreSample> = Vec::new();
    let sample_every = (objects.len() * 3 / 512).max(1) as u64;
    let mut final_score = 0.0;

    let mut handle = |e: &surge_core::window::Event,
                      detector: &mut dyn surge_core::detector::Detector,
                      timings: &mut Vec<u64>,
                      samples: &mut Vec<ScoreSample>|
     -> Result<(), RunError> {
        events += 1;
        stable |= e.kind == surge_core::window::EventKind::Expired;
        let start = Instant::now();
        let r = detector.on_event(e)?;
        if stable {
            timings.push(start.elapsed().as_nanos() as u64);
        } else {
            skipped += 1;
        }
        let score = r.best().score;
        final_score = score;
        if events.is_multiple_of(sample_every) {
            samples.push(ScoreSample { t: e.due, score });
        }
        Ok(())
    };

    for o in objects {
        for e in sched.advance(o.t_c) {
            handle(&e, detector.as_mut(), &mut timings, &mut samples)?;
        }
        for e in sched.admit(o)? {
            handle(&e, detector.as_mut(), &mut timings, &mut samples)?;
        }
    }
    for e in sched.drain() {
        handle(&e, detector.as_mut(), &mut timings, &mut samples)?;
    }

    let mean = timings.iter().sum::<u64>() as f64 / timings.len().max(1) as f64;
    timings.sort_unstable();
    let algo_name = match (algo, bound_mode) {
        (Algo::Ccs, BoundMode::StaticOnly) => "bccs".to_string(),
        _ => algo.name().to_string(),
    };
    Ok(AlgoReport {
        algo: algo_name,
        objects: sched.admitted_count(),
        events,
        warmup_skipped: skipped,
        mean_event_ns: mean,
        median_event_ns: percentile(&timings, 0.5),
        p99_event_ns: percentile(&timings, 0.99),
        sweeps: detector.sweep_count(),
        final_score,
        score_samples: samples,
    })
}

/// Benchmarks each algorithm sequentially on the same stream.
pub fn run_bench(
    objects: &[SpatialObject],
    q: &Query,
    algos: &[Algo],
    bound_mode: BoundMode,
    warmup: bool,
) -> Result<BenchReport, RunError> {
    let mut reports = Vec::with_capacity(algos.len());
    for &algo in algos {
        reports.push(run_algo(objects, q, algo, bound_mode, warmup)?);
    }
    Ok(BenchReport {
        width: q.width,
        height: q.height,
        window_len: q.window_len,
        alpha: q.alpha,
        k: q.k,
        algos: reports,
    })
}

/// Plain-text table for terminals.
pub fn human_table(report: &BenchReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "region {}x{}  window {}s  alpha {}  k {}\n",
        report.width, report.height, report.window_len, report.alpha, report.k
    ));
    out.push_str(&format!(
        "{:<8} {:>10} {:>12} {:>12} {:>12} {:>10} {:>14}\n",
        "algo", "events", "mean ns/ev", "median ns", "p99 ns", "sweeps", "final score"
    ));
    for a in &report.algos {
        out.push_str(&format!(
            "{:<8} {:>10} {:>12.0} {:>12.0} {:>12.0} {:>10} {:>14.6}\n",
            a.algo,
            a.events,
            a.mean_event_ns,
            a.median_event_ns,
            a.p99_event_ns,
            a.sweeps.map_or_else(|| "-".into(), |s| s.to_string()),
            a.final_score,
        ));
    }
    out
}
