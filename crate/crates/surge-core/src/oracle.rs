//! Independent brute-force reference implementations.
//!
//! These recompute results from the raw object registry on every call and
//! share no code path with the incremental detectors; they are the ground
//! truth the test suites compare against.

use thiserror::Error;

use crate::model::{
    burst_score, region_from_point, BurstResult, Point, Query, Rect, ScorePair, SpatialObject,
    TopKResult, WindowTag,
};

/// Upper bound on snapshot size accepted by the cubic-time oracle.
pub const ORACLE_MAX_OBJECTS: usize = 5000;

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("snapshot holds {0} live objects; the oracle refuses more than {ORACLE_MAX_OBJECTS}")]
    TooManyObjects(usize),
    #[error("k must be at least 1")]
    ZeroK,
}

/// A frozen instant of the stream: the live objects and their window tags.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub now: f64,
    pub objects: Vec<(SpatialObject, WindowTag)>,
}

impl Snapshot {
    pub fn new(now: f64, objects: Vec<(SpatialObject, WindowTag)>) -> Self {
        Snapshot { now, objects }
    }

    /// Tags each object by the half-open window rule and drops objects no
    /// longer in either window.
    pub fn from_objects(objects: &[SpatialObject], now: f64, window_len: f64) -> Self {
        let objects = objects
            .iter()
            .filter_map(|o| crate::model::window_tag(o.t_c, now, window_len).map(|t| (*o, t)))
            .collect();
        Snapshot { now, objects }
    }

    /// Snapshot of a scheduler's live registry.
    pub fn from_scheduler(s: &crate::window::EventScheduler) -> Self {
        let objects = s
            .live()
            .map(|(g, tag)| {
                (SpatialObject { id: g.id, w: g.w, x: g.x, y: g.y, t_c: g.t_c }, tag)
            })
            .collect();
        Snapshot { now: s.now(), objects }
    }
}

/// Event-by-event registry of live objects, for building snapshots that are
/// exactly in step with a detector consuming the same events.
#[derive(Debug)]
pub struct LiveMirror {
    window_len: f64,
    now: f64,
    live: std::collections::HashMap<crate::model::ObjectId, SpatialObject>,
}

impl LiveMirror {
    pub fn new(window_len: f64) -> Self {
        LiveMirror {
            window_len,
            now: f64::NEG_INFINITY,
            live: std::collections::HashMap::new(),
        }
    }

    pub fn apply(&mut self, e: &crate::window::Event) {
        self.now = self.now.max(e.due);
        match e.kind {
            crate::window::EventKind::New => {
                let g = e.rect;
                self.live.insert(
                    g.id,
                    SpatialObject { id: g.id, w: g.w, x: g.x, y: g.y, t_c: g.t_c },
                );
            }
            crate::window::EventKind::Grown => {}
            crate::window::EventKind::Expired => {
                self.live.remove(&e.rect.id);
            }
        }
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    pub fn snapshot(&self) -> Snapshot {
        let objects: Vec<_> = self.live.values().copied().collect();
        Snapshot::from_objects(&objects, self.now, self.window_len)
    }
}

/// Scores of a region over the snapshot's objects (closed containment).
pub fn region_scores(region: &Rect, s: &Snapshot, window_len: f64) -> ScorePair {
    let mut wc = 0.0;
    let mut wp = 0.0;
    for (o, tag) in &s.objects {
        if region.contains_xy(o.x, o.y) {
            match tag {
                WindowTag::Current => wc += o.w,
                WindowTag::Past => wp += o.w,
            }
        }
    }
    ScorePair::new(wc / window_len, wp / window_len)
}

/// Scores of a candidate point over the snapshot, evaluated through the
/// region it induces.
pub fn candidate_scores(p: Point, s: &Snapshot, q: &Query) -> ScorePair {
    region_scores(&region_from_point(p, q), s, q.window_len)
}

/// Candidate coordinates along one axis: every interval boundary plus the
/// midpoint of each gap between consecutive boundaries.
///
/// Boundaries alone are not enough: an optimal region may need to stop just
/// short of a past-window object to avoid its mass, which only a point in the
/// open gap between boundaries can represent. Boundaries still matter because
/// coverage is closed, so maxima can sit exactly on shared edges.
fn axis_candidates(mut values: Vec<f64>, domain: Option<(f64, f64)>) -> Vec<f64> {
    if let Some((lo, hi)) = domain {
        values.push(lo);
        values.push(hi);
    }
    values.sort_by(f64::total_cmp);
    values.dedup();
    let mut out = Vec::with_capacity(values.len() * 2);
    for (i, &v) in values.iter().enumerate() {
        out.push(v);
        if let Some(&next) = values.get(i + 1) {
            out.push((v + next) / 2.0);
        }
    }
    if let Some((lo, hi)) = domain {
        out.retain(|&c| lo <= c && c <= hi);
    }
    out
}

fn in_area(o: &SpatialObject, q: &Query) -> bool {
    q.area.is_none_or(|a| a.contains_xy(o.x, o.y))
}

/// Maximum-burst-score region of a snapshot by exhaustive candidate-point
/// evaluation, `O(n^3)`.
///
/// Every point of the plane lies in some cell of the arrangement induced by
/// the rectangle edges of the dual problem, the score is constant on each
/// cell, and every cell (face, edge segment, or vertex) contains a candidate
/// of the boundary-plus-midpoint set evaluated here.
pub fn brute_best(s: &Snapshot, q: &Query) -> Result<BurstResult, OracleError> {
    if s.objects.len() > ORACLE_MAX_OBJECTS {
        return Err(OracleError::TooManyObjects(s.objects.len()));
    }
    let objs: Vec<_> = s.objects.iter().filter(|(o, _)| in_area(o, q)).collect();
    if objs.is_empty() {
        return Ok(BurstResult::unplaced(s.now, 1));
    }

    let x_domain = q.point_domain().map(|d| (d.x_min, d.x_max));
    let y_domain = q.point_domain().map(|d| (d.y_min, d.y_max));
    let xs = axis_candidates(
        objs.iter().flat_map(|(o, _)| [o.x, o.x + q.width]).collect(),
        x_domain,
    );
    let ys = axis_candidates(
        objs.iter().flat_map(|(o, _)| [o.y, o.y + q.height]).collect(),
        y_domain,
    );
    if xs.is_empty() || ys.is_empty() {
        return Ok(BurstResult::unplaced(s.now, 1));
    }

    // For each candidate y, accumulate the weight every candidate x would
    // enclose via difference arrays over the sorted x candidates.
    let mut diff_c = vec![0.0f64; xs.len() + 1];
    let mut diff_p = vec![0.0f64; xs.len() + 1];
    let mut best: Option<(f64, Point, ScorePair)> = None;
    for &yc in &ys {
        diff_c.fill(0.0);
        diff_p.fill(0.0);
        for (o, tag) in &objs {
            // The rectangle of o covers (xc, yc) iff o.x <= xc <= o.x + width
            // and likewise in y.
            if !(o.y <= yc && yc <= o.y + q.height) {
                continue;
            }
            let lo = xs.partition_point(|&c| c < o.x);
            let hi = xs.partition_point(|&c| c <= o.x + q.width);
            if lo >= hi {
                continue;
            }
            match tag {
                WindowTag::Current => {
                    diff_c[lo] += o.w;
                    diff_c[hi] -= o.w;
                }
                WindowTag::Past => {
                    diff_p[lo] += o.w;
                    diff_p[hi] -= o.w;
                }
            }
        }
        let mut wc = 0.0;
        let mut wp = 0.0;
        for (i, &xc) in xs.iter().enumerate() {
            wc += diff_c[i];
            wp += diff_p[i];
            let pair = ScorePair::new(wc / q.window_len, wp / q.window_len);
            let score = burst_score(pair, q.alpha);
            if best.is_none_or(|(b, _, _)| score > b) {
                best = Some((score, Point::new(xc, yc), pair));
            }
        }
    }

    let (_, point, pair) = best.unwrap();
    Ok(BurstResult::placed(point, q, pair, s.now, 1))
}

/// Greedy top-k: repeatedly take the best region over the objects not yet
/// covered by an earlier pick.
pub fn brute_topk(s: &Snapshot, q: &Query, k: usize) -> Result<TopKResult, OracleError> {
    if k == 0 {
        return Err(OracleError::ZeroK);
    }
    let mut remaining = s.clone();
    let mut entries = Vec::with_capacity(k);
    for rank in 1..=k {
        let mut r = brute_best(&remaining, q)?;
        r.rank = rank;
        if r.placed {
            remaining.objects.retain(|(o, _)| !r.region.contains_xy(o.x, o.y));
        }
        entries.push(r);
    }
    Ok(TopKResult { t: s.now, entries })
}
