//! Domain types shared by every detector: weighted spatial objects, queries,
//! the rectangle reduction, and the burst-score function.
//!
//! The engine watches a stream of weighted points and continuously reports the
//! axis-aligned `a x b` region whose *burst score* is maximal. The score of a
//! region blends how much weight it holds in the current window with how much
//! that weight grew relative to the previous window:
//!
//! ```text
//! S(r) = alpha * max(f(r, W_c) - f(r, W_p), 0) + (1 - alpha) * f(r, W_c)
//! ```
//!
//! where `f(r, W)` is the weight sum of objects created in window `W` and
//! located in `r`, divided by the window length.
//!
//! Instead of searching regions directly, detectors work on the dual *point*
//! problem: every object spawns an `a x b` rectangle anchored at the object,
//! and the region whose top-right corner sits at a maximum-score point of the
//! rectangle arrangement is a maximum-score region. [`to_rectangle`] and
//! [`region_from_point`] implement the two directions of that reduction.

use thiserror::Error;

/// Sequence number assigned to objects in arrival order.
pub type ObjectId = u64;

/// Absolute tolerance for score comparisons throughout the engine.
pub const SCORE_EPS: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("window length must be positive, got {0}")]
    NonPositiveWindow(f64),
    #[error("region size must be positive, got width {width} x height {height}")]
    NonPositiveSize { width: f64, height: f64 },
    #[error("alpha must lie in [0, 1), got {0}")]
    AlphaOutOfRange(f64),
    #[error("k must be at least 1")]
    ZeroK,
    #[error("preferred area {area:?} cannot hold a {width} x {height} region")]
    AreaTooSmall { area: Rect, width: f64, height: f64 },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("negative weight {0}")]
    NegativeWeight(f64),
}

/// A weighted, timestamped point from the input stream.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpatialObject {
    pub id: ObjectId,
    /// Non-negative weight.
    pub w: f64,
    pub x: f64,
    pub y: f64,
    /// Creation timestamp in seconds; nondecreasing in `id` order.
    pub t_c: f64,
}

/// Closed axis-aligned box, used for preferred areas, grid cells and results.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl Rect {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Self {
        Rect { x_min, y_min, x_max, y_max }
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    /// True when the box contains at least one point (degenerate boxes count).
    pub fn is_nonempty(&self) -> bool {
        self.x_min <= self.x_max && self.y_min <= self.y_max
    }

    pub fn contains(&self, p: Point) -> bool {
        self.x_min <= p.x && p.x <= self.x_max && self.y_min <= p.y && p.y <= self.y_max
    }

    pub fn contains_xy(&self, x: f64, y: f64) -> bool {
        self.contains(Point { x, y })
    }

    /// Closed intersection test; boxes sharing only an edge still intersect.
    pub fn intersects(&self, other: &Rect) -> bool {
        self.x_min <= other.x_max
            && other.x_min <= self.x_max
            && self.y_min <= other.y_max
            && other.y_min <= self.y_max
    }

    /// Overlap with positive area; edge-touching boxes do not overlap.
    pub fn overlaps_interior(&self, other: &Rect) -> bool {
        self.x_min < other.x_max
            && other.x_min < self.x_max
            && self.y_min < other.y_max
            && other.y_min < self.y_max
    }

    pub fn intersection(&self, other: &Rect) -> Option<Rect> {
        let r = Rect::new(
            self.x_min.max(other.x_min),
            self.y_min.max(other.y_min),
            self.x_max.min(other.x_max),
            self.y_max.min(other.y_max),
        );
        r.is_nonempty().then_some(r)
    }
}

/// A point in the plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }
}

/// A continuous detection query: region size, window length, score balance
/// and result count.
#[derive(Debug, Clone, PartialEq)]
pub struct Query {
    /// Preferred area; `None` means the whole plane.
    pub area: Option<Rect>,
    /// Region extent along x (`b`).
    pub width: f64,
    /// Region extent along y (`a`).
    pub height: f64,
    /// Length of the current and past windows, in seconds.
    pub window_len: f64,
    /// Balance between burstiness and significance, in `[0, 1)`.
    pub alpha: f64,
    /// Number of regions to report.
    pub k: usize,
}

impl Query {
    /// Query over the whole plane with `alpha = 0.5` and `k = 1`.
    pub fn new(width: f64, height: f64, window_len: f64) -> Self {
        Query { area: None, width, height, window_len, alpha: 0.5, k: 1 }
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn with_area(mut self, area: Rect) -> Self {
        self.area = Some(area);
        self
    }

    pub fn with_k(mut self, k: usize) -> Self {
        self.k = k;
        self
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        for (v, name) in [
            (self.width, "width"),
            (self.height, "height"),
            (self.window_len, "window_len"),
            (self.alpha, "alpha"),
        ] {
            if !v.is_finite() {
                return Err(ModelError::NonFinite(name));
            }
        }
        if self.width <= 0.0 || self.height <= 0.0 {
            return Err(ModelError::NonPositiveSize { width: self.width, height: self.height });
        }
        if self.window_len <= 0.0 {
            return Err(ModelError::NonPositiveWindow(self.window_len));
        }
        // alpha = 1 would zero out the significance term and void the
        // approximation guarantee, so it is rejected outright.
        if !(0.0..1.0).contains(&self.alpha) {
            return Err(ModelError::AlphaOutOfRange(self.alpha));
        }
        if self.k == 0 {
            return Err(ModelError::ZeroK);
        }
        if let Some(area) = self.area {
            if !area.is_nonempty()
                || area.width() < self.width
                || area.height() < self.height
            {
                return Err(ModelError::AreaTooSmall {
                    area,
                    width: self.width,
                    height: self.height,
                });
            }
        }
        Ok(())
    }

    /// Domain of candidate points for the dual problem: clamped so that the
    /// region reconstructed from any point in it lies inside the preferred
    /// area. `None` when the whole plane is allowed.
    pub fn point_domain(&self) -> Option<Rect> {
        self.area.map(|a| {
            Rect::new(a.x_min + self.width, a.y_min + self.height, a.x_max, a.y_max)
        })
    }
}

/// The `a x b` rectangle generated from a stream object, anchored at the
/// object's position (left-bottom corner). Covers `[x, x+b] x [y, y+a]`,
/// closed on all edges.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RectObject {
    pub id: ObjectId,
    pub w: f64,
    /// Left-bottom corner; equals the originating object's position.
    pub x: f64,
    pub y: f64,
    pub t_c: f64,
    /// Top-k visibility level in `1..=k`; starts at `k`.
    pub lvl: usize,
}

impl RectObject {
    pub fn x_hi(&self, q: &Query) -> f64 {
        self.x + q.width
    }

    pub fn y_hi(&self, q: &Query) -> f64 {
        self.y + q.height
    }

    pub fn extent(&self, q: &Query) -> Rect {
        Rect::new(self.x, self.y, self.x + q.width, self.y + q.height)
    }

    /// Closed coverage: points on the boundary count.
    pub fn covers(&self, p: Point, q: &Query) -> bool {
        self.extent(q).contains(p)
    }
}

/// Scores of one region or point with respect to the two windows.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ScorePair {
    /// Score w.r.t. the current window (weight per second).
    pub f_c: f64,
    /// Score w.r.t. the past window.
    pub f_p: f64,
}

impl ScorePair {
    pub fn new(f_c: f64, f_p: f64) -> Self {
        ScorePair { f_c, f_p }
    }
}

/// Which window an object currently sits in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowTag {
    Current,
    Past,
}

/// Window membership of an object created at `t_c` when the clock reads
/// `now`: current while `now < t_c + len`, past while `now < t_c + 2 len`.
///
/// This is the half-open convention `W_c = (now - len, now]`,
/// `W_p = (now - 2 len, now - len]` rewritten so the boundary comparisons use
/// the exact same floating-point sums (`t_c + len`, `t_c + 2 len`) as the
/// event scheduler's due times. Recounts therefore agree bit-for-bit with the
/// event-driven state even when `now - len` does not round back to `t_c`.
pub fn window_tag(t_c: f64, now: f64, window_len: f64) -> Option<WindowTag> {
    if t_c <= now && now < t_c + window_len {
        Some(WindowTag::Current)
    } else if now >= t_c + window_len && now < t_c + 2.0 * window_len {
        Some(WindowTag::Past)
    } else {
        None
    }
}

/// Burst score from a pair of window scores.
///
/// Nondecreasing in `f_c`, nonincreasing in `f_p`, never negative, and never
/// above `f_c`.
pub fn burst_score(s: ScorePair, alpha: f64) -> f64 {
    alpha * (s.f_c - s.f_p).max(0.0) + (1.0 - alpha) * s.f_c
}

/// Weight sum normalized by the window length.
pub fn window_score(weights: &[f64], window_len: f64) -> Result<f64, ModelError> {
    if window_len <= 0.0 || window_len.is_nan() {
        return Err(ModelError::NonPositiveWindow(window_len));
    }
    Ok(weights.iter().sum::<f64>() / window_len)
}

/// Maps a stream object to its rectangle, or `None` when the object falls
/// outside the preferred area.
pub fn to_rectangle(o: &SpatialObject, q: &Query) -> Option<RectObject> {
    if let Some(area) = q.area {
        if !area.contains_xy(o.x, o.y) {
            return None;
        }
    }
    Some(RectObject { id: o.id, w: o.w, x: o.x, y: o.y, t_c: o.t_c, lvl: q.k })
}

/// Region whose top-right corner sits at `p`. Objects inside the region are
/// exactly the objects whose rectangles cover `p`.
pub fn region_from_point(p: Point, q: &Query) -> Rect {
    Rect::new(p.x - q.width, p.y - q.height, p.x, p.y)
}

/// One detected region with its score and snapshot time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BurstResult {
    pub region: Rect,
    /// Top-right corner of the region; the maximizing point of the dual
    /// problem.
    pub point: Point,
    pub score: f64,
    /// Snapshot timestamp.
    pub t: f64,
    /// 1-based rank.
    pub rank: usize,
    /// False for padding entries that carry no region (score 0).
    pub placed: bool,
}

impl BurstResult {
    pub fn placed(point: Point, q: &Query, scores: ScorePair, t: f64, rank: usize) -> Self {
        BurstResult {
            region: region_from_point(point, q),
            point,
            score: burst_score(scores, q.alpha),
            t,
            rank,
            placed: true,
        }
    }

    /// Padding entry used when fewer than `k` positive-score regions exist.
    pub fn unplaced(t: f64, rank: usize) -> Self {
        BurstResult {
            region: Rect::new(0.0, 0.0, 0.0, 0.0),
            point: Point::new(0.0, 0.0),
            score: 0.0,
            t,
            rank,
            placed: false,
        }
    }
}

/// Ranked list of detected regions; always `k` entries, padded with unplaced
/// zero-score entries when fewer positive-score regions exist.
#[derive(Debug, Clone, PartialEq)]
pub struct TopKResult {
    pub t: f64,
    pub entries: Vec<BurstResult>,
}

impl TopKResult {
    pub fn single(r: BurstResult) -> Self {
        TopKResult { t: r.t, entries: vec![r] }
    }

    /// The rank-1 entry.
    pub fn best(&self) -> &BurstResult {
        &self.entries[0]
    }

    pub fn scores(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.score).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= SCORE_EPS
    }

    #[test]
    fn burst_score_examples() {
        assert!(close(burst_score(ScorePair::new(3.0, 0.0), 0.5), 3.0));
        assert!(close(burst_score(ScorePair::new(0.0, 7.0), 0.5), 0.0));
        assert!(close(burst_score(ScorePair::new(1.0, 1.0), 0.5), 0.5));
        assert!(close(burst_score(ScorePair::new(5.0, 10.0), 0.0), 5.0));
    }

    #[test]
    fn burst_score_never_exceeds_current_score() {
        for &(f_c, f_p, alpha) in &[
            (3.0, 0.0, 0.5),
            (2.0, 5.0, 0.9),
            (7.5, 2.5, 0.1),
            (0.0, 0.0, 0.3),
        ] {
            let s = burst_score(ScorePair::new(f_c, f_p), alpha);
            assert!(s >= 0.0);
            assert!(s <= f_c + SCORE_EPS);
        }
    }

    #[test]
    fn window_score_examples() {
        assert!(close(window_score(&[1.0, 1.0, 1.0], 1.0).unwrap(), 3.0));
        assert!(close(window_score(&[], 5.0).unwrap(), 0.0));
        assert!(close(window_score(&[2.0, 3.0], 2.5).unwrap(), 2.0));
        assert!(window_score(&[1.0], 0.0).is_err());
        assert!(window_score(&[1.0], -2.0).is_err());
    }

    #[test]
    fn to_rectangle_spans_object_anchor() {
        let q = Query::new(1.0, 1.0, 5.0);
        let o = SpatialObject { id: 0, w: 1.0, x: 2.0, y: 3.0, t_c: 10.0 };
        let g = to_rectangle(&o, &q).unwrap();
        assert_eq!(g.extent(&q), Rect::new(2.0, 3.0, 3.0, 4.0));
        assert_eq!(g.w, o.w);
        assert_eq!(g.t_c, o.t_c);
    }

    #[test]
    fn to_rectangle_filters_by_area() {
        let q = Query::new(1.0, 1.0, 5.0).with_area(Rect::new(0.0, 0.0, 10.0, 10.0));
        let inside = SpatialObject { id: 0, w: 1.0, x: 2.0, y: 3.0, t_c: 1.0 };
        let outside = SpatialObject { id: 1, w: 1.0, x: 12.0, y: 3.0, t_c: 1.0 };
        assert!(to_rectangle(&inside, &q).is_some());
        assert!(to_rectangle(&outside, &q).is_none());
    }

    #[test]
    fn every_admitted_object_generates_one_rectangle() {
        let q = Query::new(2.0, 2.0, 1.0);
        let objs: Vec<_> = (0..3)
            .map(|i| SpatialObject { id: i, w: 1.0, x: i as f64, y: 0.5, t_c: i as f64 * 0.1 })
            .collect();
        let rects: Vec<_> = objs.iter().filter_map(|o| to_rectangle(o, &q)).collect();
        assert_eq!(rects.len(), 3);
        assert!(rects.iter().all(|g| g.w == 1.0));
    }

    #[test]
    fn region_from_point_examples() {
        let q = Query::new(1.0, 1.0, 5.0);
        let r = region_from_point(Point::new(5.0, 5.0), &q);
        assert_eq!(r, Rect::new(4.0, 4.0, 5.0, 5.0));

        // Round trip: the region rebuilt from a rectangle's top-right corner
        // contains the originating object.
        let o = SpatialObject { id: 0, w: 1.0, x: 2.0, y: 3.0, t_c: 10.0 };
        let g = to_rectangle(&o, &q).unwrap();
        let region = region_from_point(Point::new(g.x_hi(&q), g.y_hi(&q)), &q);
        assert!(region.contains_xy(o.x, o.y));
    }

    #[test]
    fn query_validation() {
        assert!(Query::new(1.0, 1.0, 1.0).validate().is_ok());
        assert!(Query::new(0.0, 1.0, 1.0).validate().is_err());
        assert!(Query::new(1.0, 1.0, 0.0).validate().is_err());
        assert!(Query::new(1.0, 1.0, 1.0).with_alpha(1.0).validate().is_err());
        assert!(Query::new(1.0, 1.0, 1.0).with_alpha(-0.1).validate().is_err());
        assert!(Query::new(1.0, 1.0, 1.0).with_k(0).validate().is_err());
        // Area narrower than the region is rejected.
        let narrow = Query::new(4.0, 1.0, 1.0).with_area(Rect::new(0.0, 0.0, 3.0, 10.0));
        assert!(narrow.validate().is_err());
    }

    #[test]
    fn point_domain_clamps_for_area() {
        let q = Query::new(2.0, 1.0, 1.0).with_area(Rect::new(0.0, 0.0, 10.0, 8.0));
        let d = q.point_domain().unwrap();
        assert_eq!(d, Rect::new(2.0, 1.0, 10.0, 8.0));
        // Regions rebuilt from domain corners stay inside the area.
        let a = q.area.unwrap();
        for p in [
            Point::new(d.x_min, d.y_min),
            Point::new(d.x_max, d.y_max),
        ] {
            let r = region_from_point(p, &q);
            assert!(r.x_min >= a.x_min && r.x_max <= a.x_max);
            assert!(r.y_min >= a.y_min && r.y_max <= a.y_max);
        }
    }

    #[test]
    fn window_tag_half_open_boundaries() {
        // now exactly at t_c + len: the object has just moved to the past
        // window, matching the scheduler processing its grown event first.
        assert_eq!(window_tag(10.0, 10.0, 5.0), Some(WindowTag::Current));
        assert_eq!(window_tag(10.0, 14.999, 5.0), Some(WindowTag::Current));
        assert_eq!(window_tag(10.0, 15.0, 5.0), Some(WindowTag::Past));
        assert_eq!(window_tag(10.0, 19.999, 5.0), Some(WindowTag::Past));
        assert_eq!(window_tag(10.0, 20.0, 5.0), None);
        assert_eq!(window_tag(10.0, 9.0, 5.0), None);
    }
}
