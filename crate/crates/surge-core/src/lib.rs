//! Continuous bursty-region detection over a stream of weighted spatial
//! objects.
//!
//! Given a region size, a sliding-window length and a balance parameter
//! `alpha`, the engine keeps track of the axis-aligned region of that size
//! whose burst score — a blend of current-window mass and window-over-window
//! increase — is maximal, along with the top-k such regions.
//!
//! Detectors, from exact to approximate:
//!
//! - [`cellindex::CellDetector`] — exact. Maintains a grid of region-sized
//!   cells with static and dynamic score upper bounds and cached per-cell
//!   candidate points; only cells whose bound exceeds the running best are
//!   re-searched with the sweep-line ([`sweepline::max_point`]).
//! - [`approx::GridDetector`] — treats grid cells themselves as candidate
//!   regions. Constant-time updates, `(1 - alpha) / 4` approximation
//!   guarantee.
//! - [`approx::MultiGridDetector`] — same, over four half-shifted grids;
//!   returns the best of the four.
//! - [`topk::LeveledCellDetector`] — exact top-k via per-level bounds and
//!   candidate points.
//! - [`oracle`] — brute-force reference implementations used by the test
//!   suites and the `oracle` CLI algorithm.
//!
//! The [`window::EventScheduler`] turns the time-ordered object stream into
//! the New/Grown/Expired event stream all detectors consume.

pub mod approx;
pub mod cellindex;
pub mod detector;
pub mod model;
pub mod oracle;
pub mod sweepline;
pub mod topk;
pub mod window;

pub use model::{
    burst_score, region_from_point, to_rectangle, window_score, window_tag, BurstResult,
    ModelError, ObjectId, Point, Query, Rect, RectObject, ScorePair, SpatialObject, TopKResult,
    WindowTag, SCORE_EPS,
};
pub use window::{Event, EventKind, EventScheduler, StreamError};
