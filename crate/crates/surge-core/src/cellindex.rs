//! Exact continuous detector: a grid of region-sized cells with score upper
//! bounds, cached candidate points, and lazy re-search.
//!
//! Each event touches at most a handful of cells. Per cell the detector keeps
//! two upper bounds on the best point score inside it:
//!
//! - the *static* bound `U_s`, the current-window weight overlapping the cell
//!   divided by the window length — no point can score more;
//! - the *dynamic* bound `U_d`, the score found by the last sweep of the
//!   cell, aged per event kind (`New: += w/|W|`, `Grown: += 0`,
//!   `Expired: += alpha * w/|W|`).
//!
//! Cells are ranked by `min(U_s, U_d)` in an addressable max-heap with lazy
//! invalidation stamps. Each cell also caches the point returned by its last
//! sweep together with a validity flag; a cell whose bound tops the heap is
//! only re-swept when that flag has been invalidated.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use crate::model::{
    burst_score, BurstResult, ModelError, Point, Query, Rect, RectObject, ScorePair, SCORE_EPS,
};
use crate::sweepline;
use crate::window::{Event, EventKind};

/// Which upper bounds drive the lazy search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BoundMode {
    /// `min(U_s, U_d)` — the full detector.
    #[default]
    Both,
    /// `U_s` only.
    StaticOnly,
    /// No pruning: every affected cell is re-swept on every event.
    None,
}

/// Detector switches. The non-default settings exist for baselines and for
/// metamorphic tests; they never change emitted scores, only the work done.
#[derive(Debug, Clone, Copy)]
pub struct DetectorConfig {
    pub bound_mode: BoundMode,
    /// Keep candidate points valid across events when the validity rules
    /// allow it; `false` re-sweeps a touched cell whenever it tops the heap.
    pub candidate_shortcuts: bool,
    /// Search cells only when their bound tops the heap; `false` re-sweeps
    /// every affected cell at event time.
    pub lazy_search: bool,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig { bound_mode: BoundMode::Both, candidate_shortcuts: true, lazy_search: true }
    }
}

impl DetectorConfig {
    /// Baseline without bound estimation: search all affected cells per event.
    pub fn naive() -> Self {
        DetectorConfig {
            bound_mode: BoundMode::None,
            candidate_shortcuts: true,
            lazy_search: false,
        }
    }

    fn effective_lazy(&self) -> bool {
        self.lazy_search && self.bound_mode != BoundMode::None
    }
}

/// Grid coordinates of a cell; cell `(i, j)` spans
/// `[anchor + i*width, anchor + (i+1)*width]` and likewise in y, closed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CellKey {
    pub i: i64,
    pub j: i64,
}

/// Grid origin: the plane origin, or the preferred area's lower-left corner
/// so cells align with the valid domain.
pub fn grid_anchor(q: &Query) -> (f64, f64) {
    q.area.map_or((0.0, 0.0), |a| (a.x_min, a.y_min))
}

pub fn cell_bounds(key: CellKey, q: &Query) -> Rect {
    let (ax, ay) = grid_anchor(q);
    Rect::new(
        ax + key.i as f64 * q.width,
        ay + key.j as f64 * q.height,
        ax + (key.i + 1) as f64 * q.width,
        ay + (key.j + 1) as f64 * q.height,
    )
}

/// Cells whose closed bounds intersect the rectangle's closed extent: four in
/// generic position, up to nine when corners land exactly on grid lines.
///
/// Edge-touching cells must be included: a point on a shared cell boundary
/// belongs to both cells, and its full covering set is only present in a
/// cell's rectangle list if touching rectangles are listed too.
pub fn affected_cells(g: &RectObject, q: &Query) -> Vec<CellKey> {
    let (ax, ay) = grid_anchor(q);
    let u0 = (g.x - ax) / q.width;
    let u1 = (g.x + q.width - ax) / q.width;
    let v0 = (g.y - ay) / q.height;
    let v1 = (g.y + q.height - ay) / q.height;
    let i_lo = (u0 - 1.0).ceil() as i64;
    let i_hi = u1.floor() as i64;
    let j_lo = (v0 - 1.0).ceil() as i64;
    let j_hi = v1.floor() as i64;
    let mut out = Vec::with_capacity(((i_hi - i_lo + 1) * (j_hi - j_lo + 1)) as usize);
    for i in i_lo..=i_hi {
        for j in j_lo..=j_hi {
            out.push(CellKey { i, j });
        }
    }
    out
}

/// Cached maximizer of one cell. `point` is `None` when the cell has no
/// searchable domain (clamped away by the preferred area) or no live
/// rectangle; such candidates score zero and stay valid.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Candidate {
    pub(crate) point: Option<Point>,
    pub(crate) scores: ScorePair,
    pub(crate) valid: bool,
}

impl Candidate {
    pub(crate) fn score(&self, alpha: f64) -> f64 {
        if self.point.is_some() {
            burst_score(self.scores, alpha)
        } else {
            0.0
        }
    }
}

#[derive(Debug)]
struct Cell {
    /// Live rectangles overlapping this cell (closed intersection).
    rects: Vec<RectObject>,
    current_count: usize,
    u_static: f64,
    /// `+inf` until the first sweep: an unswept cell must never be trusted.
    u_dynamic: f64,
    candidate: Option<Candidate>,
    version: u64,
}

impl Cell {
    fn new() -> Self {
        Cell {
            rects: Vec::new(),
            current_count: 0,
            u_static: 0.0,
            u_dynamic: f64::INFINITY,
            candidate: None,
            version: 0,
        }
    }

    fn bound(&self, mode: BoundMode) -> f64 {
        match mode {
            BoundMode::StaticOnly => self.u_static,
            BoundMode::Both | BoundMode::None => self.u_static.min(self.u_dynamic),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct HeapEntry {
    pub(crate) key: f64,
    pub(crate) id: CellKey,
    pub(crate) version: u64,
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for HeapEntry {}
impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // Max by key; ties broken by cell id ascending for determinism.
        self.key
            .total_cmp(&other.key)
            .then_with(|| other.id.cmp(&self.id))
    }
}
impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// The exact continuous detector.
#[derive(Debug)]
pub struct CellDetector {
    query: Query,
    config: DetectorConfig,
    cells: HashMap<CellKey, Cell>,
    heap: BinaryHeap<HeapEntry>,
    now: f64,
    events: u64,
    sweeps: u64,
}

impl CellDetector {
    pub fn new(query: Query, config: DetectorConfig) -> Result<Self, ModelError> {
        query.validate()?;
        Ok(CellDetector {
            query,
            config,
            cells: HashMap::new(),
            heap: BinaryHeap::new(),
            now: f64::NEG_INFINITY,
            events: 0,
            sweeps: 0,
        })
    }

    pub fn with_defaults(query: Query) -> Result<Self, ModelError> {
        Self::new(query, DetectorConfig::default())
    }

    pub fn query(&self) -> &Query {
        &self.query
    }

    /// Number of sweep-line searches performed so far.
    pub fn sweep_count(&self) -> u64 {
        self.sweeps
    }

    pub fn event_count(&self) -> u64 {
        self.events
    }

    /// Processes one lifecycle event and returns the current bursty region.
    pub fn on_event(&mut self, e: &Event) -> BurstResult {
        self.apply_event(e);
        self.maybe_compact();
        self.current_best()
    }

    /// The update half of event processing: bounds, candidate statuses and
    /// cell membership, plus the eager sweeps when laziness is off.
    pub(crate) fn apply_event(&mut self, e: &Event) {
        self.now = self.now.max(e.due);
        self.events += 1;
        let keys = affected_cells(&e.rect, &self.query);
        for &key in &keys {
            self.apply_event_to_cell(key, e);
        }
        if !self.config.effective_lazy() {
            for &key in &keys {
                if self.cells.contains_key(&key) {
                    self.sweep_cell(key);
                }
            }
        }
    }

    fn apply_event_to_cell(&mut self, key: CellKey, e: &Event) {
        let q = &self.query;
        let dw = e.rect.w / q.window_len;
        let cell = match e.kind {
            EventKind::New => self.cells.entry(key).or_insert_with(Cell::new),
            _ => match self.cells.get_mut(&key) {
                Some(c) => c,
                None => return,
            },
        };

        // Candidate status first: the validity rules read the stored scores
        // before this event is applied to them.
        if let Some(cand) = cell.candidate.as_mut() {
            match cand.point {
                Some(p) if self.config.candidate_shortcuts => {
                    // A candidate survives only when this event provably
                    // raises its score as much as any other point's: a New or
                    // Expired rectangle covering it while its current-window
                    // score already dominates its past-window score (judged
                    // on the pre-event values), or a Grown rectangle missing
                    // it entirely. Borderline margins invalidate.
                    let covered = e.rect.covers(p, q);
                    let pre_gap = cand.scores.f_c - cand.scores.f_p;
                    cand.valid = cand.valid
                        && match e.kind {
                            EventKind::New | EventKind::Expired => covered && pre_gap > SCORE_EPS,
                            EventKind::Grown => !covered,
                        };
                    if covered {
                        match e.kind {
                            EventKind::New => cand.scores.f_c += dw,
                            EventKind::Grown => {
                                cand.scores.f_c -= dw;
                                cand.scores.f_p += dw;
                            }
                            EventKind::Expired => cand.scores.f_p -= dw,
                        }
                    }
                }
                Some(p) => {
                    cand.valid = false;
                    if e.rect.covers(p, q) {
                        match e.kind {
                            EventKind::New => cand.scores.f_c += dw,
                            EventKind::Grown => {
                                cand.scores.f_c -= dw;
                                cand.scores.f_p += dw;
                            }
                            EventKind::Expired => cand.scores.f_p -= dw,
                        }
                    }
                }
                // A point-less candidate records "no searchable point scores
                // above zero here"; New and Expired events can raise scores,
                // so they force a re-search.
                None => {
                    if matches!(e.kind, EventKind::New | EventKind::Expired) {
                        cand.valid = false;
                    }
                }
            }
        }

        match e.kind {
            EventKind::New => {
                cell.rects.push(e.rect);
                cell.current_count += 1;
                cell.u_static += dw;
                cell.u_dynamic += dw;
            }
            EventKind::Grown => {
                cell.current_count -= 1;
                // Pin to zero when the current window empties so repeated
                // increments cannot leave residue in the bound.
                cell.u_static = if cell.current_count == 0 {
                    0.0
                } else {
                    cell.u_static - dw
                };
            }
            EventKind::Expired => {
                if let Some(pos) = cell.rects.iter().position(|g| g.id == e.rect.id) {
                    cell.rects.swap_remove(pos);
                }
                cell.u_dynamic += q.alpha * dw;
            }
        }

        if cell.rects.is_empty() {
            self.cells.remove(&key);
        } else {
            cell.version += 1;
            let entry = HeapEntry {
                key: cell.bound(self.config.bound_mode),
                id: key,
                version: cell.version,
            };
            self.heap.push(entry);
        }
    }

    fn sweep_cell(&mut self, key: CellKey) {
        self.sweeps += 1;
        let bounds = cell_bounds(key, &self.query);
        let cell = self.cells.get_mut(&key).expect("sweeping a dropped cell");
        let cand = match sweepline::max_point(&cell.rects, &self.query, bounds, self.now) {
            Some(r) => Candidate { point: Some(r.point), scores: r.scores, valid: true },
            None => Candidate { point: None, scores: ScorePair::default(), valid: true },
        };
        cell.u_dynamic = cand.score(self.query.alpha);
        cell.candidate = Some(cand);
        cell.version += 1;
        let entry = HeapEntry {
            key: cell.bound(self.config.bound_mode),
            id: key,
            version: cell.version,
        };
        self.heap.push(entry);
    }

    /// Walks cells in descending bound order, sweeping stale candidates,
    /// until no remaining bound can beat the best valid candidate seen.
    fn current_best(&mut self) -> BurstResult {
        let mut parked: Vec<HeapEntry> = Vec::new();
        let mut best: Option<(f64, CellKey)> = None;
        while let Some(top) = self.heap.peek().copied() {
            let live = self
                .cells
                .get(&top.id)
                .is_some_and(|c| c.version == top.version);
            if !live {
                self.heap.pop();
                continue;
            }
            if let Some((bs, _)) = best {
                if top.key <= bs {
                    break;
                }
            }
            self.heap.pop();
            let valid = self.cells[&top.id]
                .candidate
                .as_ref()
                .is_some_and(|c| c.valid);
            if valid {
                let score = self.cells[&top.id]
                    .candidate
                    .as_ref()
                    .unwrap()
                    .score(self.query.alpha);
                if best.is_none_or(|(bs, _)| score > bs) {
                    best = Some((score, top.id));
                }
                parked.push(top);
            } else {
                self.sweep_cell(top.id);
            }
        }
        for e in parked {
            self.heap.push(e);
        }

        match best {
            None => BurstResult::unplaced(self.now, 1),
            Some((_, key)) => {
                let cand = self.cells[&key].candidate.as_ref().unwrap();
                match cand.point {
                    Some(p) => BurstResult::placed(p, &self.query, cand.scores, self.now, 1),
                    None => BurstResult::unplaced(self.now, 1),
                }
            }
        }
    }

    fn maybe_compact(&mut self) {
        if self.heap.len() > 8 * self.cells.len() + 128 {
            self.heap.clear();
            let mode = self.config.bound_mode;
            for (&id, cell) in &self.cells {
                self.heap.push(HeapEntry { key: cell.bound(mode), id, version: cell.version });
            }
        }
    }

    // --- verification hooks -------------------------------------------------

    /// Keys of all non-empty cells.
    pub fn cell_keys(&self) -> Vec<CellKey> {
        self.cells.keys().copied().collect()
    }

    /// `(U_s, U_d, rectangle count)` of one cell.
    pub fn cell_bound_state(&self, key: CellKey) -> Option<(f64, f64, usize)> {
        self.cells
            .get(&key)
            .map(|c| (c.u_static, c.u_dynamic, c.rects.len()))
    }

    /// Fresh sweep of one cell without touching detector state; the true
    /// maximum burst score inside the cell right now.
    pub fn forced_cell_max(&self, key: CellKey) -> Option<f64> {
        let cell = self.cells.get(&key)?;
        let bounds = cell_bounds(key, &self.query);
        Some(
            sweepline::max_point(&cell.rects, &self.query, bounds, self.now)
                .map_or(0.0, |r| r.score),
        )
    }

    /// Static bound recomputed from scratch over the cell's rectangle list.
    pub fn recount_static(&self, key: CellKey) -> Option<f64> {
        let cell = self.cells.get(&key)?;
        let q = &self.query;
        let sum: f64 = cell
            .rects
            .iter()
            .filter(|g| {
                crate::model::window_tag(g.t_c, self.now, q.window_len)
                    == Some(crate::model::WindowTag::Current)
            })
            .map(|g| g.w / q.window_len)
            .sum();
        Some(sum)
    }
}
