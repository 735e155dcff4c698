//! Top-k bursty region detection.
//!
//! The top-k regions are defined greedily: region `i` maximizes the burst
//! score computed over objects not covered by regions `1..i-1`. The exact
//! detector solves the k residual problems over one shared cell grid by
//! giving every rectangle a *level*: the rank of the first reported region
//! covering it, or `k` when none does. The rank-`i` search only sees
//! rectangles with level >= `i`, which is exactly the residual object set.
//!
//! Per cell the detector keeps `k` dynamic bounds and `k` candidate points
//! (the static bound is shared; it is level-independent here because it sums
//! all current-window mass touching the cell, a sound bound for every
//! residual problem). Two computations are shared across ranks: when no
//! rectangle of a swept cell covers any reported point, all `k` levels of
//! that cell are identical and the sweep result is copied to every level.
//!
//! The approximate top-k variants reuse the grid detectors: the single grid
//! reports its k best cells (cells of one grid are disjoint), the multi-grid
//! variant pools the 4k best cells of each grid and keeps the best k pairwise
//! non-overlapping ones.

use std::collections::{BinaryHeap, HashMap};

use crate::approx::{GridDetector, MultiGridDetector};
use crate::cellindex::{affected_cells, cell_bounds, grid_anchor, Candidate, CellKey, HeapEntry};
use crate::model::{
    BurstResult, ModelError, ObjectId, Point, Query, RectObject, ScorePair, TopKResult,
    WindowTag, SCORE_EPS,
};
use crate::sweepline;
use crate::window::{Event, EventKind};


/// How a rectangle's contribution to a band of residual problems changes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Delta {
    AddCurrent,
    RemoveCurrent,
    AddPast,
    RemovePast,
    CurrentToPast,
}

impl Delta {
    fn add_for(tag: WindowTag) -> Self {
        match tag {
            WindowTag::Current => Delta::AddCurrent,
            WindowTag::Past => Delta::AddPast,
        }
    }

    fn remove_for(tag: WindowTag) -> Self {
        match tag {
            WindowTag::Current => Delta::RemoveCurrent,
            WindowTag::Past => Delta::RemovePast,
        }
    }
}

/// A level-visibility change queued for the next rank iteration:
/// apply `delta` for `rect` to level indices `lo..=hi`.
#[derive(Debug, Clone, Copy)]
struct PendingFlip {
    rect: RectObject,
    lo: usize,
    hi: usize,
    delta: Delta,
}

#[derive(Debug)]
struct LiveRect {
    rect: RectObject,
    /// 1-based rank of the first reported point this rectangle covers, or
    /// `k` when it covers none.
    lvl: usize,
}

#[derive(Debug, Clone, Copy)]
struct KLevel {
    u_dynamic: f64,
    candidate: Option<Candidate>,
    version: u64,
}

#[derive(Debug)]
struct KCell {
    rect_ids: Vec<ObjectId>,
    current_count: usize,
    u_static: f64,
    levels: Vec<KLevel>,
}

impl KCell {
    fn new(k: usize) -> Self {
        KCell {
            rect_ids: Vec::new(),
            current_count: 0,
            u_static: 0.0,
            levels: vec![
                KLevel { u_dynamic: f64::INFINITY, candidate: None, version: 0 };
                k
            ],
        }
    }

    fn key_for(&self, idx: usize) -> f64 {
        self.u_static.min(self.levels[idx].u_dynamic)
    }
}

/// Exact continuous top-k detector over leveled rectangles.
#[derive(Debug)]
pub struct LeveledCellDetector {
    query: Query,
    k: usize,
    sharing: bool,
    arena: HashMap<ObjectId, LiveRect>,
    cells: HashMap<CellKey, KCell>,
    heaps: Vec<BinaryHeap<HeapEntry>>,
    points: Vec<Option<Point>>,
    now: f64,
    events: u64,
    sweeps: u64,
}

impl LeveledCellDetector {
    pub fn new(query: Query) -> Result<Self, ModelError> {
        Self::with_sharing(query, true)
    }

    /// `sharing = false` disables the copy-to-all-levels optimization; used
    /// by metamorphic tests.
    pub fn with_sharing(query: Query, sharing: bool) -> Result<Self, ModelError> {
        query.validate()?;
        let k = query.k;
        Ok(LeveledCellDetector {
            query,
            k,
            sharing,
            arena: HashMap::new(),
            cells: HashMap::new(),
            heaps: (0..k).map(|_| BinaryHeap::new()).collect(),
            points: vec![None; k],
            now: f64::NEG_INFINITY,
            events: 0,
            sweeps: 0,
        })
    }

    pub fn query(&self) -> &Query {
        &self.query
    }

    pub fn sweep_count(&self) -> u64 {
        self.sweeps
    }

    /// Processes one lifecycle event and returns the current top-k regions.
    pub fn on_event(&mut self, e: &Event) -> TopKResult {
        self.now = self.now.max(e.due);
        self.events += 1;
        let k = self.k;

        // Window transition, visible to the residual problems according to
        // the rectangle's level. The rectangle itself is re-leveled to k so
        // the rank loop below re-derives its assignment from scratch.
        match e.kind {
            EventKind::New => {
                self.arena.insert(e.rect.id, LiveRect { rect: e.rect, lvl: k });
                self.update_cells(e, k);
            }
            EventKind::Grown => {
                let old = match self.arena.get_mut(&e.rect.id) {
                    Some(lr) => std::mem::replace(&mut lr.lvl, k),
                    None => return self.pad_only(),
                };
                self.update_cells(e, old);
            }
            EventKind::Expired => {
                let old = match self.arena.remove(&e.rect.id) {
                    Some(lr) => lr.lvl,
                    None => return self.pad_only(),
                };
                self.update_cells(e, old);
            }
        }

        // Solve the k residual problems in rank order, propagating level
        // flips from each fixed rank into the next iteration.
        let mut pending: Vec<PendingFlip> = Vec::new();
        let mut entries = Vec::with_capacity(k);
        for idx in 0..k {
            let rank = idx + 1;
            for flip in std::mem::take(&mut pending) {
                for key in affected_cells(&flip.rect, &self.query) {
                    self.apply_flip(key, &flip);
                }
            }

            let p_old = self.points[idx];
            let best = self.search_level(idx);
            let (point, result) = match best {
                Some((key, _)) => {
                    let cand = self.cells[&key].levels[idx].candidate.unwrap();
                    match cand.point {
                        Some(p) => (
                            Some(p),
                            BurstResult::placed(p, &self.query, cand.scores, self.now, rank),
                        ),
                        None => (None, BurstResult::unplaced(self.now, rank)),
                    }
                }
                None => (None, BurstResult::unplaced(self.now, rank)),
            };
            self.points[idx] = point;
            entries.push(result);

            // Rectangles that covered the old point but not the new one
            // become visible to every residual problem again; rectangles
            // covering the new point disappear from the deeper ones.
            let old_cover = match p_old {
                Some(p) => self.rects_covering(p, |lvl| lvl == rank),
                None => Vec::new(),
            };
            let new_cover = match point {
                Some(p) => self.rects_covering(p, |lvl| lvl >= rank),
                None => Vec::new(),
            };
            for id in &old_cover {
                if new_cover.contains(id) {
                    continue;
                }
                let lr = self.arena.get_mut(id).unwrap();
                lr.lvl = k;
                if rank < k {
                    if let Some(tag) =
                        crate::model::window_tag(lr.rect.t_c, self.now, self.query.window_len)
                    {
                        pending.push(PendingFlip {
                            rect: lr.rect,
                            lo: rank,
                            hi: k - 1,
                            delta: Delta::add_for(tag),
                        });
                    }
                }
            }
            for id in &new_cover {
                let lr = self.arena.get_mut(id).unwrap();
                let was = std::mem::replace(&mut lr.lvl, rank);
                if was > rank {
                    if let Some(tag) =
                        crate::model::window_tag(lr.rect.t_c, self.now, self.query.window_len)
                    {
                        pending.push(PendingFlip {
                            rect: lr.rect,
                            lo: rank,
                            hi: was - 1,
                            delta: Delta::remove_for(tag),
                        });
                    }
                }
            }
        }

        self.maybe_compact();
        TopKResult { t: self.now, entries }
    }

    fn pad_only(&self) -> TopKResult {
        TopKResult {
            t: self.now,
            entries: (1..=self.k).map(|r| BurstResult::unplaced(self.now, r)).collect(),
        }
    }

    /// Applies a window event to every cell the rectangle touches. `old_lvl`
    /// is the rectangle's level before this event.
    fn update_cells(&mut self, e: &Event, old_lvl: usize) {
        let k = self.k;
        let dw = e.rect.w / self.query.window_len;
        for key in affected_cells(&e.rect, &self.query) {
            match e.kind {
                EventKind::New => {
                    let cell = self.cells.entry(key).or_insert_with(|| KCell::new(k));
                    Self::apply_delta_to_cell(cell, &e.rect, 0, k - 1, Delta::AddCurrent, &self.query);
                    cell.rect_ids.push(e.rect.id);
                    cell.current_count += 1;
                    cell.u_static += dw;
                }
                EventKind::Grown => {
                    let Some(cell) = self.cells.get_mut(&key) else { continue };
                    Self::apply_delta_to_cell(
                        cell,
                        &e.rect,
                        0,
                        old_lvl - 1,
                        Delta::CurrentToPast,
                        &self.query,
                    );
                    if old_lvl < k {
                        Self::apply_delta_to_cell(
                            cell,
                            &e.rect,
                            old_lvl,
                            k - 1,
                            Delta::AddPast,
                            &self.query,
                        );
                    }
                    cell.current_count -= 1;
                    cell.u_static =
                        if cell.current_count == 0 { 0.0 } else { cell.u_static - dw };
                }
                EventKind::Expired => {
                    let Some(cell) = self.cells.get_mut(&key) else { continue };
                    Self::apply_delta_to_cell(
                        cell,
                        &e.rect,
                        0,
                        old_lvl - 1,
                        Delta::RemovePast,
                        &self.query,
                    );
                    if let Some(pos) = cell.rect_ids.iter().position(|id| *id == e.rect.id) {
                        cell.rect_ids.swap_remove(pos);
                    }
                    if cell.rect_ids.is_empty() {
                        self.cells.remove(&key);
                        continue;
                    }
                }
            }
            // The static bound feeds every level's heap key.
            self.refresh_entries(key, 0, k - 1);
        }
    }

    fn apply_flip(&mut self, key: CellKey, flip: &PendingFlip) {
        let Some(cell) = self.cells.get_mut(&key) else { return };
        Self::apply_delta_to_cell(cell, &flip.rect, flip.lo, flip.hi, flip.delta, &self.query);
        self.refresh_entries(key, flip.lo, flip.hi);
    }

    /// Candidate statuses and dynamic bounds for level indices `lo..=hi`.
    /// Validity follows the same rule as the single-region detector: a
    /// score-raising change (current mass added, past mass removed) keeps the
    /// candidate only when it covers the point and the stored pre-change gap
    /// is positive; score-lowering changes keep it only when they miss the
    /// point.
    fn apply_delta_to_cell(
        cell: &mut KCell,
        rect: &RectObject,
        lo: usize,
        hi: usize,
        delta: Delta,
        q: &Query,
    ) {
        let dw = rect.w / q.window_len;
        for level in &mut cell.levels[lo..=hi] {
            if let Some(cand) = level.candidate.as_mut() {
                match cand.point {
                    Some(p) => {
                        let covered = rect.covers(p, q);
                        let pre_gap = cand.scores.f_c - cand.scores.f_p;
                        cand.valid = cand.valid
                            && match delta {
                                Delta::AddCurrent | Delta::RemovePast => {
                                    covered && pre_gap > SCORE_EPS
                                }
                                Delta::RemoveCurrent | Delta::AddPast | Delta::CurrentToPast => {
                                    !covered
                                }
                            };
                        if covered {
                            match delta {
                                Delta::AddCurrent => cand.scores.f_c += dw,
                                Delta::RemoveCurrent => cand.scores.f_c -= dw,
                                Delta::AddPast => cand.scores.f_p += dw,
                                Delta::RemovePast => cand.scores.f_p -= dw,
                                Delta::CurrentToPast => {
                                    cand.scores.f_c -= dw;
                                    cand.scores.f_p += dw;
                                }
                            }
                        }
                    }
                    // A point-less candidate records "nothing visible scored
                    // above zero"; that stays true only under score-lowering
                    // deltas.
                    None => {
                        if matches!(delta, Delta::AddCurrent | Delta::RemovePast) {
                            cand.valid = false;
                        }
                    }
                }
            }
            level.u_dynamic += match delta {
                Delta::AddCurrent => dw,
                Delta::RemovePast => q.alpha * dw,
                _ => 0.0,
            };
        }
    }

    fn refresh_entries(&mut self, key: CellKey, lo: usize, hi: usize) {
        let Some(cell) = self.cells.get_mut(&key) else { return };
        for idx in lo..=hi {
            cell.levels[idx].version += 1;
            self.heaps[idx].push(HeapEntry {
                key: cell.key_for(idx),
                id: key,
                version: cell.levels[idx].version,
            });
        }
    }

    /// Walks level `idx`'s heap in descending bound order, sweeping invalid
    /// candidates, until no bound can beat the best valid candidate.
    fn search_level(&mut self, idx: usize) -> Option<(CellKey, f64)> {
        let mut parked: Vec<HeapEntry> = Vec::new();
        let mut best: Option<(f64, CellKey)> = None;
        while let Some(top) = self.heaps[idx].peek().copied() {
            let live = self
                .cells
                .get(&top.id)
                .is_some_and(|c| c.levels[idx].version == top.version);
            if !live {
                self.heaps[idx].pop();
                continue;
            }
            if let Some((bs, _)) = best {
                if top.key <= bs {
                    break;
                }
            }
            self.heaps[idx].pop();
            let valid = self.cells[&top.id].levels[idx]
                .candidate
                .is_some_and(|c| c.valid);
            if valid {
                let score = self.cells[&top.id].levels[idx]
                    .candidate
                    .unwrap()
                    .score(self.query.alpha);
                if best.is_none_or(|(bs, _)| score > bs) {
                    best = Some((score, top.id));
                }
                parked.push(top);
            } else {
                self.sweep_level(top.id, idx);
            }
        }
        for e in parked {
            self.heaps[idx].push(e);
        }
        best.map(|(score, key)| (key, score))
    }

    fn sweep_level(&mut self, key: CellKey, idx: usize) {
        self.sweeps += 1;
        let rank = idx + 1;
        let bounds = cell_bounds(key, &self.query);
        let visible: Vec<RectObject> = {
            let cell = &self.cells[&key];
            cell.rect_ids
                .iter()
                .filter_map(|id| {
                    let lr = &self.arena[id];
                    (lr.lvl >= rank).then_some(lr.rect)
                })
                .collect()
        };
        let cand = match sweepline::max_point(&visible, &self.query, bounds, self.now) {
            Some(r) => Candidate { point: Some(r.point), scores: r.scores, valid: true },
            None => Candidate { point: None, scores: ScorePair::default(), valid: true },
        };
        let score = cand.score(self.query.alpha);

        // When no rectangle in the cell covers any reported point, every
        // residual problem sees the same rectangle set here, so the result
        // holds for all k levels.
        let share = self.sharing && {
            let cell = &self.cells[&key];
            !cell.rect_ids.iter().any(|id| {
                let rect = self.arena[id].rect;
                self.points
                    .iter()
                    .flatten()
                    .any(|p| rect.covers(*p, &self.query))
            })
        };

        let cell = self.cells.get_mut(&key).unwrap();
        let range = if share { 0..self.k } else { idx..idx + 1 };
        for l in range {
            cell.levels[l].u_dynamic = score;
            cell.levels[l].candidate = Some(cand);
            cell.levels[l].version += 1;
            self.heaps[l].push(HeapEntry {
                key: cell.key_for(l),
                id: key,
                version: cell.levels[l].version,
            });
        }
    }

    /// Live rectangles covering `p` whose level passes `pred`, collected from
    /// the up-to-four cells containing the point.
    fn rects_covering(&self, p: Point, pred: impl Fn(usize) -> bool) -> Vec<ObjectId> {
        let q = &self.query;
        let (ax, ay) = grid_anchor(q);
        let u = (p.x - ax) / q.width;
        let v = (p.y - ay) / q.height;
        let mut out = Vec::new();
        for i in (u.ceil() as i64 - 1)..=(u.floor() as i64) {
            for j in (v.ceil() as i64 - 1)..=(v.floor() as i64) {
                let Some(cell) = self.cells.get(&CellKey { i, j }) else { continue };
                for id in &cell.rect_ids {
                    if out.contains(id) {
                        continue;
                    }
                    let lr = &self.arena[id];
                    if pred(lr.lvl) && lr.rect.covers(p, q) {
                        out.push(*id);
                    }
                }
            }
        }
        out
    }

    fn maybe_compact(&mut self) {
        for idx in 0..self.k {
            if self.heaps[idx].len() > 8 * self.cells.len() + 128 {
                let mut fresh = BinaryHeap::with_capacity(self.cells.len());
                for (&id, cell) in &self.cells {
                    fresh.push(HeapEntry {
                        key: cell.key_for(idx),
                        id,
                        version: cell.levels[idx].version,
                    });
                }
                self.heaps[idx] = fresh;
            }
        }
    }

    /// Bound and candidate state of one cell at one level index, for tests:
    /// `(u_static, u_dynamic, candidate score, candidate valid, fresh sweep maximum)`.
    #[doc(hidden)]
    pub fn debug_level_state(
        &self,
        key: CellKey,
        idx: usize,
    ) -> Option<(f64, f64, Option<f64>, bool, f64)> {
        let cell = self.cells.get(&key)?;
        let level = &cell.levels[idx];
        let rank = idx + 1;
        let visible: Vec<RectObject> = cell
            .rect_ids
            .iter()
            .filter_map(|id| {
                let lr = &self.arena[id];
                (lr.lvl >= rank).then_some(lr.rect)
            })
            .collect();
        let fresh = sweepline::max_point(&visible, &self.query, cell_bounds(key, &self.query), self.now)
            .map_or(0.0, |r| r.score);
        Some((
            cell.u_static,
            level.u_dynamic,
            level.candidate.map(|c| c.score(self.query.alpha)),
            level.candidate.is_some_and(|c| c.valid),
            fresh,
        ))
    }

    /// Verifies the level partition: every live rectangle's level equals the
    /// rank of the first reported point it covers, or `k` when it covers
    /// none.
    pub fn check_level_partition(&self) -> Result<(), String> {
        for (id, lr) in &self.arena {
            let mut expected = self.k;
            for (idx, p) in self.points.iter().enumerate() {
                if let Some(p) = p {
                    if lr.rect.covers(*p, &self.query) {
                        expected = idx + 1;
                        break;
                    }
                }
            }
            if lr.lvl != expected {
                return Err(format!(
                    "rect {id} has level {} but first covered point is rank {expected}",
                    lr.lvl
                ));
            }
        }
        Ok(())
    }
}

/// Grid bookkeeping plus the k highest-scoring cells.
pub fn kgaps_update(
    detector: &mut GridDetector,
    e: &Event,
    k: usize,
) -> Result<TopKResult, ModelError> {
    if k == 0 {
        return Err(ModelError::ZeroK);
    }
    detector.on_event(e);
    detector.top_k(k)
}

/// Multi-grid bookkeeping plus the top-k non-overlapping cells across the
/// four grids.
pub fn kmgaps_update(
    detector: &mut MultiGridDetector,
    e: &Event,
    k: usize,
) -> Result<TopKResult, ModelError> {
    if k == 0 {
        return Err(ModelError::ZeroK);
    }
    detector.on_event(e);
    detector.top_k(k)
}
