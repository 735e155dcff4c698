//! Per-snapshot exact search: given a set of rectangles clipped to a search
//! box, find a point with maximum burst score.
//!
//! A horizontal sweep-line scans the box top-down, stopping at every
//! horizontal rectangle edge. Along the line, the vertical edges split the
//! box width into intervals whose window scores change only at sweep stops.
//! Because coverage is closed on rectangle boundaries, the maximum can sit
//! exactly on a shared edge line, so the sweep also scores the zero-width
//! column at each vertical edge and the zero-height strip at each stop (after
//! insertions, before removals) in addition to the open intervals between
//! them.

use crate::model::{
    burst_score, window_tag, Point, Query, Rect, RectObject, ScorePair, WindowTag,
};

/// A maximum-score point with its window scores.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepResult {
    pub point: Point,
    pub scores: ScorePair,
    pub score: f64,
}

struct ClippedRect {
    x_lo: f64,
    x_hi: f64,
    y_lo: f64,
    y_hi: f64,
    w: f64,
    tag: WindowTag,
}

/// Sweep-line state: raw weight sums per slot of the subdivided line.
///
/// Slot `2i` is the zero-width column at breakpoint `i`; slot `2i + 1` is the
/// open interval between breakpoints `i` and `i + 1`. A rectangle spanning
/// `[x_lo, x_hi]` covers the inclusive slot range `[2 lo, 2 hi]`, which keeps
/// closed coverage exact: it covers both boundary columns but only the open
/// intervals strictly inside.
struct SweepLine {
    xs: Vec<f64>,
    wc: Vec<f64>,
    wp: Vec<f64>,
}

impl SweepLine {
    fn new(xs: Vec<f64>) -> Self {
        let slots = 2 * xs.len() - 1;
        SweepLine { xs, wc: vec![0.0; slots], wp: vec![0.0; slots] }
    }

    fn slot_range(&self, x_lo: f64, x_hi: f64) -> (usize, usize) {
        let lo = self.xs.partition_point(|&v| v < x_lo);
        let hi = self.xs.partition_point(|&v| v < x_hi);
        debug_assert_eq!(self.xs[lo], x_lo);
        debug_assert_eq!(self.xs[hi], x_hi);
        (2 * lo, 2 * hi)
    }

    fn add(&mut self, g: &ClippedRect, sign: f64) {
        let (lo, hi) = self.slot_range(g.x_lo, g.x_hi);
        let dst = match g.tag {
            WindowTag::Current => &mut self.wc,
            WindowTag::Past => &mut self.wp,
        };
        for slot in dst[lo..=hi].iter_mut() {
            *slot += sign * g.w;
        }
    }

    fn slot_x(&self, slot: usize) -> f64 {
        if slot.is_multiple_of(2) {
            self.xs[slot / 2]
        } else {
            (self.xs[slot / 2] + self.xs[slot / 2 + 1]) / 2.0
        }
    }

    /// Number of open intervals (at most `2n + 1` for `n` rectangles).
    fn interval_count(&self) -> usize {
        self.xs.len() - 1
    }

    /// Total width of the open intervals; always the box width.
    fn interval_width_sum(&self) -> f64 {
        self.xs.last().unwrap() - self.xs.first().unwrap()
    }
}

/// Finds a point of maximal burst score inside `search` (further clamped so
/// the induced region stays in the preferred area). Returns `None` only when
/// no live rectangle intersects the clamped box, or the box itself is empty.
///
/// Rectangles are classified current/past from their creation time and `now`;
/// rectangles outside both windows are ignored. Ties go to the first maximal
/// slot in sweep order (top-down, then left-to-right), so output is
/// deterministic.
pub fn max_point(rects: &[RectObject], q: &Query, search: Rect, now: f64) -> Option<SweepResult> {
    let search = match q.point_domain() {
        Some(d) => search.intersection(&d)?,
        None => search,
    };

    let clipped: Vec<ClippedRect> = rects
        .iter()
        .filter_map(|g| {
            let tag = window_tag(g.t_c, now, q.window_len)?;
            let i = g.extent(q).intersection(&search)?;
            Some(ClippedRect {
                x_lo: i.x_min,
                x_hi: i.x_max,
                y_lo: i.y_min,
                y_hi: i.y_max,
                w: g.w,
                tag,
            })
        })
        .collect();
    if clipped.is_empty() {
        return None;
    }

    let mut xs: Vec<f64> = clipped.iter().flat_map(|g| [g.x_lo, g.x_hi]).collect();
    xs.push(search.x_min);
    xs.push(search.x_max);
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let mut line = SweepLine::new(xs);

    // Stops: distinct horizontal edge heights, scanned top-down.
    let mut stops: Vec<f64> = clipped.iter().flat_map(|g| [g.y_lo, g.y_hi]).collect();
    stops.sort_by(f64::total_cmp);
    stops.dedup();
    stops.reverse();

    let mut by_top: Vec<usize> = (0..clipped.len()).collect();
    by_top.sort_by(|&a, &b| clipped[b].y_hi.total_cmp(&clipped[a].y_hi));
    let mut by_bottom: Vec<usize> = (0..clipped.len()).collect();
    by_bottom.sort_by(|&a, &b| clipped[b].y_lo.total_cmp(&clipped[a].y_lo));

    let mut best: Option<(f64, Point, ScorePair)> = None;
    let scan = |line: &SweepLine,
                y: f64,
                ranges: &[(usize, usize)],
                best: &mut Option<(f64, Point, ScorePair)>| {
        for &(lo, hi) in ranges {
            for slot in lo..=hi {
                let pair =
                    ScorePair::new(line.wc[slot] / q.window_len, line.wp[slot] / q.window_len);
                let score = burst_score(pair, q.alpha);
                if best.is_none_or(|(b, _, _)| score > b) {
                    *best = Some((score, Point::new(line.slot_x(slot), y), pair));
                }
            }
        }
    };
    // Merges overlapping slot ranges so each changed slot is scored once.
    let merge = |ranges: &mut Vec<(usize, usize)>| {
        ranges.sort_unstable();
        let mut out: Vec<(usize, usize)> = Vec::with_capacity(ranges.len());
        for &(lo, hi) in ranges.iter() {
            match out.last_mut() {
                Some(last) if lo <= last.1 + 1 => last.1 = last.1.max(hi),
                _ => out.push((lo, hi)),
            }
        }
        *ranges = out;
    };

    // Only slots whose scores changed since the previous phase need scoring:
    // an unchanged slot was already a candidate at the phase where its score
    // last changed (or held the initial zero, which never exceeds a maximum).
    let mut next_top = 0;
    let mut next_bottom = 0;
    let mut changed: Vec<(usize, usize)> = Vec::new();
    for (si, &stop) in stops.iter().enumerate() {
        // Insert every rectangle whose top edge sits on this stop, then score
        // the zero-height strip at the stop itself: rectangles ending here
        // are still active, so closed coverage on the line is exact.
        changed.clear();
        while next_top < by_top.len() && clipped[by_top[next_top]].y_hi == stop {
            let g = &clipped[by_top[next_top]];
            line.add(g, 1.0);
            changed.push(line.slot_range(g.x_lo, g.x_hi));
            next_top += 1;
        }
        if !changed.is_empty() {
            merge(&mut changed);
            scan(&line, stop, &changed, &mut best);
        }

        // Retire rectangles whose bottom edge sits here, then score the open
        // strip down to the next stop: only their slots changed, and past
        // mass leaving can raise a score.
        changed.clear();
        while next_bottom < by_bottom.len() && clipped[by_bottom[next_bottom]].y_lo == stop {
            let g = &clipped[by_bottom[next_bottom]];
            line.add(g, -1.0);
            changed.push(line.slot_range(g.x_lo, g.x_hi));
            next_bottom += 1;
        }
        if !changed.is_empty() {
            if let Some(&next) = stops.get(si + 1) {
                merge(&mut changed);
                scan(&line, (stop + next) / 2.0, &changed, &mut best);
            }
        }
    }

    debug_assert!(line.interval_count() <= 2 * clipped.len() + 1);
    debug_assert!((line.interval_width_sum() - search.width()).abs() <= 1e-9 * search.width().max(1.0));
    best.map(|(score, point, scores)| SweepResult { point, scores, score })
}

/// Window scores of a single point by direct coverage counting.
pub fn point_score(p: Point, rects: &[RectObject], q: &Query, now: f64) -> ScorePair {
    let mut wc = 0.0;
    let mut wp = 0.0;
    for g in rects {
        if g.covers(p, q) {
            match window_tag(g.t_c, now, q.window_len) {
                Some(WindowTag::Current) => wc += g.w,
                Some(WindowTag::Past) => wp += g.w,
                None => {}
            }
        }
    }
    ScorePair::new(wc / q.window_len, wp / q.window_len)
}
