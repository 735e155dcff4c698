//! Event scheduling: turns the object stream into the ordered event stream
//! that drives every detector.
//!
//! Each admitted object produces exactly three events for its rectangle: a
//! `New` event when it enters the current window, a `Grown` event when it
//! moves to the past window, and an `Expired` event when it leaves entirely.
//! Events due at the same instant are delivered `Expired < Grown < New`, so
//! mass is retired before mass is added and window membership matches the
//! half-open window convention exactly.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use thiserror::Error;

use crate::model::{to_rectangle, window_tag, Query, RectObject, SpatialObject, WindowTag};

#[derive(Debug, Error, PartialEq)]
pub enum StreamError {
    #[error("out-of-order object: t_c {t_c} precedes stream clock {now}")]
    OutOfOrder { t_c: f64, now: f64 },
    #[error("non-finite timestamp {0}")]
    BadTimestamp(f64),
    #[error("negative weight {0}")]
    NegativeWeight(f64),
}

/// What happened to a rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum EventKind {
    /// Leaves the past window. Processed first at equal due times.
    Expired = 0,
    /// Moves from the current window to the past window.
    Grown = 1,
    /// Enters the current window.
    New = 2,
}

/// One lifecycle event of a rectangle, due at `due`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub rect: RectObject,
    pub kind: EventKind,
    pub due: f64,
    /// Tie-break for events with equal `(due, kind)`.
    pub seq: u64,
}

impl Event {
    fn rank(&self) -> (f64, u8, u64) {
        (self.due, self.kind as u8, self.seq)
    }
}

#[derive(Debug)]
struct Pending(Event);

impl PartialEq for Pending {
    fn eq(&self, other: &Self) -> bool {
        self.0.rank() == other.0.rank()
    }
}
impl Eq for Pending {}

impl Ord for Pending {
    fn cmp(&self, other: &Self) -> Ordering {
        // BinaryHeap is a max-heap; invert so the earliest event pops first.
        let (ad, ak, aseq) = self.0.rank();
        let (bd, bk, bseq) = other.0.rank();
        bd.total_cmp(&ad)
            .then_with(|| bk.cmp(&ak))
            .then_with(|| bseq.cmp(&aseq))
    }
}
impl PartialOrd for Pending {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Time-ordered event queue plus the registry of live rectangles.
///
/// Logical time comes from object timestamps, never from the wall clock, so
/// replays are deterministic.
#[derive(Debug)]
pub struct EventScheduler {
    query: Query,
    pending: BinaryHeap<Pending>,
    now: f64,
    next_seq: u64,
    live: Vec<RectObject>,
    admitted: u64,
    delivered: u64,
}

impl EventScheduler {
    pub fn new(query: Query) -> Result<Self, crate::model::ModelError> {
        query.validate()?;
        Ok(EventScheduler {
            query,
            pending: BinaryHeap::new(),
            now: f64::NEG_INFINITY,
            next_seq: 0,
            live: Vec::new(),
            admitted: 0,
            delivered: 0,
        })
    }

    pub fn query(&self) -> &Query {
        &self.query
    }

    /// Current logical time: the due time of the last delivered event, or the
    /// last `advance` target if later.
    pub fn now(&self) -> f64 {
        self.now
    }

    pub fn admitted_count(&self) -> u64 {
        self.admitted
    }

    pub fn delivered_count(&self) -> u64 {
        self.delivered
    }

    /// Admits one stream object: schedules its three lifecycle events and
    /// returns the events already due at the current clock (only the `New`
    /// event, when the object's timestamp equals `now`).
    pub fn admit(&mut self, o: &SpatialObject) -> Result<Vec<Event>, StreamError> {
        if !o.t_c.is_finite() {
            return Err(StreamError::BadTimestamp(o.t_c));
        }
        if o.w < 0.0 || !o.w.is_finite() {
            return Err(StreamError::NegativeWeight(o.w));
        }
        if o.t_c < self.now {
            return Err(StreamError::OutOfOrder { t_c: o.t_c, now: self.now });
        }
        let Some(rect) = to_rectangle(o, &self.query) else {
            return Ok(Vec::new());
        };
        self.admitted += 1;
        let w = self.query.window_len;
        for (kind, due) in [
            (EventKind::New, rect.t_c),
            (EventKind::Grown, rect.t_c + w),
            (EventKind::Expired, rect.t_c + 2.0 * w),
        ] {
            self.pending.push(Pending(Event { rect, kind, due, seq: self.next_seq }));
            self.next_seq += 1;
        }
        Ok(self.pop_due(self.now))
    }

    /// Delivers all pending events due at or before `to`, in
    /// `(due, kind, seq)` order, and moves the clock to `to`.
    ///
    /// Callers must not move time backwards; a stale `to` delivers nothing.
    pub fn advance(&mut self, to: f64) -> Vec<Event> {
        if to < self.now {
            return Vec::new();
        }
        let out = self.pop_due(to);
        self.now = to;
        out
    }

    /// Delivers every remaining event.
    pub fn drain(&mut self) -> Vec<Event> {
        let out = self.pop_due(f64::INFINITY);
        if let Some(last) = out.last() {
            self.now = self.now.max(last.due);
        }
        out
    }

    fn pop_due(&mut self, to: f64) -> Vec<Event> {
        let mut out = Vec::new();
        while let Some(top) = self.pending.peek() {
            if top.0.due > to {
                break;
            }
            let ev = self.pending.pop().unwrap().0;
            self.apply(&ev);
            out.push(ev);
        }
        out
    }

    fn apply(&mut self, ev: &Event) {
        self.delivered += 1;
        if self.now < ev.due {
            self.now = ev.due;
        }
        match ev.kind {
            EventKind::New => self.live.push(ev.rect),
            EventKind::Grown => {}
            EventKind::Expired => {
                if let Some(pos) = self.live.iter().position(|g| g.id == ev.rect.id) {
                    self.live.swap_remove(pos);
                }
            }
        }
    }

    /// Live rectangles with their current window tags.
    pub fn live(&self) -> impl Iterator<Item = (RectObject, WindowTag)> + '_ {
        let now = self.now;
        let len = self.query.window_len;
        self.live
            .iter()
            .filter_map(move |g| window_tag(g.t_c, now, len).map(|tag| (*g, tag)))
    }

    pub fn live_len(&self) -> usize {
        self.live.len()
    }
}
