//! Deterministic discrete-event core.
//!
//! The queue orders events lexicographically on `(fire_at, seq)` where `seq`
//! is a monotonically increasing insertion counter, so simultaneous events
//! fire in insertion order and a replay with identical inputs produces an
//! identical event sequence.

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashSet};
use std::fmt;
use std::io::Write;

use thiserror::Error;

/// Simulated time in seconds. Never decreases while events are processed.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SimTime(f64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0.0);

    /// Wraps a finite, non-negative number of seconds.
    pub fn new(seconds: f64) -> SimTime {
        assert!(
            seconds.is_finite() && seconds >= 0.0,
            "simulated time must be finite and non-negative, got {seconds}"
        );
        SimTime(seconds)
    }

    pub fn seconds(self) -> f64 {
        self.0
    }

    /// This time shifted forward by `seconds` (which must leave it finite).
    pub fn offset(self, seconds: f64) -> SimTime {
        SimTime::new(self.0 + seconds)
    }
}

impl Eq for SimTime {}

impl Ord for SimTime {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

impl PartialOrd for SimTime {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Labels an event payload for the line-oriented event log.
pub trait EventPayload {
    fn kind(&self) -> &'static str;
    fn summary(&self) -> String;
}

/// A scheduled event as handed to the processing callback.
#[derive(Debug, Clone)]
pub struct Event<P> {
    pub fire_at: SimTime,
    pub seq: u64,
    pub payload: P,
}

/// Token returned by [`EventQueue::schedule`]; allows cancellation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EventHandle(u64);

#[derive(Debug, Error, PartialEq)]
pub enum ScheduleError {
    #[error("cannot schedule event at t={fire_at} in the past (now t={now})")]
    PastTime { fire_at: f64, now: f64 },
}

struct HeapEntry<P> {
    fire_at: SimTime,
    seq: u64,
    payload: P,
}

impl<P> PartialEq for HeapEntry<P> {
    fn eq(&self, other: &Self) -> bool {
        self.fire_at == other.fire_at && self.seq == other.seq
    }
}

impl<P> Eq for HeapEntry<P> {}

impl<P> PartialOrd for HeapEntry<P> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<P> Ord for HeapEntry<P> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.fire_at
            .cmp(&other.fire_at)
            .then(self.seq.cmp(&other.seq))
    }
}

/// Time-ordered event queue with reproducible tie-breaking.
pub struct EventQueue<P> {
    heap: BinaryHeap<Reverse<HeapEntry<P>>>,
    now: SimTime,
    next_seq: u64,
    /// Sequence numbers scheduled but neither fired nor cancelled.
    live: HashSet<u64>,
    log: Option<Box<dyn Write + Send>>,
}

impl<P> Default for EventQueue<P> {
    fn default() -> Self {
        Self::new()
    }
}

impl<P> EventQueue<P> {
    pub fn new() -> Self {
        EventQueue {
            heap: BinaryHeap::new(),
            now: SimTime::ZERO,
            next_seq: 0,
            live: HashSet::new(),
            log: None,
        }
    }

    /// Current simulated time.
    pub fn now(&self) -> SimTime {
        self.now
    }

    /// Number of pending (non-cancelled) events.
    pub fn pending(&self) -> usize {
        self.live.len()
    }

    /// Emit one `time<TAB>seq<TAB>kind<TAB>summary` line per processed event.
    pub fn set_log(&mut self, sink: Box<dyn Write + Send>) {
        self.log = Some(sink);
    }

    /// Enqueues an event; `fire_at` must not lie in the past.
    pub fn schedule(&mut self, fire_at: SimTime, payload: P) -> Result<EventHandle, ScheduleError> {
        if fire_at < self.now {
            return Err(ScheduleError::PastTime {
                fire_at: fire_at.seconds(),
                now: self.now.seconds(),
            });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.live.insert(seq);
        self.heap.push(Reverse(HeapEntry {
            fire_at,
            seq,
            payload,
        }));
        Ok(EventHandle(seq))
    }

    /// Cancels a pending event. Returns false if it already fired or was
    /// cancelled before.
    pub fn cancel(&mut self, handle: EventHandle) -> bool {
        self.live.remove(&handle.0)
    }

    fn pop_within(&mut self, horizon: SimTime) -> Option<Event<P>> {
        while let Some(Reverse(entry)) = self.heap.peek() {
            if entry.fire_at > horizon {
                return None;
            }
            let Reverse(entry) = self.heap.pop().expect("peeked entry present");
            if !self.live.remove(&entry.seq) {
                continue; // cancelled while queued
            }
            return Some(Event {
                fire_at: entry.fire_at,
                seq: entry.seq,
                payload: entry.payload,
            });
        }
        None
    }
}

impl<P: EventPayload> EventQueue<P> {
    /// Processes every event with `fire_at <= horizon` in `(fire_at, seq)`
    /// order, invoking `handle` for each; the callback may schedule further
    /// events. Returns the number processed. Afterwards `now()` reports the
    /// horizon, whether or not the queue drained.
    pub fn run_until<F>(&mut self, horizon: SimTime, mut handle: F) -> usize
    where
        F: FnMut(&mut EventQueue<P>, Event<P>),
    {
        assert!(
            horizon >= self.now,
            "run_until horizon {horizon} precedes current time {}",
            self.now
        );
        let mut processed = 0;
        while let Some(event) = self.pop_within(horizon) {
            self.now = event.fire_at;
            self.log_event(&event);
            handle(&mut *self, event);
            processed += 1;
        }
        self.now = horizon;
        processed
    }

    /// Drains the queue completely. `now()` ends at the last event's time.
    pub fn run_to_completion<F>(&mut self, mut handle: F) -> usize
    where
        F: FnMut(&mut EventQueue<P>, Event<P>),
    {
        let mut processed = 0;
        while let Some(event) = self.pop_within(SimTime(f64::INFINITY)) {
            self.now = event.fire_at;
            self.log_event(&event);
            handle(&mut *self, event);
            processed += 1;
        }
        processed
    }

    fn log_event(&mut self, event: &Event<P>) {
        if let Some(sink) = self.log.as_mut() {
            let _ = writeln!(
                sink,
                "{}\t{}\t{}\t{}",
                event.fire_at,
                event.seq,
                event.payload.kind(),
                event.payload.summary()
            );
        }
    }
}
