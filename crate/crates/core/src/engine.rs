//! Deterministic discrete-event engine.
//!
//! Time is kept in integer picoseconds so every nanosecond-denominated
//! parameter converts exactly. Events due at the same instant dispatch in
//! the order they were scheduled.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default cap on dispatched events per run.
pub const DEFAULT_EVENT_BUDGET: u64 = 1_000_000_000;

const TICKS_PER_NS: u64 = 1_000;

/// Simulated time, 1 tick = 1 ps.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SimTime(pub u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);

    pub const fn from_ns(ns: u64) -> Self {
        SimTime(ns * TICKS_PER_NS)
    }

    pub const fn ticks(self) -> u64 {
        self.0
    }

    pub fn as_ns(self) -> f64 {
        self.0 as f64 / TICKS_PER_NS as f64
    }

    pub fn as_secs(self) -> f64 {
        self.0 as f64 * 1e-12
    }

    pub fn saturating_sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0.saturating_sub(rhs.0))
    }
}

impl std::ops::Add for SimTime {
    type Output = SimTime;
    fn add(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 + rhs.0)
    }
}

impl std::ops::AddAssign for SimTime {
    fn add_assign(&mut self, rhs: SimTime) {
        self.0 += rhs.0;
    }
}

impl std::ops::Sub for SimTime {
    type Output = SimTime;
    fn sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 - rhs.0)
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}ns", self.as_ns())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EngineError {
    #[error("event scheduled in the past: due {due}, clock {now}")]
    ScheduleInPast { due: SimTime, now: SimTime },
    #[error("event budget of {budget} dispatched events exhausted at {now}; possible event loop")]
    BudgetExceeded { budget: u64, now: SimTime },
}

/// A queued action with its due time and insertion sequence number.
#[derive(Debug, Clone)]
pub struct Event<A> {
    pub due: SimTime,
    pub sequence: u64,
    pub action: A,
}

impl<A> PartialEq for Event<A> {
    fn eq(&self, other: &Self) -> bool {
        self.due == other.due && self.sequence == other.sequence
    }
}

impl<A> Eq for Event<A> {}

impl<A> PartialOrd for Event<A> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

// Reversed so the max-heap pops the earliest (due, sequence) first.
impl<A> Ord for Event<A> {
    fn cmp(&self, other: &Self) -> Ordering {
        (other.due, other.sequence).cmp(&(self.due, self.sequence))
    }
}

/// Ordered event queue plus the simulated clock.
#[derive(Debug)]
pub struct EventQueue<A> {
    now: SimTime,
    next_sequence: u64,
    dispatched: u64,
    budget: u64,
    heap: BinaryHeap<Event<A>>,
}

impl<A> Default for EventQueue<A> {
    fn default() -> Self {
        Self::new()
    }
}

impl<A> EventQueue<A> {
    pub fn new() -> Self {
        Self::with_budget(DEFAULT_EVENT_BUDGET)
    }

    pub fn with_budget(budget: u64) -> Self {
        EventQueue { now: SimTime::ZERO, next_sequence: 0, dispatched: 0, budget, heap: BinaryHeap::new() }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    pub fn dispatched(&self) -> u64 {
        self.dispatched
    }

    /// Queue `action` at absolute time `due`. Returns the assigned sequence.
    pub fn schedule(&mut self, due: SimTime, action: A) -> Result<u64, EngineError> {
        if due < self.now {
            return Err(EngineError::ScheduleInPast { due, now: self.now });
        }
        let sequence = self.next_sequence;
        self.next_sequence += 1;
        self.heap.push(Event { due, sequence, action });
        Ok(sequence)
    }

    pub fn schedule_in(&mut self, delay: SimTime, action: A) -> u64 {
        let due = self.now + delay;
        // due >= now always holds for a relative delay
        self.schedule(due, action).expect("relative schedule")
    }

    /// Pop the next event and advance the clock to its due time.
    pub fn pop(&mut self) -> Result<Option<Event<A>>, EngineError> {
        if self.heap.is_empty() {
            return Ok(None);
        }
        if self.dispatched >= self.budget {
            return Err(EngineError::BudgetExceeded { budget: self.budget, now: self.now });
        }
        let event = self.heap.pop().expect("non-empty heap");
        debug_assert!(event.due >= self.now);
        self.now = event.due;
        self.dispatched += 1;
        Ok(Some(event))
    }

    /// Dispatch events through `handler` until the queue drains; returns the
    /// clock after the last dispatched event.
    pub fn run_until_idle<E, F>(&mut self, mut handler: F) -> Result<SimTime, E>
    where
        E: From<EngineError>,
        F: FnMut(&mut Self, Event<A>) -> Result<(), E>,
    {
        while let Some(event) = self.pop()? {
            handler(self, event)?;
        }
        Ok(self.now)
    }
}
