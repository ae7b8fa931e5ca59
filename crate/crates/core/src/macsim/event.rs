//! Simulation clock and the (time, seq) ordered event queue.

use alloc::collections::BinaryHeap;
use alloc::format;
use core::cmp::Ordering;

use crate::error::{Error, Result};

/// Simulation time in nanoseconds.
pub type SimTime = u64;

pub const NS_PER_S: f64 = 1e9;

pub fn secs_to_ns(s: f64) -> SimTime {
    crate::math::round(s * NS_PER_S) as SimTime
}

pub fn us_to_ns(us: f64) -> SimTime {
    crate::math::round(us * 1e3) as SimTime
}

pub fn ns_to_secs(t: SimTime) -> f64 {
    t as f64 / NS_PER_S
}

struct Entry<E> {
    time: SimTime,
    seq: u64,
    event: E,
}

impl<E> PartialEq for Entry<E> {
    fn eq(&self, other: &Self) -> bool {
        (self.time, self.seq) == (other.time, other.seq)
    }
}

impl<E> Eq for Entry<E> {}

impl<E> PartialOrd for Entry<E> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<E> Ord for Entry<E> {
    // Reversed so the max-heap pops the earliest entry.
    fn cmp(&self, other: &Self) -> Ordering {
        (other.time, other.seq).cmp(&(self.time, self.seq))
    }
}

/// Min-queue of events keyed by time, FIFO among equal times.
pub struct EventQueue<E> {
    heap: BinaryHeap<Entry<E>>,
    now: SimTime,
    next_seq: u64,
}

impl<E> Default for EventQueue<E> {
    fn default() -> Self {
        Self { heap: BinaryHeap::new(), now: 0, next_seq: 0 }
    }
}

impl<E> EventQueue<E> {
    pub fn new() -> Self {
        Self::default()
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

    pub fn schedule(&mut self, time: SimTime, event: E) -> Result<()> {
        if time < self.now {
            return Err(Error::Simulation(format!("event scheduled at {time} ns before clock {} ns", self.now)));
        }
        self.heap.push(Entry { time, seq: self.next_seq, event });
        self.next_seq += 1;
        Ok(())
    }

    pub fn schedule_in(&mut self, delay: SimTime, event: E) -> Result<()> {
        self.schedule(self.now + delay, event)
    }

    /// Pops the next event at or before `horizon`, advancing the clock.
    pub fn pop_until(&mut self, horizon: SimTime) -> Option<(SimTime, E)> {
        if self.heap.peek()?.time > horizon {
            return None;
        }
        let e = self.heap.pop()?;
        self.now = e.time;
        Some((e.time, e.event))
    }
}
