use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BinaryHeap};
use std::fmt;

use thiserror::Error;

use crate::time::SimTime;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScheduleError {
    #[error("cannot schedule at {at}: clock is already at {clock}")]
    InPast { at: SimTime, clock: SimTime },
}

/// Message endpoint inside the simulated network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Endpoint {
    Controller,
    Device(u32),
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Endpoint::Controller => f.write_str("controller"),
            Endpoint::Device(id) => write!(f, "device {id}"),
        }
    }
}

/// A scheduled event. Executes in `(time, seq)` order.
#[derive(Debug, Clone)]
pub struct SimEvent<K> {
    pub time: SimTime,
    pub seq: u64,
    pub kind: K,
}

impl<K> PartialEq for SimEvent<K> {
    fn eq(&self, other: &Self) -> bool {
        (self.time, self.seq) == (other.time, other.seq)
    }
}

impl<K> Eq for SimEvent<K> {}

impl<K> PartialOrd for SimEvent<K> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<K> Ord for SimEvent<K> {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.time, self.seq).cmp(&(other.time, other.seq))
    }
}

/// Pending-event set plus the simulation clock.
#[derive(Debug)]
pub struct EventQueue<K> {
    heap: BinaryHeap<Reverse<SimEvent<K>>>,
    clock: SimTime,
    next_seq: u64,
    /// Latest delivery time handed out per directed channel.
    channel_tail: BTreeMap<(Endpoint, Endpoint), SimTime>,
}

impl<K> Default for EventQueue<K> {
    fn default() -> Self {
        EventQueue {
            heap: BinaryHeap::new(),
            clock: SimTime::ZERO,
            next_seq: 0,
            channel_tail: BTreeMap::new(),
        }
    }
}

impl<K> EventQueue<K> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn clock(&self) -> SimTime {
        self.clock
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    /// Enqueues `kind` at `time`; same-time events keep insertion order.
    pub fn schedule(&mut self, time: SimTime, kind: K) -> Result<u64, ScheduleError> {
        if time < self.clock {
            return Err(ScheduleError::InPast {
                at: time,
                clock: self.clock,
            });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Reverse(SimEvent { time, seq, kind }));
        Ok(seq)
    }

    /// Schedules a message delivery `delay` after `now`, never earlier than
    /// the previous delivery on the same `(src, dst)` channel, so each
    /// channel is FIFO even when per-message delays differ.
    pub fn deliver(
        &mut self,
        kind: K,
        src: Endpoint,
        dst: Endpoint,
        now: SimTime,
        delay: SimTime,
    ) -> Result<SimTime, ScheduleError> {
        let tail = self.channel_tail.entry((src, dst)).or_insert(SimTime::ZERO);
        let at = (now + delay).max(*tail);
        *tail = at;
        self.schedule(at, kind)?;
        Ok(at)
    }

    pub fn peek_time(&self) -> Option<SimTime> {
        self.heap.peek().map(|Reverse(e)| e.time)
    }

    /// Removes the next event and advances the clock to its time.
    pub fn pop(&mut self) -> Option<SimEvent<K>> {
        let Reverse(ev) = self.heap.pop()?;
        self.clock = ev.time;
        Some(ev)
    }

    /// Moves the clock forward without executing anything.
    pub fn advance_to(&mut self, t: SimTime) {
        self.clock = self.clock.max(t);
    }

    pub fn pending(&self) -> impl Iterator<Item = &SimEvent<K>> {
        self.heap.iter().map(|Reverse(e)| e)
    }
}
