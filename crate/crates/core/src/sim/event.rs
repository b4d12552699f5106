//! Deterministic event queue: events fire in (cycle, insertion-sequence)
//! order, so equal-cycle events replay identically across runs.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::quant::Precision;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Event {
    /// Host programming loop iteration.
    HostTick,
    /// Fetch pipeline entry for a freshly programmed slot.
    StartPrefetch { slot: usize },
    /// The in-service request on a bank completes.
    MemComplete { bank: usize },
    /// Layer weights finish streaming into the weight bank.
    WeightsReady,
    /// PE allocation opportunity in one precision subnet.
    TryAllocate { precision: Precision },
    /// The aggregation manager of a slot is free to inject its next message.
    AgmInject { slot: usize },
    /// Tail flit of one packet consumed by a core.
    PacketConsumed { slot: usize, flits: u64 },
    /// Aggregation buffer write-port arbitration.
    BufferGrant,
    /// Transformation engine arbitration for one precision.
    TryTransform { precision: Precision },
    /// A systolic pass for a slot completes.
    TransformDone { slot: usize },
}

#[derive(Debug)]
struct Scheduled {
    cycle: u64,
    seq: u64,
    event: Event,
}

impl PartialEq for Scheduled {
    fn eq(&self, other: &Self) -> bool {
        self.cycle == other.cycle && self.seq == other.seq
    }
}

impl Eq for Scheduled {}

impl PartialOrd for Scheduled {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Scheduled {
    fn cmp(&self, other: &Self) -> Ordering {
        // Reversed: BinaryHeap is a max-heap, we want the earliest first.
        (other.cycle, other.seq).cmp(&(self.cycle, self.seq))
    }
}

#[derive(Debug, Default)]
pub struct EventQueue {
    heap: BinaryHeap<Scheduled>,
    next_seq: u64,
}

impl EventQueue {
    pub fn new() -> Self {
        EventQueue::default()
    }

    pub fn schedule(&mut self, cycle: u64, event: Event) {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Scheduled { cycle, seq, event });
    }

    pub fn pop(&mut self) -> Option<(u64, Event)> {
        self.heap.pop().map(|s| (s.cycle, s.event))
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }
}
