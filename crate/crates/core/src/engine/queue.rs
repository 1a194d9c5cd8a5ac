use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::time::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum EventKind {
    ClockSync { master: usize },
    Release { attempt: u64 },
    BusRelease { node: u32 },
    BusGrant { node: u32 },
    TxEnd { attempt: u64 },
    TxStart { attempt: u64 },
    CsmaSense { attempt: u64 },
    GatewayDeliver { attempt: u64 },
    ClockSample { master: usize },
    SimEnd,
}

impl EventKind {
    /// Order among events at the same instant. A bus must be released before
    /// it is granted again, and every frame that starts at an instant must be
    /// on air before anyone senses the channel at that instant.
    fn rank(&self) -> u8 {
        match self {
            EventKind::ClockSync { .. } => 0,
            EventKind::Release { .. } => 1,
            EventKind::BusRelease { .. } => 2,
            EventKind::BusGrant { .. } => 3,
            EventKind::TxEnd { .. } => 4,
            EventKind::TxStart { .. } => 5,
            EventKind::CsmaSense { .. } => 6,
            EventKind::GatewayDeliver { .. } => 7,
            EventKind::ClockSample { .. } => 8,
            EventKind::SimEnd => 9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimEvent {
    pub time: SimTime,
    pub seq: u64,
    pub kind: EventKind,
}

/// Min-queue ordered by `(time, rank, seq)`; `seq` is assigned on push, so
/// equal-time, equal-rank events pop in insertion order.
#[derive(Debug, Default)]
pub struct EventQueue {
    heap: BinaryHeap<Reverse<(SimTime, u8, u64, EventKindKey)>>,
    next_seq: u64,
}

/// `EventKind` carried through the heap; ordering never reaches it because
/// `seq` is unique.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct EventKindKey(EventKind);

impl PartialOrd for EventKindKey {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for EventKindKey {
    fn cmp(&self, _: &Self) -> std::cmp::Ordering {
        std::cmp::Ordering::Equal
    }
}

impl EventQueue {
    pub fn push(&mut self, time: SimTime, kind: EventKind) {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Reverse((time, kind.rank(), seq, EventKindKey(kind))));
    }

    pub fn pop(&mut self) -> Option<SimEvent> {
        self.heap.pop().map(|Reverse((time, _, seq, k))| SimEvent { time, seq, kind: k.0 })
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}
