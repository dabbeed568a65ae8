use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::Arc;

use crate::consensus::Block;
use crate::hierarchy::ChainPath;

/// Who a block is delivered to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Recipient {
    Node(u32),
    Observer(u32),
    Adversary,
}

#[derive(Debug, Clone)]
pub enum SimEventKind {
    BlockFound { miner: Miner, leaf: ChainPath, achieved_order: usize },
    BlockDelivered { to: Recipient, block: Arc<Block> },
    /// The transaction is drawn when the event fires, from the then-current
    /// reference state.
    TxInjected,
    Checkpoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Miner {
    Node(u32),
    Adversary,
}

#[derive(Debug, Clone)]
pub struct SimEvent {
    pub time: f64,
    pub seq: u64,
    pub kind: SimEventKind,
}

impl PartialEq for SimEvent {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for SimEvent {}

impl PartialOrd for SimEvent {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Reversed so the max-heap pops the earliest event; ties go to the one
/// scheduled first.
impl Ord for SimEvent {
    fn cmp(&self, other: &Self) -> Ordering {
        other.time.total_cmp(&self.time).then_with(|| other.seq.cmp(&self.seq))
    }
}

#[derive(Debug, Default)]
pub struct EventQueue {
    heap: BinaryHeap<SimEvent>,
    next_seq: u64,
}

impl EventQueue {
    pub fn push(&mut self, time: f64, kind: SimEventKind) {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(SimEvent { time, seq, kind });
    }

    pub fn pop(&mut self) -> Option<SimEvent> {
        self.heap.pop()
    }

    pub fn peek_time(&self) -> Option<f64> {
        self.heap.peek().map(|e| e.time)
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pops_in_time_then_schedule_order() {
        let mut q = EventQueue::default();
        q.push(2.0, SimEventKind::Checkpoint);
        q.push(1.0, SimEventKind::TxInjected);
        q.push(1.0, SimEventKind::Checkpoint);
        let a = q.pop().unwrap();
        assert_eq!((a.time, a.seq), (1.0, 1));
        let b = q.pop().unwrap();
        assert_eq!((b.time, b.seq), (1.0, 2));
        assert_eq!(q.pop().unwrap().time, 2.0);
        assert!(q.pop().is_none());
    }
}
