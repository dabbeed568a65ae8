use std::fmt;

use serde::{Deserialize, Serialize};

use crate::hierarchy::ChainPath;
use crate::ledger::{InboundEntry, Transaction};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BlockId(pub u64);

impl BlockId {
    pub const GENESIS: BlockId = BlockId(0);
}

impl fmt::Display for BlockId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if *self == BlockId::GENESIS {
            f.write_str("genesis")
        } else {
            write!(f, "{:016x}", self.0)
        }
    }
}

/// A mined block. One id covers every chain the block is a member of: the
/// chains on its slice whose order is at least `achieved_order`.
///
/// `predecessors`, `bodies` are indexed by `order - achieved_order`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub id: BlockId,
    /// Bottom of the mining slice; the slice is every prefix of this path.
    pub leaf: ChainPath,
    pub achieved_order: usize,
    pub predecessors: Vec<BlockId>,
    pub bodies: Vec<Vec<Transaction>>,
    /// Cross-chain transfers from deeper chains of the slice that this block
    /// carries up into an ancestor chain for the first time.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rollup: Vec<InboundEntry>,
    pub found_time: f64,
    pub miner: u32,
    /// Set when the block breaks a protocol rule outside this model (bad
    /// header, bad signature, ...). Such blocks are always rejected.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub malformed: bool,
}

impl Block {
    /// The shared genesis block, a member of every chain.
    pub fn genesis() -> Block {
        Block {
            id: BlockId::GENESIS,
            leaf: ChainPath::ROOT,
            achieved_order: 1,
            predecessors: Vec::new(),
            bodies: Vec::new(),
            rollup: Vec::new(),
            found_time: 0.0,
            miner: u32::MAX,
            malformed: false,
        }
    }

    pub fn is_genesis(&self) -> bool {
        self.id == BlockId::GENESIS
    }

    /// Root-to-leaf chains the block was mined on.
    pub fn slice(&self) -> Vec<ChainPath> {
        self.leaf.prefixes().collect()
    }

    pub fn is_member(&self, chain: &ChainPath) -> bool {
        self.is_genesis()
            || (chain.order() >= self.achieved_order && chain.is_prefix_of(&self.leaf))
    }

    /// Chains this block belongs to, hardest order first.
    pub fn member_chains(&self) -> impl Iterator<Item = ChainPath> + '_ {
        (self.achieved_order..=self.leaf.order()).map(move |o| self.leaf.ancestor_at(o).expect("order in range"))
    }

    /// Shared by more than one chain.
    pub fn is_coincident(&self) -> bool {
        self.is_genesis() || self.achieved_order < self.leaf.order()
    }

    pub fn predecessor_at(&self, order: usize) -> Option<BlockId> {
        order.checked_sub(self.achieved_order).and_then(|i| self.predecessors.get(i)).copied()
    }

    pub fn body_at(&self, order: usize) -> &[Transaction] {
        order
            .checked_sub(self.achieved_order)
            .and_then(|i| self.bodies.get(i))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// Transfers that reach `chain` for the first time in this block: the
    /// chain's own outbound transfers toward its descendants, plus rolled-up
    /// transfers from deeper origins whose relay chain is `chain`.
    pub fn carried_into<'a>(&'a self, chain: &'a ChainPath, height: u64) -> impl Iterator<Item = InboundEntry> + 'a {
        let own = self
            .body_at(chain.order())
            .iter()
            .enumerate()
            .filter(move |(_, tx)| tx.destination != *chain && chain.is_prefix_of(&tx.destination))
            .map(move |(i, tx)| InboundEntry { tx: tx.clone(), origin_height: height, index: i as u32 });
        let rolled = self
            .rollup
            .iter()
            .filter(move |e| e.tx.ancestor() == *chain)
            .cloned();
        own.chain(rolled)
    }

    pub fn tx_count(&self) -> usize {
        self.bodies.iter().map(Vec::len).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> ChainPath {
        s.parse().unwrap()
    }

    fn block(achieved: usize) -> Block {
        let leaf = p("{1,2,1}");
        let n = leaf.order() - achieved + 1;
        Block {
            id: BlockId(7),
            leaf,
            achieved_order: achieved,
            predecessors: vec![BlockId::GENESIS; n],
            bodies: vec![Vec::new(); n],
            rollup: Vec::new(),
            found_time: 1.0,
            miner: 0,
            malformed: false,
        }
    }

    #[test]
    fn membership_follows_achieved_order() {
        let b = block(2);
        assert!(!b.is_member(&p("{1}")));
        assert!(b.is_member(&p("{1,2}")));
        assert!(b.is_member(&p("{1,2,1}")));
        assert!(!b.is_member(&p("{1,1}")));
        assert!(b.is_coincident());
        assert_eq!(b.member_chains().collect::<Vec<_>>(), vec![p("{1,2}"), p("{1,2,1}")]);
        assert_eq!(b.predecessors.len(), 2);
        assert!(!block(3).is_coincident());
        assert!(Block::genesis().is_member(&p("{1,1,2}")));
    }

    #[test]
    fn predecessor_indexing() {
        let mut b = block(1);
        b.predecessors = vec![BlockId(1), BlockId(2), BlockId(3)];
        assert_eq!(b.predecessor_at(1), Some(BlockId(1)));
        assert_eq!(b.predecessor_at(3), Some(BlockId(3)));
        assert_eq!(b.predecessor_at(4), None);
        let b2 = block(2);
        assert_eq!(b2.predecessor_at(1), None);
    }
}
