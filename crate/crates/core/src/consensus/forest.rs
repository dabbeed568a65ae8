//! Append-only store of every block a replica has received.
//!
//! The forest only reasons about the chains it tracks (a prefix-closed set of
//! chain paths). A block is admitted once all of its predecessors in tracked
//! chains are present; until then it waits in an orphan buffer. Besides the
//! blocks themselves the forest keeps the per-chain indexes that fork choice
//! needs:
//!
//! * `height(b, c)`: distance from genesis along chain `c`;
//! * `lcp(b, c)`: nearest ancestor-or-self of `b` in `c` that also belongs to
//!   `parent(c)` (genesis for the root);
//! * `lcc(b, c)`: nearest ancestor-or-self of `b` in `parent(c)` that also
//!   belongs to `c`;
//! * for every `(c, anchor)` the best valid block whose `lcp` is `anchor`.

use std::cmp::Ordering;
use std::collections::{HashMap, HashSet, VecDeque};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::block::{Block, BlockId};
use crate::hierarchy::{ChainPath, MAX_ORDERS};
use crate::ledger::InboundEntry;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InvalidReason {
    Malformed,
    Structure,
    InvalidPredecessor,
    /// Coincident links disagree between a chain and its parent.
    InconsistentCoincidence,
    BadRollup,
    InvalidTransaction,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Admission {
    Admitted,
    Buffered,
    Rejected(InvalidReason),
    Duplicate,
    /// Member of no tracked chain.
    Irrelevant,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdmitReport {
    pub outcome: Admission,
    /// Every block admitted by this call, including released orphans.
    pub admitted: Vec<BlockId>,
    pub rejected: Vec<BlockId>,
}

#[derive(Debug, Clone)]
struct Entry {
    block: Arc<Block>,
    received: f64,
    invalid: Option<InvalidReason>,
    height: [u64; MAX_ORDERS],
    lcp: [BlockId; MAX_ORDERS],
}

#[derive(Debug, Clone)]
pub struct BlockForest {
    orders: usize,
    tracked: Vec<ChainPath>,
    tracked_set: HashSet<ChainPath>,
    tracked_children: HashMap<ChainPath, Vec<ChainPath>>,
    blocks: HashMap<BlockId, Entry>,
    orphans: HashMap<BlockId, Vec<(Arc<Block>, f64)>>,
    orphan_ids: HashSet<BlockId>,
    children: HashMap<(ChainPath, BlockId), Vec<BlockId>>,
    lcc: HashMap<(BlockId, ChainPath), BlockId>,
    buckets: HashMap<(ChainPath, BlockId), Bucket>,
}

#[derive(Debug, Clone, Default)]
struct Bucket {
    members: Vec<BlockId>,
    best: Option<BlockId>,
}

impl BlockForest {
    /// A forest tracking `tracked` (closed under ancestors automatically) in a
    /// hierarchy of `orders` orders, holding only genesis.
    pub fn new(orders: usize, tracked: impl IntoIterator<Item = ChainPath>) -> Self {
        let mut set: HashSet<ChainPath> = HashSet::new();
        for c in tracked {
            set.extend(c.prefixes());
        }
        let mut chains: Vec<ChainPath> = set.iter().copied().collect();
        chains.sort_by(|a, b| a.order().cmp(&b.order()).then(a.cmp(b)));
        let mut tracked_children: HashMap<ChainPath, Vec<ChainPath>> = HashMap::new();
        for c in &chains {
            if let Ok(p) = c.parent() {
                tracked_children.entry(p).or_default().push(*c);
            }
        }
        let genesis = Entry {
            block: Arc::new(Block::genesis()),
            received: 0.0,
            invalid: None,
            height: [0; MAX_ORDERS],
            lcp: [BlockId::GENESIS; MAX_ORDERS],
        };
        let mut blocks = HashMap::new();
        blocks.insert(BlockId::GENESIS, genesis);
        BlockForest {
            orders,
            tracked: chains,
            tracked_set: set,
            tracked_children,
            blocks,
            orphans: HashMap::new(),
            orphan_ids: HashSet::new(),
            children: HashMap::new(),
            lcc: HashMap::new(),
            buckets: HashMap::new(),
        }
    }

    pub fn orders(&self) -> usize {
        self.orders
    }

    /// Tracked chains, ordered by order and then left to right.
    pub fn tracked(&self) -> &[ChainPath] {
        &self.tracked
    }

    pub fn tracks(&self, chain: &ChainPath) -> bool {
        self.tracked_set.contains(chain)
    }

    pub fn tracked_children(&self, chain: &ChainPath) -> &[ChainPath] {
        self.tracked_children.get(chain).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn contains(&self, id: BlockId) -> bool {
        self.blocks.contains_key(&id)
    }

    pub fn get(&self, id: BlockId) -> Option<&Block> {
        self.blocks.get(&id).map(|e| e.block.as_ref())
    }

    pub fn get_arc(&self, id: BlockId) -> Option<&Arc<Block>> {
        self.blocks.get(&id).map(|e| &e.block)
    }

    fn entry(&self, id: BlockId) -> &Entry {
        self.blocks.get(&id).unwrap_or_else(|| panic!("block {id} not in forest"))
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// All stored blocks, valid or not, in unspecified order.
    pub fn blocks(&self) -> impl Iterator<Item = &Block> {
        self.blocks.values().map(|e| e.block.as_ref())
    }

    pub fn is_valid(&self, id: BlockId) -> bool {
        self.blocks.get(&id).is_some_and(|e| e.invalid.is_none())
    }

    pub fn invalid_reason(&self, id: BlockId) -> Option<InvalidReason> {
        self.blocks.get(&id).and_then(|e| e.invalid)
    }

    pub fn is_orphan(&self, id: BlockId) -> bool {
        self.orphan_ids.contains(&id)
    }

    pub fn orphan_count(&self) -> usize {
        self.orphan_ids.len()
    }

    pub fn received(&self, id: BlockId) -> f64 {
        self.entry(id).received
    }

    /// Height of `id` in `chain`; the block must be a member.
    pub fn height(&self, id: BlockId, chain: &ChainPath) -> u64 {
        self.entry(id).height[chain.order() - 1]
    }

    /// Predecessor of `id` in `chain`, `None` for genesis.
    pub fn pred_in(&self, id: BlockId, chain: &ChainPath) -> Option<BlockId> {
        self.entry(id).block.predecessor_at(chain.order())
    }

    /// Nearest ancestor-or-self of `id` in `chain` that belongs to the
    /// parent chain.
    pub fn lcp(&self, id: BlockId, chain: &ChainPath) -> BlockId {
        self.entry(id).lcp[chain.order() - 1]
    }

    /// Nearest ancestor-or-self of `id` in `parent(child)` that belongs to
    /// `child`. Both chains must be tracked.
    pub fn lcc(&self, id: BlockId, child: &ChainPath) -> BlockId {
        if id == BlockId::GENESIS {
            return id;
        }
        *self
            .lcc
            .get(&(id, *child))
            .unwrap_or_else(|| panic!("no coincident link for {id} toward {child}"))
    }

    /// Valid children of `id` in `chain`.
    pub fn children(&self, chain: &ChainPath, id: BlockId) -> &[BlockId] {
        self.children.get(&(*chain, id)).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Fork-choice preference between two members of one chain: heavier
    /// first, then earlier received, then smaller id.
    pub fn compare(&self, a: BlockId, b: BlockId, chain: &ChainPath) -> Ordering {
        let (ea, eb) = (self.entry(a), self.entry(b));
        let o = chain.order() - 1;
        ea.height[o]
            .cmp(&eb.height[o])
            .then_with(|| eb.received.total_cmp(&ea.received))
            .then_with(|| b.cmp(&a))
    }

    /// Best valid block of `chain` whose last parent-coincident ancestor is
    /// `anchor`. Falls back to `anchor` itself.
    pub fn best_tip(&self, chain: &ChainPath, anchor: BlockId) -> BlockId {
        self.buckets
            .get(&(*chain, anchor))
            .and_then(|b| b.best)
            .unwrap_or(anchor)
    }

    /// Genesis-first path to `tip` along `chain`.
    pub fn ancestry(&self, tip: BlockId, chain: &ChainPath) -> Vec<BlockId> {
        let mut out = vec![tip];
        let mut cur = tip;
        while let Some(p) = self.pred_in(cur, chain) {
            out.push(p);
            cur = p;
        }
        out.reverse();
        out
    }

    /// `true` if `later` references `earlier` through predecessor links of
    /// any order. Works from headers, so `earlier` itself need not be stored.
    pub fn ordered_before(&self, earlier: BlockId, later: BlockId) -> bool {
        let mut seen = HashSet::new();
        let mut queue = VecDeque::from([later]);
        while let Some(id) = queue.pop_front() {
            let Some(e) = self.blocks.get(&id) else { continue };
            for &p in &e.block.predecessors {
                if p == earlier {
                    return true;
                }
                if seen.insert(p) {
                    queue.push_back(p);
                }
            }
        }
        false
    }

    pub fn admit(&mut self, block: impl Into<Arc<Block>>, received: f64) -> AdmitReport {
        let block = block.into();
        let id = block.id;
        let mut report = AdmitReport { outcome: Admission::Duplicate, admitted: Vec::new(), rejected: Vec::new() };
        if self.blocks.contains_key(&id) || self.orphan_ids.contains(&id) {
            return report;
        }
        report.outcome = self.try_admit(block, received, &mut report);
        report
    }

    fn try_admit(&mut self, block: Arc<Block>, received: f64, report: &mut AdmitReport) -> Admission {
        let outcome = self.evaluate(&block);
        match outcome {
            Evaluation::Irrelevant => return Admission::Irrelevant,
            Evaluation::Missing(pid) => {
                self.orphan_ids.insert(block.id);
                self.orphans.entry(pid).or_default().push((block, received));
                return Admission::Buffered;
            }
            Evaluation::Invalid(reason) => {
                let id = block.id;
                self.insert_invalid(block, received, reason);
                self.release_orphans(id, report);
                return Admission::Rejected(reason);
            }
            Evaluation::Valid => {}
        }
        let id = block.id;
        self.insert_valid(block, received);
        report.admitted.push(id);
        self.release_orphans(id, report);
        Admission::Admitted
    }

    fn release_orphans(&mut self, id: BlockId, report: &mut AdmitReport) {
        let mut queue = VecDeque::from([id]);
        while let Some(pid) = queue.pop_front() {
            let Some(waiting) = self.orphans.remove(&pid) else { continue };
            for (b, t) in waiting {
                self.orphan_ids.remove(&b.id);
                let bid = b.id;
                match self.evaluate(&b) {
                    Evaluation::Irrelevant => {}
                    Evaluation::Missing(next) => {
                        self.orphan_ids.insert(bid);
                        self.orphans.entry(next).or_default().push((b, t));
                    }
                    Evaluation::Invalid(reason) => {
                        self.insert_invalid(b, t, reason);
                        report.rejected.push(bid);
                        queue.push_back(bid);
                    }
                    Evaluation::Valid => {
                        self.insert_valid(b, t);
                        report.admitted.push(bid);
                        queue.push_back(bid);
                    }
                }
            }
        }
    }

    fn tracked_members<'a>(&'a self, block: &'a Block) -> impl Iterator<Item = ChainPath> + 'a {
        block.member_chains().filter(|c| self.tracked_set.contains(c))
    }

    fn evaluate(&self, block: &Block) -> Evaluation {
        let r = self.orders;
        let j = block.achieved_order;
        let n = r.wrapping_sub(j).wrapping_add(1);
        if block.leaf.order() != r
            || j == 0
            || j > r
            || block.predecessors.len() != n
            || block.bodies.len() != n
            || block.is_genesis()
        {
            return if self.tracked_members(block).next().is_none() && block.leaf.order() == r {
                Evaluation::Irrelevant
            } else {
                Evaluation::Invalid(InvalidReason::Structure)
            };
        }
        let members: Vec<ChainPath> = self.tracked_members(block).collect();
        if members.is_empty() {
            return Evaluation::Irrelevant;
        }
        if block.malformed {
            return Evaluation::Invalid(InvalidReason::Malformed);
        }
        for c in &members {
            let pid = block.predecessors[c.order() - j];
            match self.blocks.get(&pid) {
                None => return Evaluation::Missing(pid),
                Some(e) if e.invalid.is_some() => return Evaluation::Invalid(InvalidReason::InvalidPredecessor),
                Some(e) if !e.block.is_member(c) => return Evaluation::Invalid(InvalidReason::Structure),
                Some(_) => {}
            }
        }
        // Consecutive member chains must agree on their latest shared block.
        for pair in members.windows(2) {
            let (parent, child) = (&pair[0], &pair[1]);
            let up = self.lcc(block.predecessors[parent.order() - j], child);
            let down = self.lcp(block.predecessors[child.order() - j], child);
            if up != down {
                return Evaluation::Invalid(InvalidReason::InconsistentCoincidence);
            }
        }
        if members.len() == n {
            let expected = self.compute_rollup(block.leaf, j, &block.predecessors, &block.bodies);
            if expected != block.rollup {
                return Evaluation::Invalid(InvalidReason::BadRollup);
            }
        }
        Evaluation::Valid
    }

    fn insert_invalid(&mut self, block: Arc<Block>, received: f64, reason: InvalidReason) {
        let entry = Entry {
            block,
            received,
            invalid: Some(reason),
            height: [0; MAX_ORDERS],
            lcp: [BlockId::GENESIS; MAX_ORDERS],
        };
        self.blocks.insert(entry.block.id, entry);
    }

    fn insert_valid(&mut self, block: Arc<Block>, received: f64) {
        let id = block.id;
        let j = block.achieved_order;
        let mut height = [0; MAX_ORDERS];
        let mut lcp = [BlockId::GENESIS; MAX_ORDERS];
        let members: Vec<ChainPath> = self.tracked_members(&block).collect();
        for c in &members {
            let k = c.order();
            let pid = block.predecessors[k - j];
            let pe = self.entry(pid);
            height[k - 1] = pe.height[k - 1] + 1;
            lcp[k - 1] = if k == 1 {
                BlockId::GENESIS
            } else if j < k {
                id
            } else {
                pe.lcp[k - 1]
            };
        }
        for c in &members {
            let pid = block.predecessors[c.order() - j];
            for child in self.tracked_children(c).to_vec() {
                let link = if block.is_member(&child) { id } else { self.lcc(pid, &child) };
                self.lcc.insert((id, child), link);
            }
        }
        self.blocks.insert(id, Entry { block: block.clone(), received, invalid: None, height, lcp });
        for c in &members {
            let pid = block.predecessors[c.order() - j];
            self.children.entry((*c, pid)).or_default().push(id);
            let key = (*c, lcp[c.order() - 1]);
            let best = self.buckets.get(&key).and_then(|b| b.best);
            let replace = best.is_none_or(|cur| self.compare(id, cur, c) == Ordering::Greater);
            let bucket = self.buckets.entry(key).or_default();
            bucket.members.push(id);
            if replace {
                bucket.best = Some(id);
            }
        }
    }

    /// Marks `id` and every stored descendant invalid. Returns the blocks whose
    /// status changed.
    pub fn mark_invalid(&mut self, id: BlockId, reason: InvalidReason) -> Vec<BlockId> {
        let mut changed = Vec::new();
        let mut queue = VecDeque::from([(id, reason)]);
        let mut touched: HashSet<(ChainPath, BlockId)> = HashSet::new();
        while let Some((bid, why)) = queue.pop_front() {
            let Some(e) = self.blocks.get_mut(&bid) else { continue };
            if e.invalid.is_some() || bid == BlockId::GENESIS {
                continue;
            }
            e.invalid = Some(why);
            changed.push(bid);
            let block = e.block.clone();
            let lcp = e.lcp;
            for c in block.member_chains().filter(|c| self.tracked_set.contains(c)) {
                touched.insert((c, lcp[c.order() - 1]));
                if let Some(kids) = self.children.get(&(c, bid)) {
                    queue.extend(kids.iter().map(|&k| (k, InvalidReason::InvalidPredecessor)));
                }
            }
        }
        for key in touched {
            let (chain, _) = key;
            let members = self.buckets.get(&key).map(|b| b.members.clone()).unwrap_or_default();
            let best = members
                .into_iter()
                .filter(|m| self.is_valid(*m))
                .max_by(|a, b| self.compare(*a, *b, &chain));
            if let Some(b) = self.buckets.get_mut(&key) {
                b.best = best;
            }
        }
        changed
    }

    /// Cross-chain transfers that a block with this header carries up into
    /// ancestor chains for the first time. The forest must track every chain
    /// of the slice below `achieved`.
    pub fn compute_rollup(
        &self,
        leaf: ChainPath,
        achieved: usize,
        predecessors: &[BlockId],
        bodies: &[Vec<crate::ledger::Transaction>],
    ) -> Vec<InboundEntry> {
        let mut out = Vec::new();
        for k in (achieved + 1)..=leaf.order() {
            let chain = leaf.ancestor_at(k).expect("order in range");
            let relay_in_range = |dest: &ChainPath, below: usize| {
                let a = chain.common_ancestor(dest).order();
                a >= achieved && a < k && a < below
            };
            let pred = predecessors[k - achieved];
            let mut collected: Vec<Vec<InboundEntry>> = Vec::new();
            let own_height = self.height(pred, &chain) + 1;
            collected.push(
                bodies[k - achieved]
                    .iter()
                    .enumerate()
                    .filter(|(_, tx)| relay_in_range(&tx.destination, usize::MAX))
                    .map(|(i, tx)| InboundEntry { tx: tx.clone(), origin_height: own_height, index: i as u32 })
                    .collect(),
            );
            let mut min_order = usize::MAX;
            let mut cur = pred;
            while cur != BlockId::GENESIS {
                let e = self.entry(cur);
                min_order = min_order.min(e.block.achieved_order);
                if min_order <= achieved {
                    break;
                }
                let h = e.height[k - 1];
                collected.push(
                    e.block
                        .body_at(k)
                        .iter()
                        .enumerate()
                        .filter(|(_, tx)| relay_in_range(&tx.destination, min_order))
                        .map(|(i, tx)| InboundEntry { tx: tx.clone(), origin_height: h, index: i as u32 })
                        .collect(),
                );
                cur = e.block.predecessor_at(k).expect("non-genesis block has a predecessor");
            }
            out.extend(collected.into_iter().rev().flatten());
        }
        out
    }
}

enum Evaluation {
    Valid,
    Invalid(InvalidReason),
    Missing(BlockId),
    Irrelevant,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hierarchy::HierarchyConfig;

    fn p(s: &str) -> ChainPath {
        s.parse().unwrap()
    }

    fn mk(id: u64, leaf: &str, achieved: usize, preds: &[u64]) -> Block {
        let leaf = p(leaf);
        Block {
            id: BlockId(id),
            leaf,
            achieved_order: achieved,
            predecessors: preds.iter().map(|&x| BlockId(x)).collect(),
            bodies: vec![Vec::new(); preds.len()],
            rollup: Vec::new(),
            found_time: id as f64,
            miner: 0,
            malformed: false,
        }
    }

    fn full_forest() -> BlockForest {
        BlockForest::new(3, HierarchyConfig::new(vec![2, 2]).unwrap().chains())
    }

    #[test]
    fn genesis_child_is_admitted() {
        let mut f = full_forest();
        let r = f.admit(mk(1, "1.1.1", 3, &[0]), 1.0);
        assert_eq!(r.outcome, Admission::Admitted);
        assert_eq!(f.height(BlockId(1), &p("1.1.1")), 1);
    }

    #[test]
    fn unknown_predecessor_is_buffered_then_released() {
        let mut f = full_forest();
        let r = f.admit(mk(2, "1.1.1", 3, &[1]), 2.0);
        assert_eq!(r.outcome, Admission::Buffered);
        assert!(f.is_orphan(BlockId(2)));
        let r = f.admit(mk(1, "1.1.1", 3, &[0]), 3.0);
        assert_eq!(r.admitted, vec![BlockId(1), BlockId(2)]);
        assert!(!f.is_orphan(BlockId(2)));
        // received time of the orphan is its own delivery time
        assert_eq!(f.received(BlockId(2)), 2.0);
    }

    #[test]
    fn duplicate_is_noop() {
        let mut f = full_forest();
        f.admit(mk(1, "1.1.1", 3, &[0]), 1.0);
        assert_eq!(f.admit(mk(1, "1.1.1", 3, &[0]), 5.0).outcome, Admission::Duplicate);
        assert_eq!(f.received(BlockId(1)), 1.0);
    }

    #[test]
    fn coincident_with_one_invalid_predecessor_is_rejected() {
        let mut f = full_forest();
        let mut bad = mk(1, "1.1.1", 3, &[0]);
        bad.malformed = true;
        assert_eq!(f.admit(bad, 1.0).outcome, Admission::Rejected(InvalidReason::Malformed));
        f.admit(mk(2, "1.1.1", 2, &[0, 0]), 2.0);
        // order-2 predecessor valid, order-3 predecessor invalid
        let r = f.admit(mk(3, "1.1.1", 2, &[2, 1]), 3.0);
        assert_eq!(r.outcome, Admission::Rejected(InvalidReason::InvalidPredecessor));
        assert!(!f.is_valid(BlockId(3)));
    }

    #[test]
    fn orphans_of_invalid_blocks_are_rejected() {
        let mut f = full_forest();
        f.admit(mk(2, "1.1.1", 3, &[1]), 1.0);
        let mut bad = mk(1, "1.1.1", 3, &[0]);
        bad.malformed = true;
        let r = f.admit(bad, 2.0);
        assert_eq!(r.rejected, vec![BlockId(2)]);
        assert_eq!(f.orphan_count(), 0);
    }

    #[test]
    fn inconsistent_coincident_links_are_rejected() {
        let mut f = full_forest();
        // C is an order-2 coincident on {1,1}; A extends {1,1,1} without it.
        f.admit(mk(1, "1.1.1", 2, &[0, 0]), 1.0);
        f.admit(mk(2, "1.1.1", 3, &[0]), 2.0);
        // New coincident whose {1,1} ancestry contains C but whose {1,1,1}
        // ancestry does not.
        let r = f.admit(mk(3, "1.1.1", 2, &[1, 2]), 3.0);
        assert_eq!(r.outcome, Admission::Rejected(InvalidReason::InconsistentCoincidence));
        let r = f.admit(mk(4, "1.1.1", 2, &[1, 1]), 4.0);
        assert_eq!(r.outcome, Admission::Admitted);
    }

    #[test]
    fn untracked_predecessors_are_not_required() {
        let mut f = BlockForest::new(3, [p("1.1.1")]);
        // root block mined on another branch: its {1,2} and {1,2,2}
        // predecessors are unknown here but irrelevant
        let r = f.admit(mk(5, "1.2.2", 1, &[0, 77, 78]), 1.0);
        assert_eq!(r.outcome, Admission::Admitted);
        let r = f.admit(mk(6, "1.2.2", 3, &[78]), 1.0);
        assert_eq!(r.outcome, Admission::Irrelevant);
    }

    #[test]
    fn invalidation_propagates_and_refreshes_best() {
        let mut f = full_forest();
        f.admit(mk(1, "1.1.1", 3, &[0]), 1.0);
        f.admit(mk(2, "1.1.1", 3, &[1]), 2.0);
        f.admit(mk(3, "1.1.1", 3, &[0]), 3.0);
        let c = p("1.1.1");
        assert_eq!(f.best_tip(&c, BlockId::GENESIS), BlockId(2));
        let changed = f.mark_invalid(BlockId(1), InvalidReason::InvalidTransaction);
        assert_eq!(changed, vec![BlockId(1), BlockId(2)]);
        assert_eq!(f.best_tip(&c, BlockId::GENESIS), BlockId(3));
    }

    #[test]
    fn ordering_from_headers() {
        let mut f = BlockForest::new(3, [p("1.1")]);
        // B4 references B3 at order 3, which this replica never stores
        f.admit(mk(2, "1.1.1", 2, &[0, 1]), 1.0);
        f.admit(mk(4, "1.1.1", 1, &[0, 2, 3]), 2.0);
        assert!(f.ordered_before(BlockId(3), BlockId(4)));
        assert!(f.ordered_before(BlockId(2), BlockId(4)));
        assert!(!f.ordered_before(BlockId(4), BlockId(2)));
    }
}
