//! Hierarchical longest chain rule.
//!
//! The root chain is the heaviest valid path from genesis. Every other chain
//! is the heaviest valid path that contains exactly the coincident blocks it
//! shares with its parent's canonical chain. With the forest's coincidence
//! consistency check, those paths are precisely the ones whose latest
//! parent-coincident block is the newest member of the child found in the
//! parent's canonical chain, so selection reduces to a bucket lookup.
//!
//! Chains are evaluated top-down so each child sees its parent's fresh
//! canonical chain.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::consensus::{BlockForest, BlockId};
use crate::hierarchy::ChainPath;

/// Change to one chain's canonical list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReorgPlan {
    pub chain: ChainPath,
    /// Blocks leaving the canonical chain, tip first.
    pub revert: Vec<BlockId>,
    /// Blocks joining it, oldest first.
    pub apply: Vec<BlockId>,
}

impl ReorgPlan {
    pub fn is_extension(&self) -> bool {
        self.revert.is_empty()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
struct ChainView {
    blocks: Vec<BlockId>,
    pos: HashMap<BlockId, usize>,
}

impl ChainView {
    fn genesis() -> Self {
        ChainView { blocks: vec![BlockId::GENESIS], pos: HashMap::from([(BlockId::GENESIS, 0)]) }
    }

    fn truncate(&mut self, len: usize) {
        for id in self.blocks.drain(len..) {
            self.pos.remove(&id);
        }
    }

    fn push(&mut self, id: BlockId) {
        self.pos.insert(id, self.blocks.len());
        self.blocks.push(id);
    }
}

/// Canonical chain of every tracked chain, genesis first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CanonicalView {
    order: Vec<ChainPath>,
    chains: HashMap<ChainPath, ChainView>,
}

impl CanonicalView {
    /// Every chain tracked by `forest` at genesis.
    pub fn new(forest: &BlockForest) -> Self {
        let order = forest.tracked().to_vec();
        let chains = order.iter().map(|c| (*c, ChainView::genesis())).collect();
        CanonicalView { order, chains }
    }

    /// Chains in top-down evaluation order.
    pub fn chains(&self) -> &[ChainPath] {
        &self.order
    }

    fn view(&self, chain: &ChainPath) -> &ChainView {
        self.chains.get(chain).unwrap_or_else(|| panic!("chain {chain} not tracked"))
    }

    pub fn tip(&self, chain: &ChainPath) -> BlockId {
        *self.view(chain).blocks.last().expect("genesis is always present")
    }

    pub fn canonical(&self, chain: &ChainPath) -> &[BlockId] {
        &self.view(chain).blocks
    }

    pub fn contains(&self, chain: &ChainPath, id: BlockId) -> bool {
        self.chains.get(chain).is_some_and(|v| v.pos.contains_key(&id))
    }

    pub fn position(&self, chain: &ChainPath, id: BlockId) -> Option<usize> {
        self.chains.get(chain).and_then(|v| v.pos.get(&id).copied())
    }

    pub fn apply_plan(&mut self, plan: &ReorgPlan) {
        let v = self.chains.get_mut(&plan.chain).expect("plan for tracked chain");
        let keep = v.blocks.len() - plan.revert.len();
        v.truncate(keep);
        for &id in &plan.apply {
            v.push(id);
        }
    }

    /// Reverses `plans` (as returned by [`recompute_view`]).
    pub fn undo(&mut self, plans: &[ReorgPlan]) {
        for plan in plans.iter().rev() {
            let v = self.chains.get_mut(&plan.chain).expect("plan for tracked chain");
            let keep = v.blocks.len() - plan.apply.len();
            v.truncate(keep);
            for &id in plan.revert.iter().rev() {
                v.push(id);
            }
        }
    }
}

/// Canonical chain of the root.
pub fn select_canonical_root(forest: &BlockForest) -> Vec<BlockId> {
    forest.ancestry(root_tip(forest), &ChainPath::ROOT)
}

/// Canonical chain of `chain` given its parent's canonical chain.
pub fn select_canonical_child(forest: &BlockForest, chain: &ChainPath, parent_canonical: &[BlockId]) -> Vec<BlockId> {
    let parent_tip = *parent_canonical.last().expect("canonical chains start at genesis");
    forest.ancestry(child_tip(forest, chain, parent_tip), chain)
}

fn root_tip(forest: &BlockForest) -> BlockId {
    forest.best_tip(&ChainPath::ROOT, BlockId::GENESIS)
}

fn child_tip(forest: &BlockForest, chain: &ChainPath, parent_tip: BlockId) -> BlockId {
    let anchor = forest.lcc(parent_tip, chain);
    forest.best_tip(chain, anchor)
}

/// Brings `view` up to date with `forest`, returning one plan per changed
/// chain, parents before children.
pub fn recompute_view(forest: &BlockForest, view: &mut CanonicalView) -> Vec<ReorgPlan> {
    let mut plans = Vec::new();
    for i in 0..view.order.len() {
        let chain = view.order[i];
        let tip = if chain.is_root() {
            root_tip(forest)
        } else {
            let parent = chain.parent().expect("non-root");
            child_tip(forest, &chain, view.tip(&parent))
        };
        let v = view.chains.get_mut(&chain).expect("tracked");
        if *v.blocks.last().expect("non-empty") == tip {
            continue;
        }
        let mut apply = Vec::new();
        let mut cur = tip;
        let fork = loop {
            if let Some(&p) = v.pos.get(&cur) {
                break p;
            }
            apply.push(cur);
            cur = forest.pred_in(cur, &chain).expect("paths reach genesis");
        };
        apply.reverse();
        let revert: Vec<BlockId> = v.blocks[fork + 1..].iter().rev().copied().collect();
        let plan = ReorgPlan { chain, revert, apply };
        let keep = fork + 1;
        v.truncate(keep);
        for &id in &plan.apply {
            v.push(id);
        }
        plans.push(plan);
    }
    plans
}

/// Pure form of [`recompute_view`].
pub fn recompute(forest: &BlockForest, old: &CanonicalView) -> (CanonicalView, Vec<ReorgPlan>) {
    let mut view = old.clone();
    let plans = recompute_view(forest, &mut view);
    (view, plans)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::consensus::Block;
    use crate::hierarchy::HierarchyConfig;

    fn p(s: &str) -> ChainPath {
        s.parse().unwrap()
    }

    fn mk(id: u64, leaf: &str, achieved: usize, preds: &[u64]) -> Block {
        Block {
            id: BlockId(id),
            leaf: p(leaf),
            achieved_order: achieved,
            predecessors: preds.iter().map(|&x| BlockId(x)).collect(),
            bodies: vec![Vec::new(); preds.len()],
            rollup: Vec::new(),
            found_time: 0.0,
            miner: 0,
            malformed: false,
        }
    }

    fn ids(v: &[u64]) -> Vec<BlockId> {
        v.iter().map(|&x| BlockId(x)).collect()
    }

    #[test]
    fn linear_root_chain() {
        let mut f = BlockForest::new(1, [ChainPath::ROOT]);
        for i in 1..=5 {
            f.admit(mk(i, "1", 1, &[i - 1]), i as f64);
        }
        assert_eq!(select_canonical_root(&f), ids(&[0, 1, 2, 3, 4, 5]));
    }

    #[test]
    fn heavier_fork_wins_then_earliest_received() {
        let mut f = BlockForest::new(1, [ChainPath::ROOT]);
        f.admit(mk(1, "1", 1, &[0]), 1.0);
        f.admit(mk(2, "1", 1, &[1]), 2.0);
        f.admit(mk(3, "1", 1, &[2]), 3.0);
        f.admit(mk(11, "1", 1, &[0]), 1.5);
        f.admit(mk(12, "1", 1, &[11]), 2.5);
        assert_eq!(select_canonical_root(&f), ids(&[0, 1, 2, 3]));
        // equal height: earlier received tip wins even with a larger id
        f.admit(mk(13, "1", 1, &[12]), 2.9);
        assert_eq!(select_canonical_root(&f), ids(&[0, 11, 12, 13]));
    }

    #[test]
    fn child_keeps_parent_canonical_coincident() {
        let mut f = BlockForest::new(2, HierarchyConfig::new(vec![1]).unwrap().chains());
        let child = p("1.1");
        // fork A: four child-only blocks
        for i in 1..=4 {
            f.admit(mk(i, "1.1", 2, &[i - 1]), i as f64);
        }
        // fork B: the coincident C plus one block on top
        f.admit(mk(10, "1.1", 1, &[0, 0]), 10.0);
        f.admit(mk(11, "1.1", 2, &[10]), 11.0);
        let root = select_canonical_root(&f);
        assert_eq!(root, ids(&[0, 10]));
        assert_eq!(select_canonical_child(&f, &child, &root), ids(&[0, 10, 11]));
    }

    #[test]
    fn without_coincidents_child_is_plain_longest_chain() {
        let mut f = BlockForest::new(2, HierarchyConfig::new(vec![2]).unwrap().chains());
        f.admit(mk(1, "1.2", 2, &[0]), 1.0);
        f.admit(mk(2, "1.2", 2, &[1]), 2.0);
        f.admit(mk(3, "1.2", 2, &[0]), 3.0);
        let root = select_canonical_root(&f);
        assert_eq!(select_canonical_child(&f, &p("1.2"), &root), ids(&[0, 1, 2]));
        assert_eq!(select_canonical_child(&f, &p("1.1"), &root), ids(&[0]));
    }

    #[test]
    fn parent_reorg_cascades_and_plans_are_ordered() {
        let mut f = BlockForest::new(2, HierarchyConfig::new(vec![1]).unwrap().chains());
        let child = p("1.1");
        let mut view = CanonicalView::new(&f);
        f.admit(mk(10, "1.1", 1, &[0, 0]), 1.0);
        f.admit(mk(11, "1.1", 2, &[10]), 2.0);
        let plans = recompute_view(&f, &mut view);
        assert_eq!(plans.len(), 2);
        assert_eq!(plans[0].chain, ChainPath::ROOT);
        assert_eq!(view.canonical(&child), ids(&[0, 10, 11]));

        // a longer competing root fork whose coincidents do not include 10
        f.admit(mk(20, "1.1", 1, &[0, 0]), 3.0);
        f.admit(mk(21, "1.1", 1, &[20, 20]), 4.0);
        let before = view.clone();
        let plans = recompute_view(&f, &mut view);
        assert_eq!(plans[0], ReorgPlan { chain: ChainPath::ROOT, revert: ids(&[10]), apply: ids(&[20, 21]) });
        assert_eq!(plans[1], ReorgPlan { chain: child, revert: ids(&[11, 10]), apply: ids(&[20, 21]) });
        let mut undone = view.clone();
        undone.undo(&plans);
        assert_eq!(undone, before);

        // a block for the losing fork changes nothing
        f.admit(mk(12, "1.1", 2, &[11]), 5.0);
        assert!(recompute_view(&f, &mut view).is_empty());
    }

    #[test]
    fn leaf_extension_is_a_single_apply() {
        let mut f = BlockForest::new(3, HierarchyConfig::new(vec![2, 2]).unwrap().chains());
        let mut view = CanonicalView::new(&f);
        f.admit(mk(1, "1.2.1", 3, &[0]), 1.0);
        let plans = recompute_view(&f, &mut view);
        assert_eq!(plans, vec![ReorgPlan { chain: p("1.2.1"), revert: vec![], apply: ids(&[1]) }]);
    }
}
