//! One node's view: block store, canonical chains and partition states.

use std::sync::Arc;

use crate::consensus::{Admission, Block, BlockForest, BlockId, InvalidReason};
use crate::hierarchy::{ChainPath, HierarchyConfig};
use crate::hlcr::{recompute_view, CanonicalView, ReorgPlan};
use crate::ledger::{GenesisAsset, InvalidTransaction, Ledger, StateDelta};

/// Outcome of handing one block to a replica.
#[derive(Debug, Clone, PartialEq)]
pub struct Receipt {
    pub admission: Admission,
    /// Reorg plans that were applied, parents first.
    pub plans: Vec<ReorgPlan>,
    /// Blocks found to carry an invalid transaction.
    pub invalid: Vec<InvalidTransaction>,
    pub deltas: Vec<StateDelta>,
}

impl Receipt {
    pub fn reverted(&self) -> usize {
        self.plans.iter().map(|p| p.revert.len()).sum()
    }
}

#[derive(Debug, Clone)]
pub struct Replica {
    forest: BlockForest,
    view: CanonicalView,
    ledger: Ledger,
}

impl Replica {
    /// A replica tracking `tracked` and every ancestor chain.
    pub fn new(hierarchy: &HierarchyConfig, tracked: impl IntoIterator<Item = ChainPath>, genesis: &[GenesisAsset]) -> Self {
        let forest = BlockForest::new(hierarchy.num_orders(), tracked);
        let view = CanonicalView::new(&forest);
        let ledger = Ledger::new(hierarchy.clone(), forest.tracked().iter().copied(), genesis);
        Replica { forest, view, ledger }
    }

    /// Tracks the mining slice ending at `leaf`.
    pub fn for_slice(hierarchy: &HierarchyConfig, leaf: ChainPath, genesis: &[GenesisAsset]) -> Self {
        Self::new(hierarchy, [leaf], genesis)
    }

    /// Tracks every chain.
    pub fn full(hierarchy: &HierarchyConfig, genesis: &[GenesisAsset]) -> Self {
        Self::new(hierarchy, hierarchy.chains(), genesis)
    }

    pub fn forest(&self) -> &BlockForest {
        &self.forest
    }

    pub fn view(&self) -> &CanonicalView {
        &self.view
    }

    pub fn ledger(&self) -> &Ledger {
        &self.ledger
    }

    pub fn tracks(&self, chain: &ChainPath) -> bool {
        self.forest.tracks(chain)
    }

    pub fn tip(&self, chain: &ChainPath) -> BlockId {
        self.view.tip(chain)
    }

    /// Admits `block`, recomputes fork choice and moves the partition states
    /// along. Blocks whose body turns out invalid are marked invalid and fork
    /// choice is rerun without them.
    pub fn receive(&mut self, block: Arc<Block>, time: f64) -> Receipt {
        let report = self.forest.admit(block, time);
        let mut receipt = Receipt { admission: report.outcome, plans: Vec::new(), invalid: Vec::new(), deltas: Vec::new() };
        if report.admitted.is_empty() {
            return receipt;
        }
        self.settle(&mut receipt);
        receipt
    }

    /// Marks a stored block invalid (with its descendants) and updates the
    /// view accordingly.
    pub fn invalidate(&mut self, id: BlockId, reason: InvalidReason) -> Receipt {
        let mut receipt = Receipt { admission: Admission::Duplicate, plans: Vec::new(), invalid: Vec::new(), deltas: Vec::new() };
        if self.forest.mark_invalid(id, reason).is_empty() {
            return receipt;
        }
        self.settle(&mut receipt);
        receipt
    }

    fn settle(&mut self, receipt: &mut Receipt) {
        loop {
            let plans = recompute_view(&self.forest, &mut self.view);
            match self.ledger.apply_plans(&self.forest, &plans) {
                Ok(deltas) => {
                    receipt.plans.extend(plans);
                    receipt.deltas.extend(deltas);
                    return;
                }
                Err(failure) => {
                    self.view.undo(&plans);
                    self.forest.mark_invalid(failure.0.block, InvalidReason::InvalidTransaction);
                    receipt.invalid.push(failure.0);
                }
            }
        }
    }
}
