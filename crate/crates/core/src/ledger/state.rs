//! Per-replica partition states with exact apply/revert.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::types::{AccountId, AssetId, InboundEntry, Transaction, TxId};
use crate::consensus::{Block, BlockForest, BlockId};
use crate::hierarchy::{ChainPath, HierarchyConfig};
use crate::hlcr::ReorgPlan;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TxRejection {
    #[error("asset is not in the origin partition")]
    AssetAbsent,
    #[error("sender does not own the asset")]
    WrongOwner,
    #[error("asset already moved earlier in the same body")]
    AssetInFlight,
    #[error("transaction origin is not the chain whose body holds it")]
    WrongPartition,
    #[error("destination is not a chain of this hierarchy")]
    UnknownDestination,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{tx} in block {block} on {chain}: {reason}")]
pub struct InvalidTransaction {
    pub block: BlockId,
    pub chain: ChainPath,
    pub tx: TxId,
    pub reason: TxRejection,
}

/// A transfer already carried into its relay chain, waiting for the next
/// block shared by the destination and the relay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PendingInbound {
    pub relay: ChainPath,
    pub entry: InboundEntry,
}

/// Ownership map of one state partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionState {
    pub chain: ChainPath,
    pub owned_assets: BTreeMap<AssetId, AccountId>,
    pub pending_inbound: Vec<PendingInbound>,
}

impl PartitionState {
    pub fn new(chain: ChainPath) -> Self {
        PartitionState { chain, owned_assets: BTreeMap::new(), pending_inbound: Vec::new() }
    }

    pub fn owner(&self, asset: AssetId) -> Option<AccountId> {
        self.owned_assets.get(&asset).copied()
    }
}

/// Checks `tx` against its origin partition. `touched` holds the assets moved
/// earlier in the same body; an asset moves at most once per body.
pub fn validate_transaction(
    tx: &Transaction,
    origin: &PartitionState,
    touched: &HashSet<AssetId>,
) -> Result<(), TxRejection> {
    if tx.origin != origin.chain {
        return Err(TxRejection::WrongPartition);
    }
    if touched.contains(&tx.asset) {
        return Err(TxRejection::AssetInFlight);
    }
    match origin.owned_assets.get(&tx.asset) {
        None => Err(TxRejection::AssetAbsent),
        Some(owner) if *owner != tx.sender => Err(TxRejection::WrongOwner),
        Some(_) => Ok(()),
    }
}

/// Initial owner of an asset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenesisAsset {
    pub asset: AssetId,
    pub chain: ChainPath,
    pub owner: AccountId,
}

#[derive(Debug, Clone)]
enum Op {
    SetOwner { asset: AssetId, prev: Option<AccountId> },
    InFlight { asset: AssetId, delta: i64 },
    PendingRemoved { index: usize, item: PendingInbound },
    PendingPushed,
    Committed(TxId),
}

/// What applying one block changed on one chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateDelta {
    pub chain: ChainPath,
    pub block: BlockId,
    /// Inbound transfers credited, in application order.
    pub settled: Vec<TxId>,
    /// Outbound transfers debited from the partition.
    pub debited: Vec<TxId>,
    /// Same-chain transfers.
    pub local: Vec<TxId>,
}

/// One step of [`Ledger::apply_plans`] that failed.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error(transparent)]
pub struct PlanFailure(#[from] pub InvalidTransaction);

/// Partition states of every chain a replica tracks.
#[derive(Debug, Clone)]
pub struct Ledger {
    hierarchy: HierarchyConfig,
    states: BTreeMap<ChainPath, PartitionState>,
    in_flight: BTreeMap<AssetId, i64>,
    undo: HashMap<(ChainPath, BlockId), Vec<Op>>,
    committed: HashMap<TxId, u32>,
}

impl Ledger {
    pub fn new(hierarchy: HierarchyConfig, chains: impl IntoIterator<Item = ChainPath>, genesis: &[GenesisAsset]) -> Self {
        let mut states: BTreeMap<ChainPath, PartitionState> =
            chains.into_iter().map(|c| (c, PartitionState::new(c))).collect();
        for g in genesis {
            if let Some(s) = states.get_mut(&g.chain) {
                s.owned_assets.insert(g.asset, g.owner);
            }
        }
        Ledger { hierarchy, states, in_flight: BTreeMap::new(), undo: HashMap::new(), committed: HashMap::new() }
    }

    pub fn hierarchy(&self) -> &HierarchyConfig {
        &self.hierarchy
    }

    pub fn state(&self, chain: &ChainPath) -> Option<&PartitionState> {
        self.states.get(chain)
    }

    pub fn states(&self) -> impl Iterator<Item = &PartitionState> {
        self.states.values()
    }

    /// Net count of debited-but-uncredited transfers per asset.
    pub fn in_flight(&self) -> &BTreeMap<AssetId, i64> {
        &self.in_flight
    }

    /// `true` if `tx` sits in some applied canonical body.
    pub fn is_committed(&self, tx: TxId) -> bool {
        self.committed.contains_key(&tx)
    }

    pub fn is_applied(&self, chain: &ChainPath, block: BlockId) -> bool {
        self.undo.contains_key(&(*chain, block))
    }

    /// Appends `block` to the canonical chain of `chain`: first settles the
    /// inbound transfers it completes, in settlement order, then applies its
    /// body for `chain`. Atomic: on an invalid transaction nothing changes.
    pub fn apply_block(
        &mut self,
        forest: &BlockForest,
        chain: &ChainPath,
        id: BlockId,
    ) -> Result<StateDelta, InvalidTransaction> {
        let block = forest.get(id).expect("applied block is stored");
        let mut ops = Vec::new();
        let mut delta = StateDelta { chain: *chain, block: id, settled: Vec::new(), debited: Vec::new(), local: Vec::new() };
        let credits = self.collect_settlement(forest, chain, block, &mut ops);
        for e in &credits {
            let state = self.states.get_mut(chain).expect("tracked chain");
            let prev = state.owned_assets.insert(e.tx.asset, e.tx.new_owner);
            ops.push(Op::SetOwner { asset: e.tx.asset, prev });
            *self.in_flight.entry(e.tx.asset).or_default() -= 1;
            ops.push(Op::InFlight { asset: e.tx.asset, delta: -1 });
            delta.settled.push(e.tx.id);
        }
        let mut touched = HashSet::new();
        for tx in block.body_at(chain.order()) {
            let state = self.states.get_mut(chain).expect("tracked chain");
            let check = validate_transaction(tx, state, &touched).and_then(|_| {
                self.hierarchy.validate(&tx.destination).map_err(|_| TxRejection::UnknownDestination)
            });
            if let Err(reason) = check {
                self.rollback(chain, ops);
                return Err(InvalidTransaction { block: id, chain: *chain, tx: tx.id, reason });
            }
            touched.insert(tx.asset);
            *self.committed.entry(tx.id).or_default() += 1;
            ops.push(Op::Committed(tx.id));
            if tx.is_cross_chain() {
                let prev = state.owned_assets.remove(&tx.asset);
                ops.push(Op::SetOwner { asset: tx.asset, prev });
                *self.in_flight.entry(tx.asset).or_default() += 1;
                ops.push(Op::InFlight { asset: tx.asset, delta: 1 });
                delta.debited.push(tx.id);
            } else {
                let prev = state.owned_assets.insert(tx.asset, tx.new_owner);
                ops.push(Op::SetOwner { asset: tx.asset, prev });
                delta.local.push(tx.id);
            }
        }
        self.undo.insert((*chain, id), ops);
        Ok(delta)
    }

    /// Gathers the credits `block` completes on `chain` and queues the
    /// transfers it starts waiting for a later shared block.
    fn collect_settlement(
        &mut self,
        forest: &BlockForest,
        chain: &ChainPath,
        block: &Block,
        ops: &mut Vec<Op>,
    ) -> Vec<InboundEntry> {
        let mut credits: Vec<InboundEntry> = Vec::new();
        if block.is_genesis() {
            return credits;
        }
        let height = forest.height(block.id, chain);
        credits.extend(block.carried_into(chain, height).filter(|e| e.tx.destination == *chain));
        let mut pushes: Vec<PendingInbound> = Vec::new();
        for order in block.achieved_order..chain.order() {
            let relay = chain.ancestor_at(order).expect("order below chain");
            // transfers queued at the previous block shared with this relay
            let state = self.states.get_mut(chain).expect("tracked chain");
            let mut i = state.pending_inbound.len();
            let mut released = Vec::new();
            while i > 0 {
                i -= 1;
                if state.pending_inbound[i].relay == relay {
                    let item = state.pending_inbound.remove(i);
                    released.push(item.entry.clone());
                    ops.push(Op::PendingRemoved { index: i, item });
                }
            }
            credits.extend(released);
            // transfers carried into the relay since then
            let mut cur = block.predecessor_at(order).expect("member of relay");
            while cur != BlockId::GENESIS {
                let y = forest.get(cur).expect("ancestry is stored");
                if y.is_member(chain) {
                    break;
                }
                let h = forest.height(cur, &relay);
                credits.extend(y.carried_into(&relay, h).filter(|e| e.tx.destination == *chain));
                cur = y.predecessor_at(order).expect("non-genesis");
            }
            let h = forest.height(block.id, &relay);
            pushes.extend(
                block
                    .carried_into(&relay, h)
                    .filter(|e| e.tx.destination == *chain)
                    .map(|entry| PendingInbound { relay, entry }),
            );
        }
        credits.sort_by_key(|c| c.settlement_key());
        let state = self.states.get_mut(chain).expect("tracked chain");
        for p in pushes {
            state.pending_inbound.push(p);
            ops.push(Op::PendingPushed);
        }
        credits
    }

    fn rollback(&mut self, chain: &ChainPath, ops: Vec<Op>) {
        let state = self.states.get_mut(chain).expect("tracked chain");
        for op in ops.into_iter().rev() {
            match op {
                Op::SetOwner { asset, prev } => {
                    match prev {
                        Some(owner) => state.owned_assets.insert(asset, owner),
                        None => state.owned_assets.remove(&asset),
                    };
                }
                Op::InFlight { asset, delta } => {
                    let n = self.in_flight.entry(asset).or_default();
                    *n -= delta;
                    if *n == 0 {
                        self.in_flight.remove(&asset);
                    }
                }
                Op::PendingRemoved { index, item } => state.pending_inbound.insert(index, item),
                Op::PendingPushed => {
                    state.pending_inbound.pop();
                }
                Op::Committed(tx) => {
                    if let Some(n) = self.committed.get_mut(&tx) {
                        *n -= 1;
                        if *n == 0 {
                            self.committed.remove(&tx);
                        }
                    }
                }
            }
        }
    }

    /// Exact inverse of [`Ledger::apply_block`]. The block must be the tip of
    /// `chain` as last applied.
    pub fn revert_block(&mut self, chain: &ChainPath, id: BlockId) {
        let ops = self
            .undo
            .remove(&(*chain, id))
            .unwrap_or_else(|| panic!("revert of unapplied block {id} on {chain}"));
        self.rollback(chain, ops);
        self.in_flight.retain(|_, n| *n != 0);
    }

    /// Runs reorg plans in order. On an invalid transaction every step taken
    /// so far is undone before the error is returned.
    pub fn apply_plans(&mut self, forest: &BlockForest, plans: &[ReorgPlan]) -> Result<Vec<StateDelta>, PlanFailure> {
        let mut done: Vec<(ChainPath, BlockId, bool)> = Vec::new();
        let mut deltas = Vec::new();
        for plan in plans {
            if !self.states.contains_key(&plan.chain) {
                continue;
            }
            for &id in &plan.revert {
                self.revert_block(&plan.chain, id);
                done.push((plan.chain, id, false));
            }
            for &id in &plan.apply {
                match self.apply_block(forest, &plan.chain, id) {
                    Ok(d) => {
                        deltas.push(d);
                        done.push((plan.chain, id, true));
                    }
                    Err(e) => {
                        for (chain, bid, applied) in done.into_iter().rev() {
                            if applied {
                                self.revert_block(&chain, bid);
                            } else {
                                self.apply_block(forest, &chain, bid).expect("re-applying a previously valid block");
                            }
                        }
                        return Err(PlanFailure(e));
                    }
                }
            }
        }
        Ok(deltas)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> ChainPath {
        s.parse().unwrap()
    }

    fn state(chain: &str, assets: &[(u64, u32)]) -> PartitionState {
        let mut s = PartitionState::new(p(chain));
        for &(a, o) in assets {
            s.owned_assets.insert(AssetId(a), AccountId(o));
        }
        s
    }

    fn tx(asset: u64, sender: u32, o: &str, d: &str) -> Transaction {
        Transaction {
            id: TxId(asset * 100 + sender as u64),
            origin: p(o),
            destination: p(d),
            asset: AssetId(asset),
            sender: AccountId(sender),
            new_owner: AccountId(sender + 1),
            injected_time: 0.0,
        }
    }

    #[test]
    fn owner_may_spend() {
        let s = state("1.1", &[(1, 7)]);
        assert_eq!(validate_transaction(&tx(1, 7, "1.1", "1.1"), &s, &HashSet::new()), Ok(()));
    }

    #[test]
    fn asset_elsewhere_is_absent() {
        let s = state("1.1", &[(1, 7)]);
        let t = tx(2, 7, "1.1", "1.2");
        assert_eq!(validate_transaction(&t, &s, &HashSet::new()), Err(TxRejection::AssetAbsent));
        assert_eq!(
            validate_transaction(&tx(1, 8, "1.1", "1.1"), &s, &HashSet::new()),
            Err(TxRejection::WrongOwner)
        );
        assert_eq!(
            validate_transaction(&tx(1, 7, "1.2", "1.1"), &s, &HashSet::new()),
            Err(TxRejection::WrongPartition)
        );
    }

    #[test]
    fn second_spend_in_body_is_in_flight() {
        let s = state("1.1", &[(1, 7)]);
        let touched = HashSet::from([AssetId(1)]);
        assert_eq!(validate_transaction(&tx(1, 7, "1.1", "1.2"), &s, &touched), Err(TxRejection::AssetInFlight));
    }
}
