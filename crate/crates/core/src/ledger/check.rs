//! Cross-replica consistency and per-replica conservation checks.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::state::{Ledger, PartitionState};
use super::types::{AccountId, AssetId};
use crate::hierarchy::ChainPath;

/// First difference between two replicas' views of one partition.
#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
pub enum Divergence {
    #[error("{chain}: {asset} owned by {left:?} vs {right:?}")]
    Owner { chain: ChainPath, asset: AssetId, left: Option<AccountId>, right: Option<AccountId> },
    #[error("{chain}: pending inbound queues differ at position {position}")]
    Pending { chain: ChainPath, position: usize },
    #[error("comparing different partitions {left} and {right}")]
    DifferentChains { left: ChainPath, right: ChainPath },
}

/// Deep comparison of two replicas' partition for the same chain. Callers
/// only compare replicas whose canonical chains for it are identical.
pub fn check_state_consistency(a: &PartitionState, b: &PartitionState) -> Result<(), Divergence> {
    if a.chain != b.chain {
        return Err(Divergence::DifferentChains { left: a.chain, right: b.chain });
    }
    let assets = a.owned_assets.keys().chain(b.owned_assets.keys());
    let mut first: Option<AssetId> = None;
    for asset in assets {
        if a.owner(*asset) != b.owner(*asset) && first.is_none_or(|f| *asset < f) {
            first = Some(*asset);
        }
    }
    if let Some(asset) = first {
        return Err(Divergence::Owner { chain: a.chain, asset, left: a.owner(asset), right: b.owner(asset) });
    }
    let n = a.pending_inbound.len().max(b.pending_inbound.len());
    if let Some(position) = (0..n).find(|&i| a.pending_inbound.get(i) != b.pending_inbound.get(i)) {
        return Err(Divergence::Pending { chain: a.chain, position });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[error("{asset} is held {count} times (partitions {holders:?}, in flight {in_flight})")]
pub struct ConservationViolation {
    pub asset: AssetId,
    pub count: i64,
    pub holders: Vec<ChainPath>,
    pub in_flight: i64,
}

/// Every asset in `universe` must sit in exactly one partition or be in
/// flight exactly once. Only meaningful for replicas tracking every chain.
pub fn check_conservation(
    ledger: &Ledger,
    universe: impl IntoIterator<Item = AssetId>,
) -> Result<(), ConservationViolation> {
    let mut holders: BTreeMap<AssetId, Vec<ChainPath>> = BTreeMap::new();
    for s in ledger.states() {
        for asset in s.owned_assets.keys() {
            holders.entry(*asset).or_default().push(s.chain);
        }
    }
    let mut all: Vec<AssetId> = universe.into_iter().collect();
    all.extend(holders.keys().copied());
    all.extend(ledger.in_flight().keys().copied());
    all.sort();
    all.dedup();
    for asset in all {
        let h = holders.remove(&asset).unwrap_or_default();
        let in_flight = ledger.in_flight().get(&asset).copied().unwrap_or(0);
        let count = h.len() as i64 + in_flight;
        if count != 1 {
            return Err(ConservationViolation { asset, count, holders: h, in_flight });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reports_first_differing_asset() {
        let chain: ChainPath = "1.2".parse().unwrap();
        let mut a = PartitionState::new(chain);
        let mut b = PartitionState::new(chain);
        for s in [&mut a, &mut b] {
            s.owned_assets.insert(AssetId(1), AccountId(1));
        }
        assert_eq!(check_state_consistency(&a, &b), Ok(()));
        a.owned_assets.insert(AssetId(5), AccountId(2));
        b.owned_assets.insert(AssetId(3), AccountId(9));
        assert_eq!(
            check_state_consistency(&a, &b),
            Err(Divergence::Owner { chain, asset: AssetId(3), left: None, right: Some(AccountId(9)) })
        );
    }
}
