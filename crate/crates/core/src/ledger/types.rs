use std::fmt;

use serde::{Deserialize, Serialize};

use crate::hierarchy::ChainPath;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AssetId(pub u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AccountId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TxId(pub u64);

impl fmt::Display for AssetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "asset#{}", self.0)
    }
}

impl fmt::Display for AccountId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "acct#{}", self.0)
    }
}

impl fmt::Display for TxId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "tx#{}", self.0)
    }
}

/// Transfer of one asset to a new owner, possibly into another partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transaction {
    pub id: TxId,
    pub origin: ChainPath,
    pub destination: ChainPath,
    pub asset: AssetId,
    pub sender: AccountId,
    pub new_owner: AccountId,
    pub injected_time: f64,
}

impl Transaction {
    pub fn is_cross_chain(&self) -> bool {
        self.origin != self.destination
    }

    /// Relay chain for settlement: the deepest chain on both paths.
    pub fn ancestor(&self) -> ChainPath {
        self.origin.common_ancestor(&self.destination)
    }
}

/// A cross-chain transfer together with where it was committed at its
/// origin. The commit position fixes the settlement order at the destination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InboundEntry {
    pub tx: Transaction,
    /// Height of the committing block in the origin chain.
    pub origin_height: u64,
    /// Position of the transaction inside that block's body.
    pub index: u32,
}

impl InboundEntry {
    /// Settlement order: deeper origins first, then left to right, then by
    /// inclusion order within the origin chain.
    pub fn settlement_key(&self) -> (std::cmp::Reverse<usize>, ChainPath, u64, u32) {
        (
            std::cmp::Reverse(self.tx.origin.order()),
            self.tx.origin,
            self.origin_height,
            self.index,
        )
    }
}
