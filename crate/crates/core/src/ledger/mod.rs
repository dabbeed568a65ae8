//! Partitioned asset-ownership state and cross-chain settlement.

mod check;
mod settlement;
mod state;
mod types;

pub use check::{check_conservation, check_state_consistency, ConservationViolation, Divergence};
pub use settlement::{settlement_condition_for, SettlementCondition, SettlementError};
pub use state::{
    validate_transaction, GenesisAsset, InvalidTransaction, Ledger, PartitionState, PendingInbound, PlanFailure,
    StateDelta, TxRejection,
};
pub use types::{AccountId, AssetId, InboundEntry, Transaction, TxId};
