//! Protocol library and deterministic simulator for a hierarchy of
//! merged-mined proof-of-work blockchains.

// `!(x > 0.0)` is used on purpose so NaN parameters are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytics;
pub mod consensus;
pub mod hierarchy;
pub mod hlcr;
pub mod ledger;
pub mod netsim;
pub mod scenario;
pub mod sim;
#[cfg(any(test, feature = "testkit"))]
pub mod testkit;

pub use consensus::{Block, BlockForest, BlockId, DifficultySchedule};
pub use hierarchy::{ChainPath, HierarchyConfig};
