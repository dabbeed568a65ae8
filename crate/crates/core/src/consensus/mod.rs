//! Blocks, difficulty classification and the per-replica block store.

pub mod block;
pub mod difficulty;
pub mod forest;

pub use block::{Block, BlockId};
pub use difficulty::{
    classify_order, coincidence_probability, work_sample_from_hash, DifficultyError, DifficultySchedule,
};
pub use forest::{AdmitReport, Admission, BlockForest, InvalidReason};
