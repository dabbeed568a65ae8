//! Discrete-event simulation of a hierarchy of chains over a gossip network.

mod adversary;
pub mod config;
mod engine;
pub mod event;
pub mod replica;
pub mod trace;
pub mod workload;

pub use adversary::Adversary;
pub use config::{
    AdversaryConfig, CheckConfig, ConfigError, DifficultySpec, MinerSpec, NetworkConfig, ObserverConfig, RateSpec,
    SimConfig, WorkloadConfig,
};
pub use engine::{coupling_violation, run, SimError, Simulation};
pub use replica::{Receipt, Replica};
pub use trace::{BlockRecord, CheckReport, DivergenceRecord, Trace, TraceEvent, TxRecord, ViolationRecord};
