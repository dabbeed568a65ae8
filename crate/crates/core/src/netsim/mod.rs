//! Gossip overlays, link delays and sub-network partitioning.

mod delay;
mod graph;
mod partition;
mod propagate;

use thiserror::Error;

pub use delay::{latent_positions, DelayModel, DelaySampler};
pub use graph::{generate_overlay, generate_overlay_on, OverlayGraph, MAX_ATTEMPTS};
pub use partition::{partition_network, PartitionPolicy, SubnetworkAssignment};
pub use propagate::{broadcast_delay, propagate};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NetError {
    #[error("no {d}-regular graph on {n} nodes (need 0 < d < n and n*d even)")]
    InfeasibleDegree { n: usize, d: usize },
    #[error("no connected {d}-regular graph on {n} nodes after {attempts} attempts")]
    GenerationFailed { n: usize, d: usize, attempts: usize },
    #[error("invalid delay model: {0}")]
    BadDelayModel(String),
    #[error("delay model or partition policy needs node positions")]
    MissingPositions,
    #[error("{nodes} nodes cannot populate {leaves} leaf sub-networks")]
    TooFewNodes { nodes: usize, leaves: usize },
}

/// Largest degree not above `d` that admits a regular graph on `n` nodes.
pub fn feasible_degree(n: usize, d: usize) -> usize {
    if n <= 1 {
        return 0;
    }
    let mut k = d.min(n - 1);
    if (n * k) % 2 == 1 {
        k -= 1;
    }
    k
}
