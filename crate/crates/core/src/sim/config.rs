use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::consensus::{DifficultyError, DifficultySchedule};
use crate::hierarchy::{ChainPath, HierarchyConfig, HierarchyError};
use crate::netsim::{DelayModel, NetError, PartitionPolicy};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error(transparent)]
    Hierarchy(#[from] HierarchyError),
    #[error(transparent)]
    Difficulty(#[from] DifficultyError),
    #[error(transparent)]
    Network(#[from] NetError),
    #[error("{0}")]
    Invalid(String),
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError::Invalid(msg.into()))
}

/// Thresholds as probabilities or as leading zero bits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DifficultySpec {
    Thresholds { thresholds: Vec<f64> },
    LeadingZeroBits { leading_zero_bits: Vec<u32> },
}

impl DifficultySpec {
    pub fn schedule(&self) -> Result<DifficultySchedule, DifficultyError> {
        match self {
            DifficultySpec::Thresholds { thresholds } => DifficultySchedule::new(thresholds.clone()),
            DifficultySpec::LeadingZeroBits { leading_zero_bits } => {
                DifficultySchedule::from_leading_zero_bits(leading_zero_bits)
            }
        }
    }
}

/// Network-wide block rates. Either every order's rate (which must follow the
/// threshold ratios) or just the root's.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RateSpec {
    PerOrder(Vec<f64>),
    Root { root: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub nodes: usize,
    pub degree: usize,
    pub delay: DelayModel,
    #[serde(default)]
    pub partition: PartitionPolicy,
}

/// Hash-power split among the mining nodes.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MinerSpec {
    #[default]
    Uniform,
    Weights(Vec<f64>),
}

/// Non-mining replicas that track every chain.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ObserverConfig {
    #[serde(default)]
    pub count: usize,
    /// Observers receive each block this long after it is found.
    #[serde(default)]
    pub delay: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdversaryConfig {
    /// Fraction of total hash power.
    pub share: f64,
    /// Chain the private fork is mined on.
    #[serde(default = "root")]
    pub target: ChainPath,
}

fn root() -> ChainPath {
    ChainPath::ROOT
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadConfig {
    /// Transactions injected per time unit.
    pub rate: f64,
    pub assets_per_partition: usize,
    #[serde(default = "default_accounts")]
    pub accounts: u32,
    /// Fraction of transfers that stay inside their chain.
    #[serde(default = "default_same_chain")]
    pub same_chain_fraction: f64,
    /// Fraction of cross-chain transfers sent to a chain on another branch
    /// (neither ancestor nor descendant of the origin).
    #[serde(default = "default_cross_branch")]
    pub cross_branch_fraction: f64,
    /// Delay before an injected transaction is visible to origin miners.
    #[serde(default)]
    pub tx_delay: f64,
    #[serde(default = "default_body_cap")]
    pub max_txs_per_body: usize,
    /// Unconfirmed transactions are dropped from the pool after this long.
    #[serde(default)]
    pub ttl: Option<f64>,
}

fn default_accounts() -> u32 {
    16
}
fn default_same_chain() -> f64 {
    0.3
}
fn default_cross_branch() -> f64 {
    0.5
}
fn default_body_cap() -> usize {
    64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckConfig {
    /// Cross-replica state comparison and conservation checks.
    #[serde(default = "yes")]
    pub enabled: bool,
    /// Time between checkpoints during the run; the drained end state is
    /// always checked.
    #[serde(default)]
    pub interval: Option<f64>,
}

fn yes() -> bool {
    true
}

impl Default for CheckConfig {
    fn default() -> Self {
        CheckConfig { enabled: true, interval: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    #[serde(default)]
    pub seed: u64,
    /// Mining stops at this time; in-flight deliveries are then drained.
    pub duration: f64,
    #[serde(default = "HierarchyConfig::single_chain")]
    pub hierarchy: HierarchyConfig,
    pub difficulty: DifficultySpec,
    pub rates: RateSpec,
    pub network: NetworkConfig,
    #[serde(default)]
    pub miners: MinerSpec,
    #[serde(default)]
    pub observers: ObserverConfig,
    #[serde(default)]
    pub adversary: Option<AdversaryConfig>,
    #[serde(default)]
    pub workload: Option<WorkloadConfig>,
    #[serde(default)]
    pub checks: CheckConfig,
    /// Keep a per-event log in the trace.
    #[serde(default)]
    pub record_events: bool,
}

impl SimConfig {
    /// Network-wide rate per order, `lambda_1..lambda_R`.
    pub fn order_rates(&self) -> Result<Vec<f64>, ConfigError> {
        let schedule = self.difficulty.schedule()?;
        let p = schedule.thresholds();
        match &self.rates {
            RateSpec::Root { root } => Ok(p.iter().map(|pr| root * pr / p[0]).collect()),
            RateSpec::PerOrder(rates) => {
                if rates.len() != p.len() {
                    return invalid(format!("{} rates for {} orders", rates.len(), p.len()));
                }
                let r_leaf = rates[rates.len() - 1];
                for (k, (&rate, &pr)) in rates.iter().zip(p).enumerate() {
                    let expected = r_leaf * pr / p[p.len() - 1];
                    if (rate - expected).abs() > 1e-9 * expected.max(1e-300) {
                        return invalid(format!(
                            "rate of order {} is {rate} but thresholds imply {expected}",
                            k + 1
                        ));
                    }
                }
                Ok(rates.clone())
            }
        }
    }

    /// Rate of mining events network-wide (every found block meets the leaf
    /// threshold).
    pub fn leaf_rate(&self) -> Result<f64, ConfigError> {
        Ok(*self.order_rates()?.last().expect("at least one order"))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let schedule = self.difficulty.schedule()?;
        if schedule.num_orders() != self.hierarchy.num_orders() {
            return invalid(format!(
                "{} difficulty thresholds for {} orders",
                schedule.num_orders(),
                self.hierarchy.num_orders()
            ));
        }
        let rates = self.order_rates()?;
        if rates.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
            return invalid("block rates must be positive");
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return invalid("duration must be positive");
        }
        let n = self.network.nodes;
        if n < self.hierarchy.leaves().len() {
            return Err(NetError::TooFewNodes { nodes: n, leaves: self.hierarchy.leaves().len() }.into());
        }
        self.network.delay.validate()?;
        if self.network.degree == 0 && n > 1 {
            return invalid("degree must be positive");
        }
        if let MinerSpec::Weights(w) = &self.miners {
            if w.len() != n || w.iter().any(|x| !(*x >= 0.0)) || w.iter().sum::<f64>() <= 0.0 {
                return invalid("miner weights need one non-negative value per node and a positive sum");
            }
        }
        if self.observers.delay < 0.0 {
            return invalid("observer delay must be non-negative");
        }
        if let Some(a) = &self.adversary {
            if !(a.share > 0.0 && a.share < 1.0) {
                return invalid("adversary share must lie in (0, 1)");
            }
            self.hierarchy.validate(&a.target)?;
        }
        if let Some(w) = &self.workload {
            if self.observers.count == 0 {
                return invalid("a transaction workload needs at least one observer");
            }
            if !(w.rate > 0.0) || w.max_txs_per_body == 0 || w.accounts == 0 {
                return invalid("workload rate, accounts and body cap must be positive");
            }
            for f in [w.same_chain_fraction, w.cross_branch_fraction] {
                if !(0.0..=1.0).contains(&f) {
                    return invalid("workload fractions must lie in [0, 1]");
                }
            }
            if w.tx_delay < 0.0 || w.ttl.is_some_and(|t| !(t > 0.0)) {
                return invalid("transaction delay must be non-negative and ttl positive");
            }
        }
        if self.checks.interval.is_some_and(|i| !(i > 0.0)) {
            return invalid("check interval must be positive");
        }
        Ok(())
    }
}
