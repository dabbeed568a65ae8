//! Scripted block sequences with expected views, loaded from TOML.
//!
//! A scenario names a hierarchy, a set of replicas (each tracking either a
//! leaf's mining slice or an explicit chain list), optional genesis assets,
//! and blocks in delivery order. Blocks are referred to by label; `genesis`
//! is predefined. Rollups are computed from the blocks seen so far, so files
//! only list predecessors and bodies. Checkpoints run after a named block and
//! assert tips, canonical lists, inclusion, header ordering and ownership.
//!
//! ```toml
//! name = "example"
//! hierarchy = { branching = [2] }
//!
//! [[replicas]]
//! name = "a"
//! leaf = "1.1"
//!
//! [[blocks]]
//! label = "B1"
//! leaf = "1.1"
//! achieved = 1
//! predecessors = ["genesis", "genesis"]
//! time = 1.0
//!
//! [[checkpoints]]
//! after = "B1"
//! replica = "a"
//! tips = { "1" = "B1", "1.1" = "B1" }
//! ```

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::consensus::{Block, BlockForest, BlockId};
use crate::hierarchy::{ChainPath, HierarchyConfig, HierarchyError};
use crate::ledger::{AccountId, AssetId, GenesisAsset, Transaction, TxId};
use crate::sim::Replica;

const FIG3: &str = include_str!("../scenarios/fig3.toml");
const COINCIDENT_REORG: &str = include_str!("../scenarios/coincident_reorg.toml");

/// Names of the bundled scenarios.
pub const BUILTIN: [&str; 2] = ["fig3", "coincident-reorg"];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("cannot parse scenario: {0}")]
    Parse(String),
    #[error("unknown scenario {0:?}")]
    Unknown(String),
    #[error("unknown block label {0:?}")]
    UnknownLabel(String),
    #[error("duplicate block label {0:?}")]
    DuplicateLabel(String),
    #[error("unknown replica {0:?}")]
    UnknownReplica(String),
    #[error("replica {replica:?} does not track {chain}")]
    Untracked { replica: String, chain: ChainPath },
    #[error("block {label:?}: {detail}")]
    BadBlock { label: String, detail: String },
    #[error(transparent)]
    Hierarchy(#[from] HierarchyError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub hierarchy: HierarchyConfig,
    pub replicas: Vec<ReplicaSpec>,
    #[serde(default)]
    pub genesis: Vec<GenesisAsset>,
    pub blocks: Vec<BlockSpec>,
    #[serde(default)]
    pub checkpoints: Vec<Checkpoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReplicaSpec {
    pub name: String,
    /// Track this leaf's mining slice.
    #[serde(default)]
    pub leaf: Option<ChainPath>,
    /// Track exactly these chains (must be closed under parents).
    #[serde(default)]
    pub chains: Option<Vec<ChainPath>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockSpec {
    pub label: String,
    pub leaf: ChainPath,
    pub achieved: usize,
    /// Labels, from the achieved order down to the leaf.
    pub predecessors: Vec<String>,
    #[serde(default)]
    pub time: f64,
    #[serde(default)]
    pub txs: Vec<TxSpec>,
    /// Replicas that receive the block; all of them when omitted.
    #[serde(default)]
    pub to: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TxSpec {
    pub id: u64,
    /// Chain whose body carries the transaction.
    pub origin: ChainPath,
    pub destination: ChainPath,
    pub asset: u64,
    pub sender: u32,
    pub owner: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub after: String,
    pub replica: String,
    #[serde(default)]
    pub tips: BTreeMap<String, String>,
    #[serde(default)]
    pub canonical: BTreeMap<String, Vec<String>>,
    /// Blocks that must not be canonical on the given chain.
    #[serde(default)]
    pub excludes: BTreeMap<String, Vec<String>>,
    /// Pairs `[earlier, later]` the replica must be able to order.
    #[serde(default)]
    pub ordered_before: Vec<[String; 2]>,
    #[serde(default)]
    pub owners: Vec<OwnerCheck>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OwnerCheck {
    pub chain: ChainPath,
    pub asset: u64,
    /// Expected owner; omitted means the partition must not hold the asset.
    #[serde(default)]
    pub owner: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub after: String,
    pub replica: String,
    pub check: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub name: String,
    pub outcomes: Vec<CheckOutcome>,
    pub elapsed: Duration,
}

impl ScenarioReport {
    pub fn passed(&self) -> bool {
        !self.outcomes.is_empty() && self.outcomes.iter().all(|o| o.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckOutcome> {
        self.outcomes.iter().filter(|o| !o.passed)
    }
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self, ScenarioError> {
        toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))
    }

    pub fn builtin(name: &str) -> Result<Self, ScenarioError> {
        match name {
            "fig3" => Scenario::from_toml(FIG3),
            "coincident-reorg" | "coincident_reorg" => Scenario::from_toml(COINCIDENT_REORG),
            other => Err(ScenarioError::Unknown(other.to_string())),
        }
    }

    pub fn run(&self) -> Result<ScenarioReport, ScenarioError> {
        Runner::new(self)?.run()
    }
}

/// Blocks `B1`..`B4` of the three-order visualization: achieved orders 3, 2,
/// 3, 1 on leaf `{1,1,1}`.
pub fn fig3_scenario() -> Scenario {
    Scenario::builtin("fig3").expect("bundled scenario parses")
}

/// A child-only fork that skips a parent-canonical coincident block, then a
/// parent reorg that drops the coincident block, then one that restores it.
pub fn coincident_reorg_scenario() -> Scenario {
    Scenario::builtin("coincident-reorg").expect("bundled scenario parses")
}

struct Runner<'a> {
    scenario: &'a Scenario,
    ids: HashMap<String, BlockId>,
    labels: HashMap<BlockId, String>,
    replicas: Vec<(String, Replica)>,
    /// Sees every block; used to fill in rollups.
    builder: BlockForest,
}

impl<'a> Runner<'a> {
    fn new(scenario: &'a Scenario) -> Result<Self, ScenarioError> {
        let h = &scenario.hierarchy;
        let mut replicas = Vec::new();
        for spec in &scenario.replicas {
            let tracked = match (&spec.leaf, &spec.chains) {
                (Some(leaf), None) => h.mining_slice(leaf)?,
                (None, Some(chains)) => {
                    for c in chains {
                        h.validate(c)?;
                    }
                    chains.clone()
                }
                _ => {
                    return Err(ScenarioError::Parse(format!(
                        "replica {:?} needs exactly one of `leaf` and `chains`",
                        spec.name
                    )))
                }
            };
            replicas.push((spec.name.clone(), Replica::new(h, tracked, &scenario.genesis)));
        }
        Ok(Runner {
            scenario,
            ids: HashMap::from([("genesis".to_string(), BlockId::GENESIS)]),
            labels: HashMap::from([(BlockId::GENESIS, "genesis".to_string())]),
            replicas,
            builder: BlockForest::new(h.num_orders(), h.chains()),
        })
    }

    fn id(&self, label: &str) -> Result<BlockId, ScenarioError> {
        self.ids.get(label).copied().ok_or_else(|| ScenarioError::UnknownLabel(label.to_string()))
    }

    fn label(&self, id: BlockId) -> String {
        self.labels.get(&id).cloned().unwrap_or_else(|| id.to_string())
    }

    fn chain(&self, text: &str) -> Result<ChainPath, ScenarioError> {
        let c: ChainPath = text.parse()?;
        self.scenario.hierarchy.validate(&c)?;
        Ok(c)
    }

    fn build(&mut self, spec: &BlockSpec, index: usize) -> Result<Block, ScenarioError> {
        if self.ids.contains_key(&spec.label) {
            return Err(ScenarioError::DuplicateLabel(spec.label.clone()));
        }
        let bad = |detail: String| ScenarioError::BadBlock { label: spec.label.clone(), detail };
        let leaf = spec.leaf;
        self.scenario.hierarchy.validate(&leaf)?;
        if spec.achieved == 0 || spec.achieved > leaf.order() {
            return Err(bad(format!("achieved order {} outside 1..={}", spec.achieved, leaf.order())));
        }
        let slots = leaf.order() - spec.achieved + 1;
        if spec.predecessors.len() != slots {
            return Err(bad(format!("{} predecessors for {slots} member chains", spec.predecessors.len())));
        }
        let predecessors = spec.predecessors.iter().map(|l| self.id(l)).collect::<Result<Vec<_>, _>>()?;
        let mut bodies = vec![Vec::new(); slots];
        for tx in &spec.txs {
            let Some(k) = (spec.achieved..=leaf.order()).position(|o| leaf.ancestor_at(o) == Some(tx.origin)) else {
                return Err(bad(format!("transaction {} originates outside the block's chains", tx.id)));
            };
            bodies[k].push(Transaction {
                id: TxId(tx.id),
                origin: tx.origin,
                destination: tx.destination,
                asset: AssetId(tx.asset),
                sender: AccountId(tx.sender),
                new_owner: AccountId(tx.owner),
                injected_time: spec.time,
            });
        }
        let rollup = self.builder.compute_rollup(leaf, spec.achieved, &predecessors, &bodies);
        let id = BlockId(index as u64 + 1);
        self.ids.insert(spec.label.clone(), id);
        self.labels.insert(id, spec.label.clone());
        Ok(Block {
            id,
            leaf,
            achieved_order: spec.achieved,
            predecessors,
            bodies,
            rollup,
            found_time: spec.time,
            miner: 0,
            malformed: false,
        })
    }

    fn run(mut self) -> Result<ScenarioReport, ScenarioError> {
        let start = Instant::now();
        let mut outcomes = Vec::new();
        for (index, spec) in self.scenario.blocks.iter().enumerate() {
            let block = Arc::new(self.build(spec, index)?);
            self.builder.admit(block.clone(), spec.time);
            for (name, replica) in &mut self.replicas {
                if spec.to.as_ref().is_none_or(|to| to.contains(name)) {
                    replica.receive(block.clone(), spec.time);
                }
            }
            if let Some(to) = &spec.to {
                if let Some(missing) = to.iter().find(|n| !self.replicas.iter().any(|(r, _)| r == *n)) {
                    return Err(ScenarioError::UnknownReplica(missing.clone()));
                }
            }
            for cp in self.scenario.checkpoints.iter().filter(|c| c.after == spec.label) {
                self.check(cp, &mut outcomes)?;
            }
        }
        if let Some(cp) = self.scenario.checkpoints.iter().find(|c| !self.ids.contains_key(&c.after)) {
            return Err(ScenarioError::UnknownLabel(cp.after.clone()));
        }
        Ok(ScenarioReport { name: self.scenario.name.clone(), outcomes, elapsed: start.elapsed() })
    }

    fn replica(&self, name: &str) -> Result<&Replica, ScenarioError> {
        self.replicas
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, r)| r)
            .ok_or_else(|| ScenarioError::UnknownReplica(name.to_string()))
    }

    fn check(&self, cp: &Checkpoint, out: &mut Vec<CheckOutcome>) -> Result<(), ScenarioError> {
        let r = self.replica(&cp.replica)?;
        let mut push = |check: String, passed: bool, detail: String| {
            out.push(CheckOutcome { after: cp.after.clone(), replica: cp.replica.clone(), check, passed, detail })
        };
        let tracked = |chain: ChainPath| {
            if r.tracks(&chain) {
                Ok(chain)
            } else {
                Err(ScenarioError::Untracked { replica: cp.replica.clone(), chain })
            }
        };
        for (chain, want) in &cp.tips {
            let chain = tracked(self.chain(chain)?)?;
            let got = self.label(r.tip(&chain));
            push(format!("tip of {chain} is {want}"), got == *want, format!("tip is {got}"));
        }
        for (chain, want) in &cp.canonical {
            let chain = tracked(self.chain(chain)?)?;
            let got: Vec<String> = r.view().canonical(&chain).iter().map(|&b| self.label(b)).collect();
            push(format!("canonical {chain} is [{}]", want.join(", ")), got == *want, format!("[{}]", got.join(", ")));
        }
        for (chain, labels) in &cp.excludes {
            let chain = tracked(self.chain(chain)?)?;
            for l in labels {
                let present = r.view().contains(&chain, self.id(l)?);
                push(format!("{l} not canonical on {chain}"), !present, format!("present: {present}"));
            }
        }
        for [a, b] in &cp.ordered_before {
            let ok = r.forest().ordered_before(self.id(a)?, self.id(b)?);
            push(format!("{a} ordered before {b}"), ok, format!("ordered: {ok}"));
        }
        for o in &cp.owners {
            let chain = tracked(o.chain)?;
            let got = r.ledger().state(&chain).and_then(|s| s.owner(AssetId(o.asset)));
            let want = o.owner.map(AccountId);
            push(
                format!("asset {} on {chain} owned by {want:?}", o.asset),
                got == want,
                format!("owner {got:?}"),
            );
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_scenarios_parse() {
        for name in BUILTIN {
            let s = Scenario::builtin(name).unwrap();
            assert!(!s.checkpoints.is_empty());
        }
        assert!(Scenario::builtin("nope").is_err());
    }

    #[test]
    fn unknown_label_is_reported() {
        let text = r#"
            name = "bad"
            hierarchy = { branching = [] }
            [[replicas]]
            name = "a"
            leaf = "1"
            [[blocks]]
            label = "B1"
            leaf = "1"
            achieved = 1
            predecessors = ["B0"]
        "#;
        let err = Scenario::from_toml(text).unwrap().run().unwrap_err();
        assert_eq!(err, ScenarioError::UnknownLabel("B0".into()));
    }

    #[test]
    fn wrong_expectation_fails_the_check() {
        let text = r#"
            name = "mismatch"
            [hierarchy]
            [[replicas]]
            name = "a"
            leaf = "1"
            [[blocks]]
            label = "B1"
            leaf = "1"
            achieved = 1
            predecessors = ["genesis"]
            [[checkpoints]]
            after = "B1"
            replica = "a"
            tips = { "1" = "genesis" }
        "#;
        let report = Scenario::from_toml(text).unwrap().run().unwrap();
        assert!(!report.passed());
        assert_eq!(report.failures().next().unwrap().detail, "tip is B1");
    }
}
