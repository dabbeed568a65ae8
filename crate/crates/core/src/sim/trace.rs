//! Simulation output: per-block and per-transaction records, final canonical
//! chains and consistency-check results.

use std::collections::BTreeMap;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::consensus::BlockId;
use crate::hierarchy::ChainPath;
use crate::ledger::TxId;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockRecord {
    pub id: BlockId,
    pub leaf: ChainPath,
    pub achieved_order: usize,
    pub miner: u32,
    pub adversarial: bool,
    pub found_time: f64,
    /// When the block left its miner; later than `found_time` for withheld
    /// blocks, `None` if never released.
    pub released: Option<f64>,
    /// Time until the last member of each member chain's sub-network held
    /// the block, measured from release.
    pub spread: Vec<(ChainPath, f64)>,
    pub txs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TxRecord {
    pub id: TxId,
    pub origin: ChainPath,
    pub destination: ChainPath,
    pub injected: f64,
    /// First time the reference replica applied the committing block.
    pub committed: Option<f64>,
    /// First time the reference replica credited the destination.
    pub settled: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivergenceRecord {
    pub time: f64,
    pub chain: ChainPath,
    pub replicas: (u32, u32),
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolationRecord {
    pub time: f64,
    pub replica: u32,
    pub detail: String,
}

/// Results of the consistency checks run during a simulation.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub checkpoints: u64,
    /// Pairs of replicas with identical canonical chains whose partition
    /// states were compared.
    pub comparisons: u64,
    pub divergences: Vec<DivergenceRecord>,
    pub conservation: Vec<ViolationRecord>,
    /// A parent-canonical coincident block missing from a child's canonical
    /// chain, or the reverse.
    pub coupling: Vec<ViolationRecord>,
}

impl CheckReport {
    pub fn is_clean(&self) -> bool {
        self.divergences.is_empty() && self.conservation.is_empty() && self.coupling.is_empty()
    }
}

/// One line of the event log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "kebab-case")]
pub enum TraceEvent {
    BlockFound { time: f64, block: BlockId, miner: u32, leaf: ChainPath, order: usize },
    BlockReleased { time: f64, block: BlockId },
    BlockDelivered { time: f64, replica: u32, block: BlockId, reverted: usize, applied: usize },
    TxInjected { time: f64, tx: TxId, origin: ChainPath, destination: ChainPath },
    Invalidated { time: f64, replica: u32, block: BlockId },
    Checkpoint { time: f64, tips: BTreeMap<ChainPath, BlockId> },
}

impl TraceEvent {
    pub fn time(&self) -> f64 {
        match *self {
            TraceEvent::BlockFound { time, .. }
            | TraceEvent::BlockReleased { time, .. }
            | TraceEvent::BlockDelivered { time, .. }
            | TraceEvent::TxInjected { time, .. }
            | TraceEvent::Invalidated { time, .. }
            | TraceEvent::Checkpoint { time, .. } => time,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub seed: u64,
    pub duration: f64,
    /// Time the last event was processed.
    pub end_time: f64,
    /// All deliveries were processed before the run ended.
    pub drained: bool,
    pub blocks: Vec<BlockRecord>,
    pub transactions: Vec<TxRecord>,
    /// Final canonical chain per chain, from the reference replica of each
    /// chain (an observer when there is one).
    pub canonical: BTreeMap<ChainPath, Vec<BlockId>>,
    /// Mean time for a flood to cover each chain's sub-network.
    pub network_delay: BTreeMap<ChainPath, f64>,
    pub checks: CheckReport,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub events: Vec<TraceEvent>,
}

impl Trace {
    /// Writes the event log as JSON lines, followed by one summary line per
    /// block and transaction.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> io::Result<()> {
        for e in &self.events {
            serde_json::to_writer(&mut out, e)?;
            out.write_all(b"\n")?;
        }
        for b in &self.blocks {
            serde_json::to_writer(&mut out, &Line { record: "block", data: b })?;
            out.write_all(b"\n")?;
        }
        for t in &self.transactions {
            serde_json::to_writer(&mut out, &Line { record: "tx", data: t })?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

#[derive(Serialize)]
struct Line<'a, T: Serialize> {
    record: &'a str,
    #[serde(flatten)]
    data: &'a T,
}
