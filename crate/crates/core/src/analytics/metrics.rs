use std::collections::HashMap;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::consensus::BlockId;
use crate::hierarchy::ChainPath;
use crate::sim::Trace;

/// Empirical counterparts of the closed-form quantities for one chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainMetrics {
    pub chain: ChainPath,
    pub blocks_found: usize,
    pub blocks_canonical: usize,
    pub honest_canonical: usize,
    /// Found blocks per time unit.
    pub found_rate: f64,
    /// Canonical blocks per time unit.
    pub effective_rate: f64,
    /// `blocks_canonical / blocks_found`; 1 when nothing was found.
    pub efficiency: f64,
    /// Honest canonical blocks over all found blocks.
    pub honest_efficiency: f64,
    /// Mean time to flood the chain's overlay, over sampled sources.
    pub network_delay: f64,
    /// Mean time until a found block reached every member of the chain.
    pub mean_spread: f64,
}

/// Latencies of transactions, measured at the reference replica.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SettlementStats {
    pub injected: usize,
    pub committed: usize,
    pub cross_chain: usize,
    pub settled: usize,
    pub commit_latency: LatencySummary,
    /// Injection to credit at the destination, cross-chain only.
    pub settle_latency: LatencySummary,
    /// Commit to credit, cross-chain only.
    pub settle_after_commit: LatencySummary,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LatencySummary {
    pub count: usize,
    pub mean: f64,
    pub p50: f64,
    pub p90: f64,
    pub max: f64,
}

impl LatencySummary {
    pub fn from_samples(mut v: Vec<f64>) -> Self {
        if v.is_empty() {
            return LatencySummary::default();
        }
        v.sort_by(f64::total_cmp);
        let q = |f: f64| v[((v.len() - 1) as f64 * f).round() as usize];
        LatencySummary {
            count: v.len(),
            mean: v.iter().sum::<f64>() / v.len() as f64,
            p50: q(0.5),
            p90: q(0.9),
            max: v[v.len() - 1],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub seed: u64,
    pub duration: f64,
    /// Set when deliveries were still pending at the end of the run.
    pub truncated: bool,
    pub chains: Vec<ChainMetrics>,
    pub settlement: SettlementStats,
}

impl RunMetrics {
    pub fn chain(&self, chain: &ChainPath) -> Option<&ChainMetrics> {
        self.chains.iter().find(|c| c.chain == *chain)
    }

    /// Sum of effective rates over the chains of one order.
    pub fn aggregate_rate(&self, order: usize) -> f64 {
        self.chains.iter().filter(|c| c.chain.order() == order).map(|c| c.effective_rate).sum()
    }
}

/// Computes per-chain and settlement metrics from a finished trace.
pub fn measure(trace: &Trace) -> RunMetrics {
    if !trace.drained {
        warn!("trace for seed {} ends with undelivered blocks; metrics are truncated", trace.seed);
    }
    let adversarial: HashMap<BlockId, bool> = trace.blocks.iter().map(|b| (b.id, b.adversarial)).collect();
    let chains = trace
        .canonical
        .iter()
        .map(|(chain, canonical)| {
            let members: Vec<_> = trace
                .blocks
                .iter()
                .filter(|b| b.achieved_order <= chain.order() && chain.is_prefix_of(&b.leaf))
                .collect();
            let found = members.len();
            let on_chain = canonical.len().saturating_sub(1);
            let honest = canonical[1.min(canonical.len())..]
                .iter()
                .filter(|id| !adversarial.get(id).copied().unwrap_or(false))
                .count();
            let spreads: Vec<f64> = members
                .iter()
                .filter_map(|b| b.spread.iter().find(|(c, _)| c == chain).map(|(_, s)| *s))
                .collect();
            let ratio = |x: usize| if found == 0 { 1.0 } else { x as f64 / found as f64 };
            ChainMetrics {
                chain: *chain,
                blocks_found: found,
                blocks_canonical: on_chain,
                honest_canonical: honest,
                found_rate: found as f64 / trace.duration,
                effective_rate: on_chain as f64 / trace.duration,
                efficiency: ratio(on_chain),
                honest_efficiency: ratio(honest),
                network_delay: trace.network_delay.get(chain).copied().unwrap_or(0.0),
                mean_spread: if spreads.is_empty() { 0.0 } else { spreads.iter().sum::<f64>() / spreads.len() as f64 },
            }
        })
        .collect();

    let txs = &trace.transactions;
    let cross: Vec<_> = txs.iter().filter(|t| t.origin != t.destination).collect();
    let settlement = SettlementStats {
        injected: txs.len(),
        committed: txs.iter().filter(|t| t.committed.is_some()).count(),
        cross_chain: cross.len(),
        settled: cross.iter().filter(|t| t.settled.is_some()).count(),
        commit_latency: LatencySummary::from_samples(
            txs.iter().filter_map(|t| t.committed.map(|c| c - t.injected)).collect(),
        ),
        settle_latency: LatencySummary::from_samples(
            cross.iter().filter_map(|t| t.settled.map(|s| s - t.injected)).collect(),
        ),
        settle_after_commit: LatencySummary::from_samples(
            cross.iter().filter_map(|t| Some(t.settled? - t.committed?)).collect(),
        ),
    };
    RunMetrics { seed: trace.seed, duration: trace.duration, truncated: !trace.drained, chains, settlement }
}
