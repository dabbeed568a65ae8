use std::collections::{BTreeMap, HashMap, HashSet};
use std::sync::Arc;

use log::debug;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp;
use thiserror::Error;

use super::adversary::Adversary;
use super::config::{ConfigError, MinerSpec, SimConfig};
use super::event::{EventQueue, Miner, Recipient, SimEventKind};
use super::replica::{Receipt, Replica};
use super::trace::{
    BlockRecord, CheckReport, DivergenceRecord, Trace, TraceEvent, TxRecord, ViolationRecord,
};
use super::workload::{genesis_assets, Workload};
use crate::consensus::{classify_order, Block, BlockId, DifficultySchedule};
use crate::hierarchy::{ChainPath, HierarchyConfig};
use crate::ledger::{check_conservation, check_state_consistency, validate_transaction, AssetId, GenesisAsset, Transaction};
use crate::netsim::{
    broadcast_delay, feasible_degree, generate_overlay_on, latent_positions, partition_network, propagate,
    DelaySampler, NetError, OverlayGraph, SubnetworkAssignment,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    Config(#[from] ConfigError),
    #[error("network setup failed: {0}")]
    Network(#[from] NetError),
}

/// Overlay of one chain's sub-network plus global-to-local node lookup.
#[derive(Debug, Clone)]
struct Overlay {
    graph: OverlayGraph,
    local: HashMap<u32, usize>,
}

/// Runs one simulation to completion.
pub fn run(config: &SimConfig) -> Result<Trace, SimError> {
    Ok(Simulation::new(config)?.run())
}

/// Discrete-event simulation of miners, gossip and replicas.
pub struct Simulation {
    cfg: SimConfig,
    hierarchy: HierarchyConfig,
    schedule: DifficultySchedule,
    leaf_rate: f64,
    rng: ChaCha8Rng,
    assignment: SubnetworkAssignment,
    overlays: BTreeMap<ChainPath, Overlay>,
    members: BTreeMap<ChainPath, Vec<u32>>,
    dist_cache: HashMap<(ChainPath, u32), Arc<Vec<f64>>>,
    nodes: Vec<Replica>,
    observers: Vec<Replica>,
    adversary: Option<Adversary>,
    miner_dist: WeightedIndex<f64>,
    queue: EventQueue,
    genesis: Vec<GenesisAsset>,
    workload: Option<Workload>,
    used_ids: HashSet<u64>,
    block_index: HashMap<BlockId, usize>,
    tx_index: HashMap<crate::ledger::TxId, usize>,
    trace: Trace,
    scratch: Vec<f64>,
}

impl Simulation {
    pub fn new(config: &SimConfig) -> Result<Self, SimError> {
        config.validate()?;
        let hierarchy = config.hierarchy.clone();
        let schedule = config.difficulty.schedule().map_err(ConfigError::from)?;
        let leaf_rate = config.leaf_rate()?;
        let n = config.network.nodes;

        let mut net_rng = stream(config.seed, 1);
        let positions = match config.network.delay {
            crate::netsim::DelayModel::LatentPosition { dimensions, .. } => {
                Some(latent_positions(n, dimensions, &mut net_rng))
            }
            _ => None,
        };
        let assignment =
            partition_network(n, &hierarchy, config.network.partition, positions.as_deref(), &mut net_rng)?;
        let sampler = DelaySampler::new(&config.network.delay, positions.as_deref())?;
        let mut overlays = BTreeMap::new();
        let mut members = BTreeMap::new();
        for chain in hierarchy.chains() {
            let m = assignment.members(&chain);
            let d = feasible_degree(m.len(), config.network.degree);
            let graph = generate_overlay_on(&m, d, &sampler, &mut net_rng)?;
            let local = m.iter().enumerate().map(|(i, &g)| (g, i)).collect();
            overlays.insert(chain, Overlay { graph, local });
            members.insert(chain, m);
        }

        let mut rng = stream(config.seed, 2);
        let genesis = match &config.workload {
            Some(w) => genesis_assets(&hierarchy, w, &mut rng),
            None => Vec::new(),
        };
        let nodes: Vec<Replica> =
            (0..n as u32).map(|i| Replica::for_slice(&hierarchy, assignment.leaf(i), &genesis)).collect();
        let observers: Vec<Replica> =
            (0..config.observers.count).map(|_| Replica::full(&hierarchy, &genesis)).collect();

        let beta = config.adversary.as_ref().map_or(0.0, |a| a.share);
        let mut weights: Vec<f64> = match &config.miners {
            MinerSpec::Uniform => vec![1.0; n],
            MinerSpec::Weights(w) => w.clone(),
        };
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w *= (1.0 - beta) / total);
        let adversary = match &config.adversary {
            Some(a) => {
                let candidates: Vec<u32> =
                    (0..n as u32).filter(|&i| a.target.is_prefix_of(&assignment.leaf(i))).collect();
                if candidates.is_empty() {
                    return Err(ConfigError::Invalid(format!("no node mines on adversary target {}", a.target)).into());
                }
                let gateway = candidates[rng.random_range(0..candidates.len())];
                let leaf = assignment.leaf(gateway);
                weights.push(beta);
                Some(Adversary::new(Replica::for_slice(&hierarchy, leaf, &genesis), leaf, a.target, gateway))
            }
            None => None,
        };
        let miner_dist = WeightedIndex::new(&weights)
            .map_err(|e| ConfigError::Invalid(format!("miner weights: {e}")))?;

        let workload = config.workload.as_ref().map(|w| {
            let ttl = w.ttl.unwrap_or_else(|| 20.0 * hierarchy.chains_at(1) as f64 / config.order_rates().expect("validated")[0]);
            Workload::new(w.clone(), ttl, &hierarchy, stream(config.seed, 3))
        });

        let trace = Trace {
            seed: config.seed,
            duration: config.duration,
            end_time: 0.0,
            drained: false,
            blocks: Vec::new(),
            transactions: Vec::new(),
            canonical: BTreeMap::new(),
            network_delay: BTreeMap::new(),
            checks: CheckReport::default(),
            events: Vec::new(),
        };
        Ok(Simulation {
            cfg: config.clone(),
            hierarchy,
            schedule,
            leaf_rate,
            rng,
            assignment,
            overlays,
            members,
            dist_cache: HashMap::new(),
            nodes,
            observers,
            adversary,
            miner_dist,
            queue: EventQueue::default(),
            genesis,
            workload,
            used_ids: HashSet::from([0]),
            block_index: HashMap::new(),
            tx_index: HashMap::new(),
            trace,
            scratch: vec![f64::INFINITY; n],
        })
    }

    /// Mean time to flood each chain's overlay, over up to 64 evenly spaced
    /// sources.
    pub fn network_delays(&self) -> BTreeMap<ChainPath, f64> {
        self.overlays
            .iter()
            .map(|(chain, o)| {
                let n = o.graph.len();
                let samples = n.min(64);
                let total: f64 = (0..samples).map(|k| broadcast_delay(&o.graph, k * n / samples)).sum();
                (*chain, total / samples as f64)
            })
            .collect()
    }

    pub fn assignment(&self) -> &SubnetworkAssignment {
        &self.assignment
    }

    pub fn run(mut self) -> Trace {
        self.schedule_block(0.0);
        if let Some(w) = &mut self.workload {
            let t = w.next_arrival(0.0);
            if t <= self.cfg.duration {
                self.queue.push(t, SimEventKind::TxInjected);
            }
        }
        if let (true, Some(i)) = (self.cfg.checks.enabled, self.cfg.checks.interval) {
            if i <= self.cfg.duration {
                self.queue.push(i, SimEventKind::Checkpoint);
            }
        }
        let mut now = 0.0;
        while let Some(ev) = self.queue.pop() {
            now = ev.time;
            match ev.kind {
                SimEventKind::BlockFound { miner, leaf, achieved_order } => {
                    self.on_block_found(now, miner, leaf, achieved_order);
                    self.schedule_block(now);
                }
                SimEventKind::BlockDelivered { to, block } => self.on_delivered(now, to, block),
                SimEventKind::TxInjected => self.on_tx(now),
                SimEventKind::Checkpoint => {
                    self.run_checks(now);
                    let next = now + self.cfg.checks.interval.expect("scheduled only with an interval");
                    if next <= self.cfg.duration {
                        self.queue.push(next, SimEventKind::Checkpoint);
                    }
                }
            }
        }
        self.trace.end_time = now;
        self.trace.drained = self.queue.is_empty();
        if self.cfg.checks.enabled {
            self.run_checks(now);
        }
        self.finish()
    }

    fn schedule_block(&mut self, now: f64) {
        let dt = Exp::new(self.leaf_rate).expect("positive rate").sample(&mut self.rng);
        let t = now + dt;
        if t > self.cfg.duration {
            return;
        }
        let k = self.miner_dist.sample(&mut self.rng);
        let (miner, leaf) = if k < self.nodes.len() {
            (Miner::Node(k as u32), self.assignment.leaf(k as u32))
        } else {
            let a = self.adversary.as_ref().expect("adversary weight present");
            (Miner::Adversary, a.leaf)
        };
        let p_leaf = *self.schedule.thresholds().last().expect("non-empty");
        let sample = self.rng.random::<f64>() * p_leaf;
        let achieved_order = classify_order(sample, &self.schedule).expect("sample below leaf threshold");
        self.queue.push(t, SimEventKind::BlockFound { miner, leaf, achieved_order });
    }

    fn fresh_id(&mut self) -> BlockId {
        loop {
            let id = self.rng.random::<u64>();
            if self.used_ids.insert(id) {
                return BlockId(id);
            }
        }
    }

    fn build_block(&mut self, now: f64, miner: Miner, leaf: ChainPath, achieved: usize) -> Block {
        let id = self.fresh_id();
        let replica = match miner {
            Miner::Node(i) => &self.nodes[i as usize],
            Miner::Adversary => &self.adversary.as_ref().expect("adversary").replica,
        };
        let mut predecessors = Vec::new();
        let mut bodies = Vec::new();
        for order in achieved..=leaf.order() {
            let chain = leaf.ancestor_at(order).expect("order in slice");
            predecessors.push(replica.tip(&chain));
            bodies.push(match (&mut self.workload, miner) {
                (Some(w), Miner::Node(_)) => select_body(w, replica, &chain, now, &self.hierarchy),
                _ => Vec::new(),
            });
        }
        let rollup = replica.forest().compute_rollup(leaf, achieved, &predecessors, &bodies);
        Block {
            id,
            leaf,
            achieved_order: achieved,
            predecessors,
            bodies,
            rollup,
            found_time: now,
            miner: match miner {
                Miner::Node(i) => i,
                Miner::Adversary => u32::MAX - 1,
            },
            malformed: false,
        }
    }

    fn on_block_found(&mut self, now: f64, miner: Miner, leaf: ChainPath, achieved: usize) {
        let block = Arc::new(self.build_block(now, miner, leaf, achieved));
        let adversarial = miner == Miner::Adversary;
        self.block_index.insert(block.id, self.trace.blocks.len());
        self.trace.blocks.push(BlockRecord {
            id: block.id,
            leaf,
            achieved_order: achieved,
            miner: block.miner,
            adversarial,
            found_time: now,
            released: None,
            spread: Vec::new(),
            txs: block.tx_count(),
        });
        if self.cfg.record_events {
            self.trace.events.push(TraceEvent::BlockFound {
                time: now,
                block: block.id,
                miner: block.miner,
                leaf,
                order: achieved,
            });
        }
        match miner {
            Miner::Node(i) => {
                let receipt = self.nodes[i as usize].receive(block.clone(), now);
                self.note_receipt(now, i, &receipt);
                self.broadcast(now, i, block, true);
            }
            Miner::Adversary => {
                let adv = self.adversary.as_mut().expect("adversary");
                adv.replica.receive(block.clone(), now);
                adv.withheld.push(block);
            }
        }
    }

    fn distances(&mut self, chain: ChainPath, source: u32) -> Arc<Vec<f64>> {
        let overlays = &self.overlays;
        self.dist_cache
            .entry((chain, source))
            .or_insert_with(|| {
                let o = &overlays[&chain];
                Arc::new(propagate(&o.graph, o.local[&source]))
            })
            .clone()
    }

    /// Floods `block` from node `source` through the overlays of every
    /// member chain. With `source_has_it` the source itself is skipped.
    fn broadcast(&mut self, now: f64, source: u32, block: Arc<Block>, source_has_it: bool) {
        let mut touched: Vec<u32> = Vec::new();
        let mut spread = Vec::new();
        for chain in block.member_chains() {
            if !self.overlays.contains_key(&chain) {
                continue;
            }
            let dist = self.distances(chain, source);
            let m = &self.members[&chain];
            let mut worst: f64 = 0.0;
            for (i, &node) in m.iter().enumerate() {
                let d = dist[i];
                worst = worst.max(d);
                let slot = &mut self.scratch[node as usize];
                if slot.is_infinite() {
                    touched.push(node);
                }
                if d < *slot {
                    *slot = d;
                }
            }
            spread.push((chain, worst));
        }
        touched.sort_unstable();
        let mut gateway_time = None;
        let adversary_gateway = self.adversary.as_ref().map(|a| a.gateway);
        for node in touched {
            let d = std::mem::replace(&mut self.scratch[node as usize], f64::INFINITY);
            if Some(node) == adversary_gateway {
                gateway_time = Some(now + d);
            }
            if source_has_it && node == source {
                continue;
            }
            self.queue.push(now + d, SimEventKind::BlockDelivered { to: Recipient::Node(node), block: block.clone() });
        }
        let adversarial = self.block_index.get(&block.id).is_some_and(|&i| self.trace.blocks[i].adversarial);
        if let (Some(t), false) = (gateway_time, adversarial) {
            self.queue.push(t, SimEventKind::BlockDelivered { to: Recipient::Adversary, block: block.clone() });
        }
        for k in 0..self.observers.len() {
            self.queue.push(
                now + self.cfg.observers.delay,
                SimEventKind::BlockDelivered { to: Recipient::Observer(k as u32), block: block.clone() },
            );
        }
        if let Some(&i) = self.block_index.get(&block.id) {
            let rec = &mut self.trace.blocks[i];
            rec.released = Some(now);
            rec.spread = spread;
        }
    }

    fn on_delivered(&mut self, now: f64, to: Recipient, block: Arc<Block>) {
        match to {
            Recipient::Node(i) => {
                let receipt = self.nodes[i as usize].receive(block.clone(), now);
                self.note_receipt(now, i, &receipt);
                if self.cfg.record_events {
                    self.trace.events.push(TraceEvent::BlockDelivered {
                        time: now,
                        replica: i,
                        block: block.id,
                        reverted: receipt.reverted(),
                        applied: receipt.plans.iter().map(|p| p.apply.len()).sum(),
                    });
                }
            }
            Recipient::Observer(k) => {
                let receipt = self.observers[k as usize].receive(block, now);
                let id = self.nodes.len() as u32 + k;
                self.note_receipt(now, id, &receipt);
                if k == 0 {
                    self.record_reference(now, &receipt);
                }
            }
            Recipient::Adversary => {
                let adv = self.adversary.as_mut().expect("adversary");
                if let Some(release) = adv.observe(block, now) {
                    let gateway = adv.gateway;
                    for b in release {
                        if self.cfg.record_events {
                            self.trace.events.push(TraceEvent::BlockReleased { time: now, block: b.id });
                        }
                        self.broadcast(now, gateway, b, false);
                    }
                }
            }
        }
    }

    fn note_receipt(&mut self, now: f64, replica: u32, receipt: &Receipt) {
        if !self.cfg.record_events {
            return;
        }
        for inv in &receipt.invalid {
            self.trace.events.push(TraceEvent::Invalidated { time: now, replica, block: inv.block });
        }
    }

    /// Commit and settlement times as seen by the reference observer.
    fn record_reference(&mut self, now: f64, receipt: &Receipt) {
        for delta in &receipt.deltas {
            for tx in delta.debited.iter().chain(&delta.local) {
                if let Some(&i) = self.tx_index.get(tx) {
                    let rec = &mut self.trace.transactions[i];
                    rec.committed.get_or_insert(now);
                    if let Some(w) = &mut self.workload {
                        w.confirm(*tx);
                    }
                }
            }
            for tx in &delta.settled {
                if let Some(&i) = self.tx_index.get(tx) {
                    self.trace.transactions[i].settled.get_or_insert(now);
                }
            }
        }
    }

    fn on_tx(&mut self, now: f64) {
        let Some(w) = &mut self.workload else { return };
        let reference = self.observers[0].ledger();
        if let Some(tx) = w.draw(now, reference) {
            self.tx_index.insert(tx.id, self.trace.transactions.len());
            self.trace.transactions.push(TxRecord {
                id: tx.id,
                origin: tx.origin,
                destination: tx.destination,
                injected: now,
                committed: None,
                settled: None,
            });
            if self.cfg.record_events {
                self.trace.events.push(TraceEvent::TxInjected {
                    time: now,
                    tx: tx.id,
                    origin: tx.origin,
                    destination: tx.destination,
                });
            }
            w.submit(tx, now);
        }
        let next = w.next_arrival(now);
        if next <= self.cfg.duration {
            self.queue.push(next, SimEventKind::TxInjected);
        }
    }

    fn honest(&self) -> impl Iterator<Item = (u32, &Replica)> {
        self.nodes.iter().chain(&self.observers).enumerate().map(|(i, r)| (i as u32, r))
    }

    fn run_checks(&mut self, now: f64) {
        let mut report = std::mem::take(&mut self.trace.checks);
        report.checkpoints += 1;
        for chain in self.hierarchy.chains() {
            let mut groups: BTreeMap<BlockId, Vec<(u32, &Replica)>> = BTreeMap::new();
            for (i, r) in self.honest() {
                if r.tracks(&chain) {
                    groups.entry(r.tip(&chain)).or_default().push((i, r));
                }
            }
            for group in groups.values() {
                let (i0, r0) = group[0];
                let s0 = r0.ledger().state(&chain).expect("tracked");
                for &(i, r) in &group[1..] {
                    report.comparisons += 1;
                    if let Err(d) = check_state_consistency(s0, r.ledger().state(&chain).expect("tracked")) {
                        report.divergences.push(DivergenceRecord {
                            time: now,
                            chain,
                            replicas: (i0, i),
                            detail: d.to_string(),
                        });
                    }
                }
            }
        }
        let universe: Vec<AssetId> = self.genesis.iter().map(|g| g.asset).collect();
        let base = self.nodes.len() as u32;
        for (k, obs) in self.observers.iter().enumerate() {
            if let Err(v) = check_conservation(obs.ledger(), universe.iter().copied()) {
                report.conservation.push(ViolationRecord { time: now, replica: base + k as u32, detail: v.to_string() });
            }
        }
        for (i, r) in self.honest() {
            if let Some(detail) = coupling_violation(r) {
                report.coupling.push(ViolationRecord { time: now, replica: i, detail });
            }
        }
        if self.cfg.record_events {
            let tips = self
                .observers
                .first()
                .map(|o| self.hierarchy.chains().into_iter().map(|c| (c, o.tip(&c))).collect())
                .unwrap_or_default();
            self.trace.events.push(TraceEvent::Checkpoint { time: now, tips });
        }
        self.trace.checks = report;
    }

    fn reference(&self, chain: &ChainPath) -> &Replica {
        self.observers
            .first()
            .or_else(|| self.nodes.iter().find(|r| r.tracks(chain)))
            .expect("every chain has members")
    }

    fn finish(mut self) -> Trace {
        self.trace.network_delay = self.network_delays();
        for chain in self.hierarchy.chains() {
            let list = self.reference(&chain).view().canonical(&chain).to_vec();
            self.trace.canonical.insert(chain, list);
        }
        debug!(
            "seed {} finished at {:.3}: {} blocks, {} txs",
            self.cfg.seed,
            self.trace.end_time,
            self.trace.blocks.len(),
            self.trace.transactions.len()
        );
        self.trace
    }
}

fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn select_body(
    w: &mut Workload,
    replica: &Replica,
    chain: &ChainPath,
    now: f64,
    hierarchy: &HierarchyConfig,
) -> Vec<Transaction> {
    let Some(state) = replica.ledger().state(chain) else { return Vec::new() };
    let cap = w.body_cap();
    let mut touched = HashSet::new();
    let mut out = Vec::new();
    for tx in w.visible(chain, now) {
        if out.len() == cap {
            break;
        }
        if replica.ledger().is_committed(tx.id) || hierarchy.validate(&tx.destination).is_err() {
            continue;
        }
        if validate_transaction(tx, state, &touched).is_ok() {
            touched.insert(tx.asset);
            out.push(tx.clone());
        }
    }
    out
}

/// Checks that each tracked child chain holds exactly the parent-canonical
/// blocks it shares with its parent.
pub fn coupling_violation(replica: &Replica) -> Option<String> {
    let view = replica.view();
    for chain in view.chains() {
        let Ok(parent) = chain.parent() else { continue };
        let forest = replica.forest();
        let from_parent: Vec<BlockId> = view
            .canonical(&parent)
            .iter()
            .copied()
            .filter(|&b| forest.get(b).is_some_and(|x| x.is_member(chain)))
            .collect();
        let from_child: Vec<BlockId> = view
            .canonical(chain)
            .iter()
            .copied()
            .filter(|&b| forest.get(b).is_some_and(|x| x.is_member(&parent)))
            .collect();
        if from_parent != from_child {
            return Some(format!(
                "{chain}: {} shared blocks canonical in parent, {} in child",
                from_parent.len(),
                from_child.len()
            ));
        }
    }
    None
}
