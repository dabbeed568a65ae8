//! Seeded experiments comparing simulations with the closed-form model.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::metrics::measure;
use super::model::{delay_bound, efficiency, ModelError};
use crate::hierarchy::{ChainPath, HierarchyConfig};
use crate::netsim::{broadcast_delay, generate_overlay, DelayModel, DelaySampler, NetError, PartitionPolicy};
use crate::sim::{
    run, AdversaryConfig, CheckConfig, DifficultySpec, MinerSpec, NetworkConfig, ObserverConfig, RateSpec, SimConfig,
    SimError, Simulation,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Mean and standard error of per-seed samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    /// Sample standard deviation over `sqrt(n)`.
    pub sigma: f64,
    pub n: usize,
}

impl Estimate {
    pub fn from_samples(v: &[f64]) -> Self {
        let n = v.len();
        let mean = v.iter().sum::<f64>() / n as f64;
        let var = if n > 1 { v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64 } else { 0.0 };
        Estimate { mean, sigma: (var / n as f64).sqrt(), n }
    }

    /// Distance from `target` in standard errors.
    pub fn z(&self, target: f64) -> f64 {
        (self.mean - target).abs() / self.sigma
    }
}

fn map_seeds<T: Send, F>(seeds: &[u64], parallel: bool, f: F) -> Result<Vec<T>, SimError>
where
    F: Fn(u64) -> Result<T, SimError> + Sync,
{
    if parallel {
        seeds.par_iter().map(|&s| f(s)).collect()
    } else {
        seeds.iter().map(|&s| f(s)).collect()
    }
}

/// Single-chain run on a complete graph with constant link delay, so every
/// block reaches every other node exactly one delay after it is found.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencySetup {
    /// Product of the network-wide block rate and the delay.
    pub load: f64,
    /// Adversarial hash share; 0 for an honest network.
    pub beta: f64,
    pub nodes: usize,
    pub delay: f64,
    /// Expected number of blocks found per run.
    pub blocks: f64,
}

impl EfficiencySetup {
    pub fn rate(&self) -> f64 {
        self.load / self.delay
    }

    pub fn predicted(&self) -> f64 {
        efficiency(self.rate(), self.delay, self.beta)
    }

    pub fn config(&self, seed: u64) -> SimConfig {
        SimConfig {
            seed,
            duration: self.blocks / self.rate(),
            hierarchy: HierarchyConfig::single_chain(),
            difficulty: DifficultySpec::Thresholds { thresholds: vec![1.0] },
            rates: RateSpec::PerOrder(vec![self.rate()]),
            network: NetworkConfig {
                nodes: self.nodes,
                degree: self.nodes - 1,
                delay: DelayModel::Constant { delay: self.delay },
                partition: PartitionPolicy::Uniform,
            },
            miners: MinerSpec::Uniform,
            observers: ObserverConfig::default(),
            adversary: (self.beta > 0.0).then_some(AdversaryConfig { share: self.beta, target: ChainPath::ROOT }),
            workload: None,
            checks: CheckConfig { enabled: false, interval: None },
            record_events: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyResult {
    pub setup: EfficiencySetup,
    pub predicted: f64,
    /// Honest canonical blocks over all found blocks, per seed.
    pub samples: Vec<f64>,
    pub measured: Estimate,
    pub measured_delay: f64,
}

pub fn efficiency_experiment(
    setup: &EfficiencySetup,
    seeds: &[u64],
    parallel: bool,
) -> Result<EfficiencyResult, SimError> {
    let runs = map_seeds(seeds, parallel, |seed| {
        let m = measure(&run(&setup.config(seed))?);
        let c = m.chain(&ChainPath::ROOT).expect("root is always measured");
        Ok((c.honest_efficiency, c.network_delay))
    })?;
    let samples: Vec<f64> = runs.iter().map(|r| r.0).collect();
    Ok(EfficiencyResult {
        setup: setup.clone(),
        predicted: setup.predicted(),
        measured: Estimate::from_samples(&samples),
        measured_delay: runs.iter().map(|r| r.1).sum::<f64>() / runs.len() as f64,
        samples,
    })
}

/// Time for a block to reach every node of a fresh random `d`-regular
/// overlay with constant link delay, from a random source.
pub fn gossip_trial(n: usize, d: usize, delay: f64, seed: u64) -> Result<f64, NetError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let model = DelayModel::Constant { delay };
    let sampler = DelaySampler::new(&model, None)?;
    let g = generate_overlay(n, d, &sampler, &mut rng)?;
    Ok(broadcast_delay(&g, rng.random_range(0..n)))
}

/// Flood time of a fresh random `d`-regular overlay averaged over `sources`
/// evenly spaced source nodes.
pub fn mean_flood_time(n: usize, d: usize, delay: f64, seed: u64, sources: usize) -> Result<f64, NetError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let model = DelayModel::Constant { delay };
    let sampler = DelaySampler::new(&model, None)?;
    let g = generate_overlay(n, d, &sampler, &mut rng)?;
    let k = sources.clamp(1, n);
    Ok((0..k).map(|i| broadcast_delay(&g, i * n / k)).sum::<f64>() / k as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GossipResult {
    pub nodes: usize,
    pub degree: usize,
    pub bound: f64,
    pub samples: Vec<f64>,
    /// Trials whose flood time stayed within the bound.
    pub within: usize,
    pub mean: f64,
}

pub fn gossip_experiment(n: usize, d: usize, delay: f64, seeds: &[u64]) -> Result<GossipResult, ExperimentError> {
    let samples = seeds.iter().map(|&s| gossip_trial(n, d, delay, s)).collect::<Result<Vec<_>, _>>()?;
    let bound = delay_bound(delay, d, n)?;
    Ok(GossipResult {
        nodes: n,
        degree: d,
        bound,
        within: samples.iter().filter(|&&x| x <= bound).count(),
        mean: samples.iter().sum::<f64>() / samples.len() as f64,
        samples,
    })
}

/// Throughput-vs-q sweep: one order-2 layer split into `q` chains, with the
/// per-chain rate of every order set so that rate times measured delay
/// equals `load`. `q = 1` runs a single chain at the root rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub qs: Vec<u16>,
    pub nodes: usize,
    pub degree: usize,
    pub delay: DelayModel,
    /// Target rate-delay product for every chain.
    pub load: f64,
    /// Expected root blocks per run; fixes the duration.
    pub root_blocks: f64,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub partition: PartitionPolicy,
}

/// One chain order of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub q: u16,
    pub seed: u64,
    pub order: usize,
    /// Configured rate per chain.
    pub lambda: f64,
    /// Measured flood time, averaged over the order's chains.
    pub delta: f64,
    pub efficiency: f64,
    /// Canonical blocks per time, per chain.
    pub effective_rate: f64,
    /// Closed-form effective rate at the configured rate and measured delay.
    pub predicted: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub q: u16,
    pub delta: f64,
    pub efficiency: f64,
    /// Summed effective rate over the q chains.
    pub aggregate: Estimate,
    /// `aggregate(q) / (q * aggregate(1))`, paired by seed.
    pub ratio: Estimate,
    /// Ratio the closed-form model predicts when both delays are taken at
    /// their gossip bounds.
    pub model_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    pub points: Vec<SweepPoint>,
}

impl SweepReport {
    /// Every q > 1 beats linear scaling.
    pub fn superlinear(&self) -> bool {
        self.points.iter().filter(|p| p.q > 1).all(|p| p.ratio.mean > 1.0)
    }

    pub fn ratio_nondecreasing(&self) -> bool {
        self.points.windows(2).all(|w| w[1].ratio.mean >= w[0].ratio.mean)
    }
}

impl SweepConfig {
    fn base(&self, seed: u64, q: u16) -> SimConfig {
        let (hierarchy, thresholds) = if q == 1 {
            (HierarchyConfig::single_chain(), vec![1.0])
        } else {
            (HierarchyConfig::new(vec![q]).expect("q >= 2"), vec![0.5, 1.0])
        };
        SimConfig {
            seed,
            duration: 1.0,
            hierarchy,
            rates: RateSpec::PerOrder(thresholds.clone()),
            difficulty: DifficultySpec::Thresholds { thresholds },
            network: NetworkConfig {
                nodes: self.nodes,
                degree: self.degree,
                delay: self.delay.clone(),
                partition: self.partition,
            },
            miners: MinerSpec::Uniform,
            observers: ObserverConfig::default(),
            adversary: None,
            workload: None,
            checks: CheckConfig { enabled: false, interval: None },
            record_events: false,
        }
    }

    /// Calibrated config: rates from the overlays' measured delays.
    pub fn calibrated(&self, seed: u64, q: u16, duration: f64) -> Result<(SimConfig, Vec<f64>), SimError> {
        let mut cfg = self.base(seed, q);
        let delays = Simulation::new(&cfg)?.network_delays();
        let per_order: Vec<f64> = (1..=cfg.hierarchy.num_orders())
            .map(|r| {
                let v: Vec<f64> = delays.iter().filter(|(c, _)| c.order() == r).map(|(_, d)| *d).collect();
                v.iter().sum::<f64>() / v.len() as f64
            })
            .collect();
        let lambdas: Vec<f64> = per_order.iter().map(|d| self.load / d).collect();
        let totals: Vec<f64> =
            lambdas.iter().enumerate().map(|(i, l)| l * cfg.hierarchy.chains_at(i + 1) as f64).collect();
        let leaf = *totals.last().expect("at least one order");
        cfg.difficulty = DifficultySpec::Thresholds { thresholds: totals.iter().map(|t| t / leaf).collect() };
        cfg.rates = RateSpec::PerOrder(totals);
        cfg.duration = duration;
        Ok((cfg, per_order))
    }

    fn rows_for(&self, seed: u64) -> Result<Vec<SweepRow>, SimError> {
        let base_delay = Simulation::new(&self.base(seed, 1))?.network_delays()[&ChainPath::ROOT];
        let duration = self.root_blocks * base_delay / self.load;
        let mut rows = Vec::new();
        for &q in &self.qs {
            let (cfg, deltas) = self.calibrated(seed, q, duration)?;
            let m = measure(&run(&cfg)?);
            let order = cfg.hierarchy.num_orders();
            let chains: Vec<_> = m.chains.iter().filter(|c| c.chain.order() == order).collect();
            let k = chains.len() as f64;
            let lambda = self.load / deltas[order - 1];
            let delta = deltas[order - 1];
            rows.push(SweepRow {
                q,
                seed,
                order,
                lambda,
                delta,
                efficiency: chains.iter().map(|c| c.efficiency).sum::<f64>() / k,
                effective_rate: chains.iter().map(|c| c.effective_rate).sum::<f64>() / k,
                predicted: lambda / (1.0 + lambda * delta),
            });
        }
        Ok(rows)
    }
}

/// Runs the sweep; each seed's runs share one duration.
pub fn scaling_sweep(cfg: &SweepConfig, parallel: bool) -> Result<SweepReport, SimError> {
    if cfg.qs.first() != Some(&1) {
        return Err(SimError::Config(crate::sim::ConfigError::Invalid("the sweep must start at q = 1".into())));
    }
    let rows: Vec<SweepRow> = map_seeds(&cfg.seeds, parallel, |s| cfg.rows_for(s))?.into_iter().flatten().collect();
    let mut points = Vec::new();
    let base: Vec<f64> = cfg.seeds.iter().map(|&s| row(&rows, 1, s).effective_rate).collect();
    for &q in &cfg.qs {
        let these: Vec<&SweepRow> = cfg.seeds.iter().map(|&s| row(&rows, q, s)).collect();
        let aggregates: Vec<f64> = these.iter().map(|r| r.effective_rate * q as f64).collect();
        let ratios: Vec<f64> = aggregates.iter().zip(&base).map(|(a, b)| a / (q as f64 * b)).collect();
        let n = these.len() as f64;
        let link = cfg.delay.mean().unwrap_or(1.0);
        let bound_1 = delay_bound(link, cfg.degree, cfg.nodes).ok();
        let bound_q = delay_bound(link, cfg.degree, cfg.nodes / q as usize).ok();
        points.push(SweepPoint {
            q,
            delta: these.iter().map(|r| r.delta).sum::<f64>() / n,
            efficiency: these.iter().map(|r| r.efficiency).sum::<f64>() / n,
            aggregate: Estimate::from_samples(&aggregates),
            ratio: Estimate::from_samples(&ratios),
            model_ratio: bound_1.zip(bound_q).map(|(a, b)| a / b),
        });
    }
    Ok(SweepReport { rows, points })
}

fn row(rows: &[SweepRow], q: u16, seed: u64) -> &SweepRow {
    rows.iter().find(|r| r.q == q && r.seed == seed).expect("every seed runs every q")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn estimate_of_constant_samples() {
        let e = Estimate::from_samples(&[2.0, 2.0, 2.0]);
        assert_eq!((e.mean, e.sigma, e.n), (2.0, 0.0, 3));
        let e = Estimate::from_samples(&[1.0, 3.0]);
        assert!((e.sigma - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gossip_trial_counts_hops_under_constant_delay() {
        let d = gossip_trial(50, 49, 2.0, 1).unwrap();
        assert_eq!(d, 2.0);
        let d = gossip_trial(200, 4, 1.0, 1).unwrap();
        assert_eq!(d, d.round());
        assert!(d >= 3.0);
    }

    #[test]
    fn mean_flood_time_lies_between_radius_and_diameter() {
        // complete graph: every source needs exactly one hop
        assert_eq!(mean_flood_time(30, 29, 1.5, 3, 8).unwrap(), 1.5);
        let m = mean_flood_time(300, 4, 1.0, 3, 16).unwrap();
        let single: Vec<f64> = (0..16).map(|i| gossip_trial(300, 4, 1.0, 100 + i).unwrap()).collect();
        let lo = single.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(m >= lo - 1.0 && m <= single.iter().cloned().fold(0.0, f64::max) + 1.0);
    }

    #[test]
    fn calibration_equalizes_rate_delay_products() {
        let cfg = SweepConfig {
            qs: vec![1, 4],
            nodes: 64,
            degree: 6,
            delay: DelayModel::Lognormal { mean: 1.0, sigma: 0.5 },
            load: 0.25,
            root_blocks: 10.0,
            seeds: vec![1],
            partition: PartitionPolicy::Uniform,
        };
        let (sim, deltas) = cfg.calibrated(1, 4, 10.0).unwrap();
        let rates = sim.order_rates().unwrap();
        assert!((rates[0] * deltas[0] - 0.25).abs() < 1e-9);
        assert!((rates[1] / 4.0 * deltas[1] - 0.25).abs() < 1e-9);
        assert!(deltas[1] < deltas[0]);
    }
}
