use std::collections::{BTreeMap, HashSet, VecDeque};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use super::config::WorkloadConfig;
use crate::hierarchy::{ChainPath, HierarchyConfig};
use crate::ledger::{AccountId, AssetId, GenesisAsset, Ledger, Transaction, TxId};

/// `assets_per_partition` assets in every chain, numbered from 1, owned by
/// random accounts.
pub fn genesis_assets<R: Rng + ?Sized>(h: &HierarchyConfig, cfg: &WorkloadConfig, rng: &mut R) -> Vec<GenesisAsset> {
    let mut out = Vec::new();
    let mut next = 1;
    for chain in h.chains() {
        for _ in 0..cfg.assets_per_partition {
            let owner = AccountId(rng.random_range(0..cfg.accounts));
            out.push(GenesisAsset { asset: AssetId(next), chain, owner });
            next += 1;
        }
    }
    out
}

#[derive(Debug, Clone)]
struct Pooled {
    tx: Transaction,
    visible: f64,
}

/// Transaction source plus the per-chain pools miners draw bodies from.
#[derive(Debug)]
pub struct Workload {
    cfg: WorkloadConfig,
    ttl: f64,
    rng: ChaCha8Rng,
    next_id: u64,
    chains: Vec<ChainPath>,
    pools: BTreeMap<ChainPath, VecDeque<Pooled>>,
    pooled: HashSet<AssetId>,
    confirmed: HashSet<TxId>,
}

impl Workload {
    pub fn new(cfg: WorkloadConfig, ttl: f64, h: &HierarchyConfig, rng: ChaCha8Rng) -> Self {
        let chains = h.chains();
        Workload {
            cfg,
            ttl,
            rng,
            next_id: 1,
            pools: chains.iter().map(|c| (*c, VecDeque::new())).collect(),
            chains,
            pooled: HashSet::new(),
            confirmed: HashSet::new(),
        }
    }

    pub fn ttl(&self) -> f64 {
        self.ttl
    }

    pub fn body_cap(&self) -> usize {
        self.cfg.max_txs_per_body
    }

    pub fn next_arrival(&mut self, now: f64) -> f64 {
        now + Exp::new(self.cfg.rate).expect("positive rate").sample(&mut self.rng)
    }

    /// A transfer of a random asset that is not already pending, as the
    /// reference ledger currently sees it.
    pub fn draw(&mut self, now: f64, reference: &Ledger) -> Option<Transaction> {
        let eligible: Vec<(AssetId, ChainPath, AccountId)> = reference
            .states()
            .flat_map(|s| s.owned_assets.iter().map(move |(a, o)| (*a, s.chain, *o)))
            .filter(|(a, _, _)| !self.pooled.contains(a))
            .collect();
        if eligible.is_empty() {
            return None;
        }
        let (asset, origin, sender) = eligible[self.rng.random_range(0..eligible.len())];
        let destination = self.destination(origin);
        let tx = Transaction {
            id: TxId(self.next_id),
            origin,
            destination,
            asset,
            sender,
            new_owner: AccountId(self.rng.random_range(0..self.cfg.accounts)),
            injected_time: now,
        };
        self.next_id += 1;
        Some(tx)
    }

    fn destination(&mut self, origin: ChainPath) -> ChainPath {
        if self.rng.random::<f64>() < self.cfg.same_chain_fraction {
            return origin;
        }
        let (vertical, branch): (Vec<ChainPath>, Vec<ChainPath>) = self
            .chains
            .iter()
            .filter(|c| **c != origin)
            .partition(|c| c.is_prefix_of(&origin) || origin.is_prefix_of(c));
        let want_branch = self.rng.random::<f64>() < self.cfg.cross_branch_fraction;
        let pick = match (want_branch, branch.is_empty(), vertical.is_empty()) {
            (_, true, true) => return origin,
            (true, false, _) | (false, false, true) => &branch,
            _ => &vertical,
        };
        pick[self.rng.random_range(0..pick.len())]
    }

    pub fn submit(&mut self, tx: Transaction, now: f64) {
        self.pooled.insert(tx.asset);
        let visible = now + self.cfg.tx_delay;
        self.pools.get_mut(&tx.origin).expect("origin is a chain").push_back(Pooled { tx, visible });
    }

    /// Marks a transaction as committed so it leaves the pool.
    pub fn confirm(&mut self, tx: TxId) {
        self.confirmed.insert(tx);
    }

    pub fn pool_len(&self, chain: &ChainPath) -> usize {
        self.pools.get(chain).map_or(0, VecDeque::len)
    }

    /// Transactions on `chain` visible at `now`, oldest first, after dropping
    /// confirmed and expired ones.
    pub fn visible(&mut self, chain: &ChainPath, now: f64) -> impl Iterator<Item = &Transaction> + '_ {
        let pool = self.pools.get_mut(chain).expect("chain has a pool");
        let ttl = self.ttl;
        let confirmed = &mut self.confirmed;
        let pooled = &mut self.pooled;
        pool.retain(|p| {
            let keep = !confirmed.contains(&p.tx.id) && p.tx.injected_time + ttl >= now;
            if !keep {
                confirmed.remove(&p.tx.id);
                pooled.remove(&p.tx.asset);
            }
            keep
        });
        pool.iter().filter(move |p| p.visible <= now).map(|p| &p.tx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn cfg() -> WorkloadConfig {
        toml::from_str("rate = 1.0\nassets_per_partition = 3").unwrap()
    }

    #[test]
    fn genesis_covers_every_chain() {
        let h = HierarchyConfig::new(vec![2]).unwrap();
        let g = genesis_assets(&h, &cfg(), &mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(g.len(), 9);
        assert_eq!(g.last().unwrap().asset, AssetId(9));
    }

    #[test]
    fn drawn_assets_are_not_reused_until_confirmed() {
        let h = HierarchyConfig::new(vec![2]).unwrap();
        let g = genesis_assets(&h, &cfg(), &mut ChaCha8Rng::seed_from_u64(1));
        let ledger = Ledger::new(h.clone(), h.chains(), &g);
        let mut w = Workload::new(cfg(), 100.0, &h, ChaCha8Rng::seed_from_u64(2));
        let mut seen = HashSet::new();
        for _ in 0..9 {
            let tx = w.draw(0.0, &ledger).unwrap();
            assert!(seen.insert(tx.asset));
            w.submit(tx, 0.0);
        }
        assert!(w.draw(0.0, &ledger).is_none());
        let first = w.visible(&ChainPath::ROOT, 0.0).next().unwrap().id;
        w.confirm(first);
        assert_eq!(w.visible(&ChainPath::ROOT, 0.0).count(), 2);
        assert!(w.draw(0.0, &ledger).is_some());
    }

    #[test]
    fn expired_transactions_leave_the_pool() {
        let h = HierarchyConfig::single_chain();
        let g = genesis_assets(&h, &cfg(), &mut ChaCha8Rng::seed_from_u64(1));
        let ledger = Ledger::new(h.clone(), h.chains(), &g);
        let mut w = Workload::new(cfg(), 5.0, &h, ChaCha8Rng::seed_from_u64(2));
        let tx = w.draw(0.0, &ledger).unwrap();
        assert_eq!(tx.destination, ChainPath::ROOT);
        w.submit(tx, 0.0);
        assert_eq!(w.visible(&ChainPath::ROOT, 1.0).count(), 1);
        assert_eq!(w.visible(&ChainPath::ROOT, 6.0).count(), 0);
    }
}
