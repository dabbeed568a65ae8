//! Randomized fixtures and slow reference implementations for tests.
//!
//! Everything here favours obviousness over speed: the fork-choice oracle
//! enumerates every candidate tip and walks full paths, and the ledger oracle
//! replays each canonical chain from genesis with settlement points computed
//! directly from canonical positions.

use std::cmp::Reverse;
use std::collections::{BTreeMap, HashMap, HashSet};
use std::sync::Arc;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::consensus::{Block, BlockForest, BlockId, InvalidReason};
use crate::hierarchy::{ChainPath, HierarchyConfig};
use crate::hlcr::{recompute_view, CanonicalView};
use crate::ledger::{AccountId, AssetId, GenesisAsset, Ledger, Transaction, TxId};

/// Assets above this id never exist.
const BAD_ASSETS: u64 = 1_000_000;

/// Knobs for [`random_forest`].
#[derive(Debug, Clone, PartialEq)]
pub struct ForestSpec {
    pub branching: Vec<u16>,
    pub blocks: usize,
    /// Cumulative per-order probabilities, root first; the last is 1.
    pub thresholds: Vec<f64>,
    /// Chance that a lower-order predecessor is picked without regard to
    /// coincidence consistency.
    pub stray_rate: f64,
    /// Expected transactions per body.
    pub tx_rate: f64,
    /// Chance that a transaction spends an asset that never existed.
    pub bad_tx_rate: f64,
    pub assets_per_chain: usize,
    /// Blocks may be delivered up to this many positions late.
    pub reorder: usize,
}

impl ForestSpec {
    pub fn structural(branching: Vec<u16>, blocks: usize) -> Self {
        let orders = branching.len() + 1;
        ForestSpec {
            thresholds: (0..orders).map(|r| 0.5f64.powi((orders - 1 - r) as i32 * 2)).collect(),
            branching,
            blocks,
            stray_rate: 0.05,
            tx_rate: 0.0,
            bad_tx_rate: 0.0,
            assets_per_chain: 0,
            reorder: 6,
        }
    }

    pub fn with_transactions(mut self, tx_rate: f64, bad_tx_rate: f64, assets_per_chain: usize) -> Self {
        self.tx_rate = tx_rate;
        self.bad_tx_rate = bad_tx_rate;
        self.assets_per_chain = assets_per_chain;
        self
    }
}

#[derive(Debug, Clone)]
pub struct RandomForest {
    pub hierarchy: HierarchyConfig,
    pub genesis: Vec<GenesisAsset>,
    /// In creation order; block `i` has id `i + 1`.
    pub blocks: Vec<Arc<Block>>,
    /// Delivery order as indices into `blocks`.
    pub delivery: Vec<usize>,
}

impl RandomForest {
    /// Blocks in delivery order with their receive times.
    pub fn deliveries(&self) -> impl Iterator<Item = (Arc<Block>, f64)> + '_ {
        self.delivery.iter().enumerate().map(|(t, &i)| (self.blocks[i].clone(), t as f64))
    }
}

/// Builds a random block forest. Most blocks extend recent tips; a few are
/// structurally inconsistent, and a few carry transactions that can never
/// be valid. Each genesis asset is spent at most once across the forest, so
/// transaction validity does not depend on which fork wins.
pub fn random_forest(spec: &ForestSpec, seed: u64) -> RandomForest {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = HierarchyConfig::new(spec.branching.clone()).expect("valid branching");
    let chains = h.chains();
    let leaves = h.leaves();
    let mut genesis = Vec::new();
    for c in &chains {
        for _ in 0..spec.assets_per_chain {
            let asset = AssetId(genesis.len() as u64 + 1);
            genesis.push(GenesisAsset { asset, chain: *c, owner: AccountId(rng.random_range(0..8)) });
        }
    }
    let mut unspent: BTreeMap<ChainPath, Vec<GenesisAsset>> = BTreeMap::new();
    for g in &genesis {
        unspent.entry(g.chain).or_default().push(*g);
    }
    let mut builder = BlockForest::new(h.num_orders(), chains.clone());
    let mut view = CanonicalView::new(&builder);
    let mut members: BTreeMap<ChainPath, Vec<BlockId>> = chains.iter().map(|c| (*c, vec![BlockId::GENESIS])).collect();
    let mut blocks = Vec::new();
    let mut next_tx = 1;
    let mut bad_asset = BAD_ASSETS;
    let p_leaf = *spec.thresholds.last().expect("non-empty");

    for i in 0..spec.blocks {
        let leaf = *leaves.choose(&mut rng).expect("at least one leaf");
        let u = rng.random::<f64>() * p_leaf;
        let achieved = spec.thresholds.iter().position(|&p| u < p).map_or(leaf.order(), |k| k + 1);
        let mut predecessors = Vec::new();
        for k in achieved..=leaf.order() {
            let chain = leaf.ancestor_at(k).expect("in slice");
            let pool = &members[&chain];
            let pick = if k == achieved {
                match rng.random_range(0..10) {
                    0..5 => view.tip(&chain),
                    5..8 => *pool[pool.len().saturating_sub(8)..].choose(&mut rng).expect("non-empty"),
                    _ => *pool.choose(&mut rng).expect("non-empty"),
                }
            } else if rng.random::<f64>() < spec.stray_rate {
                *pool.choose(&mut rng).expect("non-empty")
            } else {
                let prev = *predecessors.last().expect("set above");
                let anchor = builder.lcc(prev, &chain);
                let fits: Vec<BlockId> = pool.iter().copied().filter(|&b| builder.lcp(b, &chain) == anchor).collect();
                if rng.random_bool(0.5) {
                    *fits.iter().max_by_key(|&&b| builder.height(b, &chain)).expect("anchor fits")
                } else {
                    *fits.choose(&mut rng).expect("anchor fits")
                }
            };
            predecessors.push(pick);
        }
        let mut bodies = Vec::new();
        for k in achieved..=leaf.order() {
            let chain = leaf.ancestor_at(k).expect("in slice");
            let mut body = Vec::new();
            while spec.tx_rate > 0.0 && rng.random::<f64>() < spec.tx_rate / (1.0 + spec.tx_rate) {
                let tx = if rng.random::<f64>() < spec.bad_tx_rate {
                    bad_asset += 1;
                    Transaction {
                        id: TxId(next_tx),
                        origin: chain,
                        destination: chain,
                        asset: AssetId(bad_asset),
                        sender: AccountId(0),
                        new_owner: AccountId(1),
                        injected_time: i as f64,
                    }
                } else {
                    let Some(pool) = unspent.get_mut(&chain).filter(|p| !p.is_empty()) else { break };
                    let g = pool.swap_remove(rng.random_range(0..pool.len()));
                    let destination = if rng.random_bool(0.3) { chain } else { *chains.choose(&mut rng).expect("chains") };
                    Transaction {
                        id: TxId(next_tx),
                        origin: chain,
                        destination,
                        asset: g.asset,
                        sender: g.owner,
                        new_owner: AccountId(rng.random_range(0..8)),
                        injected_time: i as f64,
                    }
                };
                next_tx += 1;
                body.push(tx);
            }
            bodies.push(body);
        }
        let rollup = builder.compute_rollup(leaf, achieved, &predecessors, &bodies);
        let block = Arc::new(Block {
            id: BlockId(i as u64 + 1),
            leaf,
            achieved_order: achieved,
            predecessors,
            bodies,
            rollup,
            found_time: i as f64,
            miner: 0,
            malformed: false,
        });
        builder.admit(block.clone(), i as f64);
        let spends_nothing = block.bodies.iter().flatten().any(|tx| tx.asset.0 > BAD_ASSETS);
        if spends_nothing {
            // nobody builds on it, but replicas still get to reject it
            builder.mark_invalid(block.id, InvalidReason::InvalidTransaction);
        }
        if builder.is_valid(block.id) {
            for c in block.member_chains() {
                members.get_mut(&c).expect("chain").push(block.id);
            }
        }
        recompute_view(&builder, &mut view);
        blocks.push(block);
    }

    let mut keyed: Vec<(f64, usize)> =
        (0..blocks.len()).map(|i| (i as f64 + rng.random::<f64>() * spec.reorder as f64, i)).collect();
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0));
    RandomForest { hierarchy: h, genesis, blocks, delivery: keyed.into_iter().map(|(_, i)| i).collect() }
}

/// Canonical chain of every tracked chain, chosen by enumerating all valid
/// tips and keeping, per chain, the heaviest whose path holds exactly the
/// parent-canonical blocks shared with the parent.
pub fn brute_force_canonical(forest: &BlockForest) -> BTreeMap<ChainPath, Vec<BlockId>> {
    let mut out: BTreeMap<ChainPath, Vec<BlockId>> = BTreeMap::new();
    for &chain in forest.tracked() {
        let required: Option<HashSet<BlockId>> = chain.parent().ok().map(|p| {
            out[&p].iter().copied().filter(|&b| is_member(forest, b, &chain)).collect()
        });
        let mut best: Option<(usize, f64, BlockId, Vec<BlockId>)> = None;
        let candidates = std::iter::once(BlockId::GENESIS)
            .chain(forest.blocks().map(|b| b.id))
            .filter(|&b| forest.is_valid(b) && is_member(forest, b, &chain));
        for tip in candidates {
            let Some(path) = path_to_genesis(forest, tip, &chain) else { continue };
            if let (Some(req), Ok(parent)) = (&required, chain.parent()) {
                let shared: HashSet<BlockId> = path.iter().copied().filter(|&b| is_member(forest, b, &parent)).collect();
                if shared != *req {
                    continue;
                }
            }
            let (len, rec) = (path.len(), forest.received(tip));
            let better = best.as_ref().is_none_or(|(blen, brec, bid, _)| {
                len > *blen || (len == *blen && (rec < *brec || (rec == *brec && tip < *bid)))
            });
            if better {
                best = Some((len, rec, tip, path));
            }
        }
        let mut path = best.expect("genesis is always a candidate").3;
        path.reverse();
        out.insert(chain, path);
    }
    out
}

fn is_member(forest: &BlockForest, id: BlockId, chain: &ChainPath) -> bool {
    id == BlockId::GENESIS || forest.get(id).is_some_and(|b| b.is_member(chain))
}

/// Tip-first path in `chain`, or `None` if some block on it is invalid.
fn path_to_genesis(forest: &BlockForest, tip: BlockId, chain: &ChainPath) -> Option<Vec<BlockId>> {
    let mut path = vec![tip];
    let mut cur = tip;
    while cur != BlockId::GENESIS {
        let b = forest.get(cur)?;
        cur = b.predecessor_at(chain.order())?;
        if cur != BlockId::GENESIS && !forest.is_valid(cur) {
            return None;
        }
        path.push(cur);
    }
    Some(path)
}

/// Ledger contents as replayed by [`naive_ledger`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NaiveLedger {
    pub owners: BTreeMap<ChainPath, BTreeMap<AssetId, AccountId>>,
    /// Debited transfers not yet credited, per asset.
    pub in_flight: BTreeMap<AssetId, i64>,
    /// First canonical body transaction that does not apply, if any.
    pub invalid: Option<(ChainPath, BlockId, TxId)>,
}

impl NaiveLedger {
    /// Differences from a live ledger, as readable lines.
    pub fn diff(&self, ledger: &Ledger) -> Vec<String> {
        let mut out = Vec::new();
        for (chain, owners) in &self.owners {
            let Some(s) = ledger.state(chain) else { continue };
            if s.owned_assets != *owners {
                out.push(format!("{chain}: expected {owners:?}, ledger has {:?}", s.owned_assets));
            }
        }
        let live: BTreeMap<AssetId, i64> =
            ledger.in_flight().iter().filter(|(_, n)| **n != 0).map(|(a, n)| (*a, *n)).collect();
        if live != self.in_flight {
            out.push(format!("in flight: expected {:?}, ledger has {live:?}", self.in_flight));
        }
        out
    }
}

/// Replays every canonical chain from genesis. A cross-chain transfer
/// committed at `Y` on its origin is credited at the destination block
/// that completes its settlement path: the first block at or after `Y` on
/// the origin that is shared with the relay chain, then (unless the
/// destination is the relay) the first destination block shared with the
/// relay that comes strictly later on the relay.
pub fn naive_ledger(
    forest: &BlockForest,
    canonical: &BTreeMap<ChainPath, Vec<BlockId>>,
    genesis: &[GenesisAsset],
) -> NaiveLedger {
    let pos: HashMap<ChainPath, HashMap<BlockId, usize>> = canonical
        .iter()
        .map(|(c, list)| (*c, list.iter().enumerate().map(|(i, b)| (*b, i)).collect()))
        .collect();
    let member = |b: BlockId, c: &ChainPath| is_member(forest, b, c);

    type Key = (Reverse<usize>, ChainPath, usize, usize);
    let mut credits: HashMap<(ChainPath, BlockId), Vec<(Key, Transaction)>> = HashMap::new();
    let mut result = NaiveLedger::default();
    for (origin, list) in canonical {
        for (y_pos, &y) in list.iter().enumerate().skip(1) {
            let block = forest.get(y).expect("canonical block is stored");
            for (i, tx) in block.body_at(origin.order()).iter().enumerate() {
                if !tx.is_cross_chain() {
                    continue;
                }
                *result.in_flight.entry(tx.asset).or_default() += 1;
                let relay = tx.ancestor();
                let dest = tx.destination;
                let (Some(relay_pos), Some(dest_list)) = (pos.get(&relay), canonical.get(&dest)) else { continue };
                let link1 = list[y_pos..].iter().copied().find(|&b| member(b, &relay));
                let Some(link1) = link1 else { continue };
                let settle = if dest == relay {
                    Some(link1)
                } else {
                    let p1 = relay_pos[&link1];
                    dest_list.iter().copied().find(|&b| member(b, &relay) && relay_pos.get(&b).is_some_and(|&p| p > p1))
                };
                if let Some(x) = settle {
                    let key = (Reverse(origin.order()), *origin, y_pos, i);
                    credits.entry((dest, x)).or_default().push((key, tx.clone()));
                }
            }
        }
    }

    for (chain, list) in canonical {
        let mut owners: BTreeMap<AssetId, AccountId> =
            genesis.iter().filter(|g| g.chain == *chain).map(|g| (g.asset, g.owner)).collect();
        for &x in &list[1..] {
            if let Some(mut inbound) = credits.remove(&(*chain, x)) {
                inbound.sort_by_key(|a| a.0);
                for (_, tx) in inbound {
                    owners.insert(tx.asset, tx.new_owner);
                    *result.in_flight.entry(tx.asset).or_default() -= 1;
                }
            }
            let block = forest.get(x).expect("canonical block is stored");
            let mut moved = HashSet::new();
            for tx in block.body_at(chain.order()) {
                let ok = owners.get(&tx.asset) == Some(&tx.sender) && moved.insert(tx.asset);
                if !ok {
                    result.invalid.get_or_insert((*chain, x, tx.id));
                    continue;
                }
                if tx.is_cross_chain() {
                    owners.remove(&tx.asset);
                } else {
                    owners.insert(tx.asset, tx.new_owner);
                }
            }
        }
        result.owners.insert(*chain, owners);
    }
    result.in_flight.retain(|_, n| *n != 0);
    result
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generator_is_deterministic_and_mostly_valid() {
        let spec = ForestSpec::structural(vec![2, 2], 120);
        let a = random_forest(&spec, 9);
        let b = random_forest(&spec, 9);
        assert_eq!(a.delivery, b.delivery);
        assert_eq!(a.blocks.len(), 120);
        let mut f = BlockForest::new(3, a.hierarchy.chains());
        for (blk, t) in a.deliveries() {
            f.admit(blk, t);
        }
        assert_eq!(f.orphan_count(), 0);
        let valid = f.blocks().filter(|b| f.is_valid(b.id)).count();
        assert!(valid > 90, "{valid} valid");
    }

    #[test]
    fn oracle_agrees_on_a_single_chain() {
        let mut f = BlockForest::new(1, [ChainPath::ROOT]);
        let mk = |id: u64, pred: u64| Block {
            id: BlockId(id),
            leaf: ChainPath::ROOT,
            achieved_order: 1,
            predecessors: vec![BlockId(pred)],
            bodies: vec![Vec::new()],
            rollup: Vec::new(),
            found_time: 0.0,
            miner: 0,
            malformed: false,
        };
        f.admit(mk(1, 0), 1.0);
        f.admit(mk(2, 0), 0.5);
        f.admit(mk(3, 2), 2.0);
        let c = brute_force_canonical(&f);
        assert_eq!(c[&ChainPath::ROOT], vec![BlockId(0), BlockId(2), BlockId(3)]);
    }
}
