use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::NetError;
use crate::hierarchy::{ChainPath, HierarchyConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PartitionPolicy {
    /// Nodes are shuffled and dealt evenly across leaves.
    #[default]
    Uniform,
    /// Nodes close in latent space share sub-networks: the node set is split
    /// recursively at coordinate quantiles, one split per order.
    LatencyAffinity,
}

/// Leaf chain each node mines on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubnetworkAssignment {
    membership: Vec<ChainPath>,
}

impl SubnetworkAssignment {
    pub fn from_membership(membership: Vec<ChainPath>) -> Self {
        SubnetworkAssignment { membership }
    }

    pub fn len(&self) -> usize {
        self.membership.len()
    }

    pub fn is_empty(&self) -> bool {
        self.membership.is_empty()
    }

    pub fn leaf(&self, node: u32) -> ChainPath {
        self.membership[node as usize]
    }

    pub fn membership(&self) -> &[ChainPath] {
        &self.membership
    }

    /// Nodes of the sub-network operating `chain`, ascending.
    pub fn members(&self, chain: &ChainPath) -> Vec<u32> {
        (0..self.membership.len() as u32)
            .filter(|&i| chain.is_prefix_of(&self.membership[i as usize]))
            .collect()
    }

    /// Sub-network size per chain.
    pub fn sizes(&self) -> BTreeMap<ChainPath, usize> {
        let mut out = BTreeMap::new();
        for leaf in &self.membership {
            for c in leaf.prefixes() {
                *out.entry(c).or_default() += 1;
            }
        }
        out
    }
}

pub fn partition_network<R: Rng + ?Sized>(
    nodes: usize,
    hierarchy: &HierarchyConfig,
    policy: PartitionPolicy,
    positions: Option<&[Vec<f64>]>,
    rng: &mut R,
) -> Result<SubnetworkAssignment, NetError> {
    let leaves = hierarchy.leaves();
    if nodes < leaves.len() {
        return Err(NetError::TooFewNodes { nodes, leaves: leaves.len() });
    }
    let mut membership = vec![ChainPath::ROOT; nodes];
    match policy {
        PartitionPolicy::Uniform => {
            let mut ids: Vec<usize> = (0..nodes).collect();
            ids.shuffle(rng);
            for (k, chunk) in even_chunks(&ids, leaves.len()).into_iter().enumerate() {
                for &i in chunk {
                    membership[i] = leaves[k];
                }
            }
        }
        PartitionPolicy::LatencyAffinity => {
            let pos = positions.ok_or(NetError::MissingPositions)?;
            let ids: Vec<usize> = (0..nodes).collect();
            split(&ids, ChainPath::ROOT, hierarchy, pos, &mut membership);
        }
    }
    Ok(SubnetworkAssignment { membership })
}

fn even_chunks<T>(items: &[T], parts: usize) -> Vec<&[T]> {
    let n = items.len();
    (0..parts).map(|k| &items[k * n / parts..(k + 1) * n / parts]).collect()
}

fn split(ids: &[usize], chain: ChainPath, h: &HierarchyConfig, pos: &[Vec<f64>], out: &mut [ChainPath]) {
    let children = h.children(&chain);
    if children.is_empty() {
        for &i in ids {
            out[i] = chain;
        }
        return;
    }
    // cut along the dimension with the widest spread
    let dims = pos.first().map_or(0, Vec::len);
    let axis = (0..dims)
        .max_by(|&a, &b| spread(ids, pos, a).total_cmp(&spread(ids, pos, b)))
        .unwrap_or(0);
    let mut sorted = ids.to_vec();
    sorted.sort_by(|&a, &b| pos[a][axis].total_cmp(&pos[b][axis]).then(a.cmp(&b)));
    for (child, chunk) in children.iter().zip(even_chunks(&sorted, children.len())) {
        split(chunk, *child, h, pos, out);
    }
}

fn spread(ids: &[usize], pos: &[Vec<f64>], axis: usize) -> f64 {
    let (lo, hi) = ids
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| (lo.min(pos[i][axis]), hi.max(pos[i][axis])));
    hi - lo
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netsim::latent_positions;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn uniform_split_is_even() {
        let h = HierarchyConfig::new(vec![2, 2]).unwrap();
        let a = partition_network(400, &h, PartitionPolicy::Uniform, None, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        for leaf in h.leaves() {
            assert_eq!(a.members(&leaf).len(), 100);
        }
        let sizes = a.sizes();
        assert_eq!(sizes[&ChainPath::ROOT], 400);
        assert_eq!(sizes[&"1.2".parse().unwrap()], 200);
    }

    #[test]
    fn single_leaf_is_degenerate() {
        let h = HierarchyConfig::single_chain();
        let a = partition_network(7, &h, PartitionPolicy::Uniform, None, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert!(a.membership().iter().all(|c| *c == ChainPath::ROOT));
    }

    #[test]
    fn too_few_nodes() {
        let h = HierarchyConfig::new(vec![4]).unwrap();
        let r = partition_network(3, &h, PartitionPolicy::Uniform, None, &mut ChaCha8Rng::seed_from_u64(0));
        assert!(matches!(r, Err(NetError::TooFewNodes { .. })));
    }

    #[test]
    fn affinity_groups_nearby_nodes() {
        let h = HierarchyConfig::new(vec![4]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let pos = latent_positions(400, 2, &mut rng);
        let a = partition_network(400, &h, PartitionPolicy::LatencyAffinity, Some(&pos), &mut rng).unwrap();
        let dist = |i: u32, j: u32| {
            let (p, q) = (&pos[i as usize], &pos[j as usize]);
            ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt()
        };
        let mean_pairwise = |ids: &[u32]| {
            let mut s = 0.0;
            let mut n = 0;
            for (k, &i) in ids.iter().enumerate() {
                for &j in &ids[k + 1..] {
                    s += dist(i, j);
                    n += 1;
                }
            }
            s / n as f64
        };
        let all: Vec<u32> = (0..400).collect();
        let global = mean_pairwise(&all);
        for leaf in h.leaves() {
            let m = a.members(&leaf);
            assert_eq!(m.len(), 100);
            assert!(mean_pairwise(&m) < global);
        }
    }
}
