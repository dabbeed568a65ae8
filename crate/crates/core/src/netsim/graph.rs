use std::collections::{BTreeMap, HashSet, VecDeque};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::delay::DelaySampler;
use super::NetError;

/// Graph generation gives up after this many attempts.
pub const MAX_ATTEMPTS: usize = 100;

/// Undirected d-regular gossip overlay over a set of nodes. Node indices in
/// `adjacency` are local; `nodes` maps them to global node ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlayGraph {
    nodes: Vec<u32>,
    degree: usize,
    adjacency: Vec<Vec<(u32, f64)>>,
}

impl OverlayGraph {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Global id of local node `i`.
    pub fn node(&self, i: usize) -> u32 {
        self.nodes[i]
    }

    pub fn nodes(&self) -> &[u32] {
        &self.nodes
    }

    /// Neighbours of local node `i` with link delays.
    pub fn neighbours(&self, i: usize) -> &[(u32, f64)] {
        &self.adjacency[i]
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(a, adj)| adj.iter().filter(move |(b, _)| a < *b as usize).map(move |&(b, w)| (a, b as usize, w)))
    }

    pub fn mean_link_delay(&self) -> f64 {
        let (sum, n) = self.edges().fold((0.0, 0usize), |(s, n), (_, _, w)| (s + w, n + 1));
        if n == 0 {
            0.0
        } else {
            sum / n as f64
        }
    }

    pub fn is_connected(&self) -> bool {
        if self.nodes.len() <= 1 {
            return true;
        }
        let mut seen = vec![false; self.nodes.len()];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = queue.pop_front() {
            for &(v, _) in &self.adjacency[u] {
                if !seen[v as usize] {
                    seen[v as usize] = true;
                    count += 1;
                    queue.push_back(v as usize);
                }
            }
        }
        count == self.nodes.len()
    }
}

/// Connected random `d`-regular overlay on nodes `0..n` with independent link
/// delays.
pub fn generate_overlay<R: Rng + ?Sized>(
    n: usize,
    d: usize,
    delays: &DelaySampler<'_>,
    rng: &mut R,
) -> Result<OverlayGraph, NetError> {
    let nodes: Vec<u32> = (0..n as u32).collect();
    generate_overlay_on(&nodes, d, delays, rng)
}

/// Connected random `d`-regular overlay spanning `nodes` (global ids).
pub fn generate_overlay_on<R: Rng + ?Sized>(
    nodes: &[u32],
    d: usize,
    delays: &DelaySampler<'_>,
    rng: &mut R,
) -> Result<OverlayGraph, NetError> {
    let n = nodes.len();
    if n == 1 && d == 0 {
        return Ok(OverlayGraph { nodes: nodes.to_vec(), degree: 0, adjacency: vec![Vec::new()] });
    }
    if d == 0 || n <= d || (n * d) % 2 == 1 {
        return Err(NetError::InfeasibleDegree { n, d });
    }
    for _ in 0..MAX_ATTEMPTS {
        let edges = if d == n - 1 {
            (0..n).flat_map(|a| ((a + 1)..n).map(move |b| (a, b))).collect()
        } else {
            match pair_stubs(n, d, rng) {
                Some(e) => e,
                None => continue,
            }
        };
        let mut adjacency = vec![Vec::with_capacity(d); n];
        for (a, b) in edges {
            let w = delays.sample(rng, nodes[a], nodes[b]);
            adjacency[a].push((b as u32, w));
            adjacency[b].push((a as u32, w));
        }
        let g = OverlayGraph { nodes: nodes.to_vec(), degree: d, adjacency };
        if g.is_connected() {
            return Ok(g);
        }
    }
    Err(NetError::GenerationFailed { n, d, attempts: MAX_ATTEMPTS })
}

/// One attempt of the stub-pairing construction: shuffle `n * d` stubs, pair
/// them off, retry the leftovers while a simple edge is still possible.
fn pair_stubs<R: Rng + ?Sized>(n: usize, d: usize, rng: &mut R) -> Option<Vec<(usize, usize)>> {
    let mut edges: HashSet<(usize, usize)> = HashSet::with_capacity(n * d / 2);
    let mut order: Vec<(usize, usize)> = Vec::with_capacity(n * d / 2);
    let mut stubs: Vec<usize> = (0..n).flat_map(|v| std::iter::repeat_n(v, d)).collect();
    while !stubs.is_empty() {
        let mut leftover: BTreeMap<usize, usize> = BTreeMap::new();
        stubs.shuffle(rng);
        for pair in stubs.chunks_exact(2) {
            let (a, b) = (pair[0].min(pair[1]), pair[0].max(pair[1]));
            if a != b && edges.insert((a, b)) {
                order.push((a, b));
            } else {
                *leftover.entry(a).or_default() += 1;
                *leftover.entry(b).or_default() += 1;
            }
        }
        if !leftover.is_empty() {
            let keys: Vec<usize> = leftover.keys().copied().collect();
            let pairable = keys
                .iter()
                .enumerate()
                .any(|(i, &a)| keys[i + 1..].iter().any(|&b| !edges.contains(&(a, b))));
            if !pairable {
                return None;
            }
        }
        stubs = leftover.into_iter().flat_map(|(v, k)| std::iter::repeat_n(v, k)).collect();
    }
    Some(order)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netsim::DelayModel;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn constant(delay: f64) -> DelayModel {
        DelayModel::Constant { delay }
    }

    #[test]
    fn regular_and_connected() {
        let model = constant(0.5);
        let s = DelaySampler::new(&model, None).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = generate_overlay(100, 8, &s, &mut rng).unwrap();
        assert!(g.is_connected());
        for i in 0..g.len() {
            assert_eq!(g.neighbours(i).len(), 8);
            let mut peers: Vec<u32> = g.neighbours(i).iter().map(|x| x.0).collect();
            peers.sort();
            peers.dedup();
            assert_eq!(peers.len(), 8, "no multi-edges");
            assert!(!peers.contains(&(i as u32)), "no self loops");
        }
        assert!(g.edges().all(|(_, _, w)| w == 0.5));
    }

    #[test]
    fn n_minus_one_is_complete() {
        let model = constant(1.0);
        let s = DelaySampler::new(&model, None).unwrap();
        let g = generate_overlay(10, 9, &s, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(g.edges().count(), 45);
    }

    #[test]
    fn infeasible_degrees() {
        let model = constant(1.0);
        let s = DelaySampler::new(&model, None).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(generate_overlay(8, 8, &s, &mut rng), Err(NetError::InfeasibleDegree { .. })));
        assert!(matches!(generate_overlay(9, 3, &s, &mut rng), Err(NetError::InfeasibleDegree { .. })));
    }

    #[test]
    fn lognormal_link_mean() {
        let model = DelayModel::Lognormal { mean: 0.2, sigma: 0.5 };
        let s = DelaySampler::new(&model, None).unwrap();
        let g = generate_overlay(1000, 8, &s, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        let m = g.mean_link_delay();
        assert!((m - 0.2).abs() < 0.05 * 0.2, "{m}");
    }
}
