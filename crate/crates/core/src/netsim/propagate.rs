use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::graph::OverlayGraph;

#[derive(PartialEq)]
struct Item(f64, u32);

impl Eq for Item {}

impl PartialOrd for Item {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Item {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

/// Arrival time at every local node of a flood started at local node
/// `source` at time zero. Every node relays to all peers on first receipt, so
/// arrival is the shortest-path delay.
pub fn propagate(graph: &OverlayGraph, source: usize) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; graph.len()];
    let mut heap = BinaryHeap::new();
    dist[source] = 0.0;
    heap.push(Item(0.0, source as u32));
    while let Some(Item(t, u)) = heap.pop() {
        if t > dist[u as usize] {
            continue;
        }
        for &(v, w) in graph.neighbours(u as usize) {
            let nt = t + w;
            if nt < dist[v as usize] {
                dist[v as usize] = nt;
                heap.push(Item(nt, v));
            }
        }
    }
    dist
}

/// Time for a flood from `source` to reach every node.
pub fn broadcast_delay(graph: &OverlayGraph, source: usize) -> f64 {
    propagate(graph, source).into_iter().fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netsim::{generate_overlay, DelayModel, DelaySampler};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_hop() {
        let model = DelayModel::Constant { delay: 0.3 };
        let s = DelaySampler::new(&model, None).unwrap();
        let g = generate_overlay(2, 1, &s, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(broadcast_delay(&g, 0), 0.3);
    }

    #[test]
    fn ring_delay_is_eccentricity() {
        // 2-regular connected graphs are rings
        let model = DelayModel::Constant { delay: 1.0 };
        let s = DelaySampler::new(&model, None).unwrap();
        let g = generate_overlay(12, 2, &s, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        for src in 0..12 {
            assert_eq!(broadcast_delay(&g, src), 6.0);
        }
    }

    #[test]
    fn deterministic() {
        let model = DelayModel::Lognormal { mean: 1.0, sigma: 0.4 };
        let s = DelaySampler::new(&model, None).unwrap();
        let g = generate_overlay(50, 4, &s, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        assert_eq!(propagate(&g, 7), propagate(&g, 7));
    }
}
