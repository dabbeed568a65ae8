use blockreduce_core::hlcr::{recompute_view, CanonicalView};
use blockreduce_core::sim::Replica;
use blockreduce_core::testkit::{brute_force_canonical, naive_ledger, random_forest, ForestSpec};
use blockreduce_core::BlockForest;
use proptest::prelude::*;

const SHAPES: [&[u16]; 4] = [&[], &[2], &[2, 2], &[3, 1, 2]];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn incremental_fork_choice_matches_brute_force(seed in any::<u64>(), shape in 0..SHAPES.len(), n in 10usize..160) {
        let rf = random_forest(&ForestSpec::structural(SHAPES[shape].to_vec(), n), seed);
        let mut forest = BlockForest::new(rf.hierarchy.num_orders(), rf.hierarchy.chains());
        let mut view = CanonicalView::new(&forest);
        for (step, (block, t)) in rf.deliveries().enumerate() {
            forest.admit(block, t);
            recompute_view(&forest, &mut view);
            if step % 10 == 9 || step + 1 == n {
                for (chain, expected) in brute_force_canonical(&forest) {
                    prop_assert_eq!(view.canonical(&chain), expected.as_slice(), "step {} chain {}", step, chain);
                }
            }
        }
    }

    #[test]
    fn slice_replicas_agree_with_full_replicas(seed in any::<u64>(), n in 10usize..160) {
        // a slice replica cannot check links on chains it does not track, so
        // only consistent forests are expected to agree
        let spec = ForestSpec { stray_rate: 0.0, ..ForestSpec::structural(vec![2, 2], n) };
        let rf = random_forest(&spec, seed);
        let mut full = Replica::full(&rf.hierarchy, &[]);
        let mut slices: Vec<Replica> =
            rf.hierarchy.leaves().into_iter().map(|l| Replica::for_slice(&rf.hierarchy, l, &[])).collect();
        for (block, t) in rf.deliveries() {
            full.receive(block.clone(), t);
            for s in &mut slices {
                s.receive(block.clone(), t);
            }
        }
        for s in &slices {
            for chain in s.view().chains() {
                prop_assert_eq!(s.view().canonical(chain), full.view().canonical(chain));
            }
        }
    }

    #[test]
    fn replica_ledger_matches_naive_replay(seed in any::<u64>(), shape in 0..SHAPES.len(), n in 10usize..160) {
        let spec = ForestSpec::structural(SHAPES[shape].to_vec(), n).with_transactions(1.0, 0.03, 12);
        let rf = random_forest(&spec, seed);
        let mut replica = Replica::full(&rf.hierarchy, &rf.genesis);
        for (block, t) in rf.deliveries() {
            replica.receive(block, t);
        }
        let canonical = brute_force_canonical(replica.forest());
        for (chain, list) in &canonical {
            prop_assert_eq!(replica.view().canonical(chain), list.as_slice());
        }
        let naive = naive_ledger(replica.forest(), &canonical, &rf.genesis);
        prop_assert_eq!(naive.invalid, None);
        let diff = naive.diff(replica.ledger());
        prop_assert!(diff.is_empty(), "{:#?}", diff);
    }
}
