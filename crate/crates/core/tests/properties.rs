mod common;

use proptest::prelude::*;

use sanim::greedy::{GainRule, GreedyOptions, WalkStore};
use sanim::hitting::{exact_hitting_all, first_hit_step, truncated_hitting_all};
use sanim::{ModelParams, NodeId, NodeSet, SanGraph, TransitionModel};

use common::*;

fn instance(seed: u64, min_n: usize, max_n: usize) -> (SanGraph, ModelParams, NodeSet) {
    let mut r = rng(seed);
    let g = random_graph(&mut r, min_n, max_n);
    let p = random_params(&mut r, &g, 0.5);
    let s = random_subset(&mut r, g.node_count(), 1, 3);
    (g, p, s)
}

/// From-scratch view of the recorded walks under seed set `s`.
struct Scratch {
    /// `ĥ(j, S)` for every `j`, 1 on `S`.
    h: Vec<f64>,
    score: Vec<f64>,
}

fn from_scratch(store: &WalkStore, c: f64, s: &NodeSet) -> Scratch {
    let (n, r) = (store.node_count(), store.replicates());
    let mut h = vec![0.0; n];
    let mut score = vec![0.0; n];
    for j in 0..n {
        let jn = NodeId::from_index(j);
        if s.contains(jn) {
            h[j] = 1.0;
            continue;
        }
        for rep in 0..r {
            let walk = store.walk(jn, rep).unwrap();
            let cut = walk.iter().position(|&x| s.contains(x));
            if let Some(t) = cut {
                h[j] += c.powi(t as i32 + 1) / r as f64;
            }
            let end = cut.unwrap_or(walk.len());
            let mut seen = vec![jn];
            for (t, &x) in walk[..end].iter().enumerate() {
                if !seen.contains(&x) {
                    seen.push(x);
                    score[x.index()] += c.powi(t as i32 + 1) / r as f64;
                }
            }
        }
    }
    Scratch { h, score }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn transition_rows_are_stochastic(seed in any::<u64>()) {
        let (g, p, _) = instance(seed, 2, 30);
        let m = TransitionModel::new(&g, p).unwrap();
        for i in g.nodes() {
            let row = m.transition_row(i);
            if m.is_dangling(i) {
                prop_assert!(row.is_empty());
                continue;
            }
            let sum: f64 = row.iter().map(|(_, p)| p).sum();
            prop_assert!((sum - 1.0).abs() < 1e-12, "row {} sums to {}", i, sum);
            for &(j, pij) in &row {
                prop_assert!((m.transition_prob(i, j) - pij).abs() < 1e-14);
                prop_assert!((m.influence_prob(j, i) - 0.5 * pij).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn hitting_bounds_and_monotonicity(seed in any::<u64>(), extra in any::<prop::sample::Index>()) {
        let (g, p, s) = instance(seed, 2, 30);
        let m = TransitionModel::new(&g, p).unwrap();
        let h = exact_hitting_all(&m, &s).unwrap();
        let h5 = truncated_hitting_all(&m, &s, 5);
        let u = NodeId::from_index(extra.index(g.node_count()));
        let bigger = exact_hitting_all(&m, &s.with(u)).unwrap();
        for j in 0..g.node_count() {
            prop_assert!((0.0..=1.0).contains(&h[j]));
            prop_assert!(h5[j] <= h[j] + 1e-14);
            prop_assert!(h[j] <= bigger[j] + 1e-12);
            if s.contains(NodeId::from_index(j)) {
                prop_assert_eq!(h[j], 1.0);
            }
        }
    }

    #[test]
    fn mc_walks_are_prefixes_of_recorded_walks(seed in any::<u64>()) {
        let (g, p, s) = instance(seed, 2, 20);
        let p = p.with_walk_length(6).with_replicates(8).with_seed(seed);
        let m = TransitionModel::new(&g, p).unwrap();
        let store = WalkStore::build(&m, &GreedyOptions::default()).unwrap();
        for j in g.nodes() {
            for r in 0..8 {
                let walk = store.walk(j, r).unwrap();
                let expected = walk.iter().position(|&x| s.contains(x)).map(|t| t + 1);
                prop_assert_eq!(first_hit_step(&m, j, &s, r, 6), expected);
                prop_assert_eq!(&m.sample_walk(j, &mut m.walk_rng(j, r)), &walk);
            }
        }
    }

    #[test]
    fn store_accumulators_match_recomputation(seed in any::<u64>(), picks in prop::collection::vec(any::<prop::sample::Index>(), 1..5)) {
        let mut r = rng(seed);
        let g = random_graph(&mut r, 3, 25);
        let c = 0.6;
        let p = random_params(&mut r, &g, c).with_walk_length(7).with_replicates(6).with_seed(seed);
        let m = TransitionModel::new(&g, p).unwrap();
        let mut store = WalkStore::build(&m, &GreedyOptions::default()).unwrap();
        let n = g.node_count();
        let mut s = NodeSet::empty(n);
        for pick in picks {
            let v = NodeId::from_index(pick.index(n));
            if s.contains(v) {
                continue;
            }
            store.apply_update(v).unwrap();
            s.insert(v);
            let now = from_scratch(&store, c, &s);
            let total: f64 = now.h.iter().sum();
            for u in (0..n).filter(|&u| !s.contains(NodeId::from_index(u))) {
                let un = NodeId::from_index(u);
                prop_assert!((store.hit_prob()[u] - now.h[u]).abs() < 1e-9);
                prop_assert!((store.score()[u] - now.score[u]).abs() < 1e-9);
                let factored = (1.0 - now.h[u]) * (1.0 + now.score[u]);
                prop_assert!((store.gain(un, GainRule::Factored) - factored).abs() < 1e-9);
                let with_u: f64 = from_scratch(&store, c, &s.with(un)).h.iter().sum();
                prop_assert!((store.gain(un, GainRule::Direct) - (with_u - total)).abs() < 1e-9);
            }
        }
    }
}
