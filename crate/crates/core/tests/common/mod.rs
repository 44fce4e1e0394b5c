#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sanim::ingest::SynthConfig;
use sanim::{ActivityWeights, ModelParams, NodeId, NodeSet, SanGraph};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random SAN with `min_n..=max_n` nodes, mixing directed/undirected graphs,
/// one or two activity types and sparse-to-moderate densities.
pub fn random_graph(rng: &mut ChaCha8Rng, min_n: usize, max_n: usize) -> SanGraph {
    let n = rng.random_range(min_n..=max_n);
    let types = rng.random_range(1..=2u32);
    SynthConfig::new(
        n,
        rng.random_range(0.05..0.35),
        rng.random_range(0..=8),
        rng.random_range(0.1..0.4),
        rng.random(),
    )
    .directed(rng.random_bool(0.5))
    .activity_types(types)
    .generate()
    .unwrap()
}

/// Activity weights summing to at most 1, occasionally exactly 0 or 1.
pub fn random_weights(rng: &mut ChaCha8Rng, types: u32) -> ActivityWeights {
    let total = match rng.random_range(0..6) {
        0 => 0.0,
        1 => 1.0,
        _ => rng.random_range(0.0..1.0),
    };
    let raw: Vec<f64> = (0..types).map(|_| rng.random_range(0.1..1.0)).collect();
    let sum: f64 = raw.iter().sum();
    ActivityWeights::Uniform(raw.iter().map(|x| total * x / sum).collect())
}

pub fn random_params(rng: &mut ChaCha8Rng, g: &SanGraph, decay: f64) -> ModelParams {
    ModelParams::new(decay, 0.0).with_weights(random_weights(rng, g.activity_types()))
}

pub fn random_subset(rng: &mut ChaCha8Rng, n: usize, min: usize, max: usize) -> NodeSet {
    let size = rng.random_range(min..=max.min(n));
    let mut nodes: Vec<usize> = (0..n).collect();
    for k in 0..size {
        let pick = rng.random_range(k..n);
        nodes.swap(k, pick);
    }
    NodeSet::from_nodes(n, nodes[..size].iter().map(|&v| NodeId::from_index(v))).unwrap()
}

pub fn node_outside(rng: &mut ChaCha8Rng, s: &NodeSet) -> Option<NodeId> {
    let rest: Vec<usize> = (0..s.universe())
        .filter(|&v| !s.contains(NodeId::from_index(v)))
        .collect();
    if rest.is_empty() {
        None
    } else {
        Some(NodeId::from_index(rest[rng.random_range(0..rest.len())]))
    }
}
