//! Influence measurement and maximization on social-activity networks.
//!
//! A social-activity network (SAN) is a hypergraph of users, user-user links
//! and typed activity hyperedges. Influence of a seed set `S` is measured by the
//! influence centrality `I(S) = Σ_j h(j, S)`, where `h(j, S)` is the decayed
//! probability that a two-step hypergraph random walk from `j` hits `S`.
//!
//! Modules:
//! - [`hypergraph`]: the network model and its neighbourhood/incidence queries.
//! - [`walker`]: transition probabilities and the walk sampler.
//! - [`hitting`]: exact, truncated and Monte Carlo `h(j, S)`, plus the `L`/`R` bound calculators.
//! - [`greedy`]: baseline and walk-reuse greedy seed selection.
//! - [`cascade`]: independent-cascade spread simulation and the weighted-graph export.
//! - [`ingest`]: TSV loading, BFS extraction, synthetic generators and graph files.

pub mod cascade;
pub mod error;
pub mod greedy;
pub mod hitting;
pub mod hypergraph;
pub mod ingest;
pub mod stream;
pub mod walker;

pub use error::{Error, Result};
pub use hypergraph::{
    build_graph, GraphBuilder, Hyperedge, HyperedgeId, NodeId, NodeSet, SanGraph,
};
pub use walker::{ActivityWeights, ModelParams, TransitionModel};
