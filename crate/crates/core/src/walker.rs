//! Two-step random walk on the hypergraph.
//!
//! From user `i` the walker first picks a channel: direct friendship links with
//! weight `1 − Σ_t α_it`, or activity type `t` with weight `α_it`. It then picks a
//! uniform hyperedge of that type containing `i` (or a uniform neighbour for the
//! direct channel) and finally a uniform co-member other than `i`. The resulting
//! one-step probability is
//!
//! ```text
//! p_ij = (1 − Σ_t α_it)/|N(i)| · 1{j ∈ N(i)}
//!      + Σ_t Σ_{e ∈ ℰ_t(i)} α_it/|ℰ_t(i)| · 1/|M_e(i)| · 1{j ∈ M_e(i)}
//! ```
//!
//! Channels with positive weight but no members are dropped and the remaining
//! weights renormalised. A node whose usable channels all have zero weight is
//! dangling: the walk stops there.

use rand::Rng;

use crate::error::{Error, Result};
use crate::hypergraph::{HyperedgeId, NodeId, SanGraph};
use crate::stream::{self, Domain, StreamRng};

pub const MAX_WALK_LENGTH: usize = u16::MAX as usize - 1;

/// Slack allowed on `Σ_t α_jt ≤ 1` for weights read from text.
const WEIGHT_SUM_SLACK: f64 = 1e-12;

/// Per-node, per-type activity weights `α_jt`.
#[derive(Debug, Clone, PartialEq)]
pub enum ActivityWeights {
    /// The same `α_t` for every node, one entry per activity type.
    Uniform(Vec<f64>),
    /// Row-major `node_count × types`.
    PerNode { types: usize, values: Vec<f64> },
}

impl ActivityWeights {
    /// One `α` broadcast to every node of a single-type network.
    pub fn scalar(alpha: f64) -> Self {
        ActivityWeights::Uniform(vec![alpha])
    }

    pub fn types(&self) -> usize {
        match self {
            ActivityWeights::Uniform(v) => v.len(),
            ActivityWeights::PerNode { types, .. } => *types,
        }
    }

    pub fn row(&self, j: NodeId) -> &[f64] {
        match self {
            ActivityWeights::Uniform(v) => v,
            ActivityWeights::PerNode { types, values } => {
                &values[j.index() * types..(j.index() + 1) * types]
            }
        }
    }

    pub fn validate(&self, node_count: usize, activity_types: usize) -> Result<()> {
        if self.types() != activity_types {
            return Err(Error::param(format!(
                "activity weights cover {} type(s), graph has {}",
                self.types(),
                activity_types
            )));
        }
        if let ActivityWeights::PerNode { types, values } = self {
            if values.len() != node_count * types {
                return Err(Error::param(format!(
                    "per-node activity weights have {} entries, expected {}",
                    values.len(),
                    node_count * types
                )));
            }
        }
        let rows: Box<dyn Iterator<Item = &[f64]>> = match self {
            ActivityWeights::Uniform(v) => Box::new(std::iter::once(v.as_slice())),
            ActivityWeights::PerNode { types, values } => Box::new(values.chunks((*types).max(1))),
        };
        for row in rows {
            if row.iter().any(|a| !a.is_finite() || *a < 0.0) {
                return Err(Error::param(
                    "activity weights must be finite and non-negative",
                ));
            }
            let sum: f64 = row.iter().sum();
            if sum > 1.0 + WEIGHT_SUM_SLACK {
                return Err(Error::param(format!("activity weights sum to {sum} > 1")));
            }
        }
        Ok(())
    }
}

/// Model and sampling parameters shared by every estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    /// Decay `c`, strictly between 0 and 1.
    pub decay: f64,
    pub activity_weights: ActivityWeights,
    /// Walk length `L`.
    pub walk_length: usize,
    /// Walks per start node `R`.
    pub replicates: usize,
    pub seed: u64,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            decay: 0.5,
            activity_weights: ActivityWeights::scalar(0.0),
            walk_length: 10,
            replicates: 100,
            seed: 0,
        }
    }
}

impl ModelParams {
    pub fn new(decay: f64, alpha: f64) -> Self {
        ModelParams {
            decay,
            activity_weights: ActivityWeights::scalar(alpha),
            ..Default::default()
        }
    }

    pub fn with_walk_length(mut self, l: usize) -> Self {
        self.walk_length = l;
        self
    }

    pub fn with_replicates(mut self, r: usize) -> Self {
        self.replicates = r;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_weights(mut self, w: ActivityWeights) -> Self {
        self.activity_weights = w;
        self
    }

    /// Checks everything that does not depend on a graph.
    pub fn validate(&self) -> Result<()> {
        if !(self.decay > 0.0 && self.decay < 1.0) {
            return Err(Error::param(format!(
                "decay c = {} must lie in (0, 1)",
                self.decay
            )));
        }
        if self.replicates == 0 || self.replicates > u32::MAX as usize {
            return Err(Error::param(format!(
                "replicates R = {} out of range",
                self.replicates
            )));
        }
        if self.walk_length > MAX_WALK_LENGTH {
            return Err(Error::param(format!(
                "walk length L = {} exceeds {MAX_WALK_LENGTH}",
                self.walk_length
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    DirectEdge,
    Activity {
        activity_type: u32,
        hyperedge: HyperedgeId,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TransitionStep {
    pub from: NodeId,
    pub to: NodeId,
    pub channel: Channel,
}

/// A graph bound to validated parameters, with effective channel weights precomputed.
#[derive(Debug, Clone)]
pub struct TransitionModel<'g> {
    graph: &'g SanGraph,
    params: ModelParams,
    stride: usize,
    weights: Vec<f64>,
    powers: Vec<f64>,
}

impl<'g> TransitionModel<'g> {
    pub fn new(graph: &'g SanGraph, params: ModelParams) -> Result<Self> {
        params.validate()?;
        let l = graph.activity_types() as usize;
        params.activity_weights.validate(graph.node_count(), l)?;

        let stride = l + 1;
        let mut weights = vec![0.0; graph.node_count() * stride];
        for (j, w) in graph.nodes().zip(weights.chunks_exact_mut(stride)) {
            let alpha = params.activity_weights.row(j);
            w[0] = (1.0 - alpha.iter().sum::<f64>()).max(0.0);
            w[1..].copy_from_slice(alpha);
            let mut lost = false;
            if graph.neighbors(j).is_empty() && w[0] > 0.0 {
                w[0] = 0.0;
                lost = true;
            }
            for t in 1..stride {
                if w[t] > 0.0 && graph.incident(j, t as u32).is_empty() {
                    w[t] = 0.0;
                    lost = true;
                }
            }
            if lost {
                let total: f64 = w.iter().sum();
                if total > 0.0 {
                    w.iter_mut().for_each(|x| *x /= total);
                }
            }
        }
        let powers = (0..=params.walk_length.max(1))
            .map(|t| params.decay.powi(t as i32))
            .collect();
        Ok(TransitionModel {
            graph,
            params,
            stride,
            weights,
            powers,
        })
    }

    pub fn graph(&self) -> &'g SanGraph {
        self.graph
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn decay(&self) -> f64 {
        self.params.decay
    }

    pub fn node_count(&self) -> usize {
        self.graph.node_count()
    }

    /// `c^t` for `t ≤ L`.
    #[inline]
    pub fn decay_pow(&self, t: usize) -> f64 {
        self.powers
            .get(t)
            .copied()
            .unwrap_or_else(|| self.params.decay.powi(t as i32))
    }

    /// Effective weights after renormalisation: index 0 is the direct channel,
    /// index `t` is activity type `t`.
    #[inline]
    pub fn channel_weights(&self, i: NodeId) -> &[f64] {
        &self.weights[i.index() * self.stride..(i.index() + 1) * self.stride]
    }

    pub fn is_dangling(&self, i: NodeId) -> bool {
        self.channel_weights(i).iter().all(|&w| w == 0.0)
    }

    /// One-step probability `p_ij`.
    pub fn transition_prob(&self, i: NodeId, j: NodeId) -> f64 {
        let w = self.channel_weights(i);
        let mut p = 0.0;
        if w[0] > 0.0 {
            let nb = self.graph.neighbors(i);
            if nb.binary_search(&j).is_ok() {
                p += w[0] / nb.len() as f64;
            }
        }
        if i == j {
            return p;
        }
        for t in 1..self.stride {
            if w[t] == 0.0 {
                continue;
            }
            let inc = self.graph.incident(i, t as u32);
            let share = w[t] / inc.len() as f64;
            for &e in inc {
                let e = self.graph.hyperedge(e);
                if e.contains(j) {
                    p += share / (e.len() - 1) as f64;
                }
            }
        }
        p
    }

    /// `g_ij = c · p_ji`: probability that `i` activates `j`.
    pub fn influence_prob(&self, i: NodeId, j: NodeId) -> f64 {
        self.params.decay * self.transition_prob(j, i)
    }

    /// Non-zero entries of row `i` of the transition matrix, sorted by target.
    pub fn transition_row(&self, i: NodeId) -> Vec<(NodeId, f64)> {
        let w = self.channel_weights(i);
        let mut row: Vec<(NodeId, f64)> = Vec::new();
        if w[0] > 0.0 {
            let nb = self.graph.neighbors(i);
            let p = w[0] / nb.len() as f64;
            row.extend(nb.iter().map(|&j| (j, p)));
        }
        for t in 1..self.stride {
            if w[t] == 0.0 {
                continue;
            }
            let inc = self.graph.incident(i, t as u32);
            let share = w[t] / inc.len() as f64;
            for &e in inc {
                let e = self.graph.hyperedge(e);
                let p = share / (e.len() - 1) as f64;
                row.extend(e.members().iter().filter(|&&m| m != i).map(|&m| (m, p)));
            }
        }
        row.sort_by_key(|&(j, _)| j);
        let mut merged: Vec<(NodeId, f64)> = Vec::with_capacity(row.len());
        for (j, p) in row {
            match merged.last_mut() {
                Some((last, acc)) if *last == j => *acc += p,
                _ => merged.push((j, p)),
            }
        }
        merged
    }

    /// Samples one transition from `i`; `None` if `i` is dangling.
    ///
    /// The channel is chosen by scanning the effective weights and subtracting
    /// each from a uniform draw until the draw falls at or below a weight.
    pub fn sample_step<R: Rng + ?Sized>(&self, i: NodeId, rng: &mut R) -> Option<TransitionStep> {
        let w = self.channel_weights(i);
        let mut x: f64 = rng.random();
        let mut chosen = None;
        let mut last = None;
        for (t, &wt) in w.iter().enumerate() {
            if wt <= 0.0 {
                continue;
            }
            last = Some(t);
            if x <= wt {
                chosen = Some(t);
                break;
            }
            x -= wt;
        }
        // Rounding can leave x just above the final weight.
        let t = chosen.or(last)?;
        if t == 0 {
            let nb = self.graph.neighbors(i);
            let to = nb[rng.random_range(0..nb.len())];
            return Some(TransitionStep {
                from: i,
                to,
                channel: Channel::DirectEdge,
            });
        }
        let inc = self.graph.incident_spans(i, t as u32);
        let span = inc[rng.random_range(0..inc.len())];
        let mut k = rng.random_range(0..span.len - 1);
        if k >= span.pos {
            k += 1;
        }
        Some(TransitionStep {
            from: i,
            to: self.graph.member_pool()[span.start + k as usize],
            channel: Channel::Activity {
                activity_type: t as u32,
                hyperedge: span.edge,
            },
        })
    }

    /// Positions `j^(1) .. j^(len)` of a walk from `start`, appended to `out`.
    /// Stops early at a dangling node. Returns the number of positions written.
    pub fn walk_into<R: Rng + ?Sized>(
        &self,
        start: NodeId,
        len: usize,
        rng: &mut R,
        out: &mut Vec<NodeId>,
    ) -> usize {
        let mut at = start;
        for t in 0..len {
            match self.sample_step(at, rng) {
                Some(step) => {
                    out.push(step.to);
                    at = step.to;
                }
                None => return t,
            }
        }
        len
    }

    /// An `L`-step walk from `start` (stopping-at-S is left to the caller).
    pub fn sample_walk<R: Rng + ?Sized>(&self, start: NodeId, rng: &mut R) -> Vec<NodeId> {
        let mut out = Vec::with_capacity(self.params.walk_length);
        self.walk_into(start, self.params.walk_length, rng, &mut out);
        out
    }

    /// Runs walks `replicates` from `start` step by step together, so that the
    /// memory accesses of different walks overlap. `visit(r, t, node)` sees
    /// position `t ≥ 1` of walk `r` and returns whether the walk goes on. A walk
    /// also ends at a dangling node or after `len` steps. Each walk draws from
    /// its own stream, so the positions equal those of [`Self::sample_walk`].
    pub(crate) fn walk_lockstep(
        &self,
        start: NodeId,
        replicates: std::ops::Range<usize>,
        len: usize,
        scratch: &mut Lockstep,
        mut visit: impl FnMut(usize, usize, NodeId) -> bool,
    ) {
        const AHEAD: usize = 16;
        let Lockstep { rngs, live } = scratch;
        rngs.clear();
        live.clear();
        for (k, r) in replicates.enumerate() {
            rngs.push(self.walk_rng(start, r));
            live.push((r, k, start));
        }
        for t in 1..=len {
            let m = live.len();
            let mut keep = 0;
            for k in 0..m {
                if k + AHEAD < m {
                    self.graph.prefetch_lists(live[k + AHEAD].2);
                }
                if k + AHEAD / 2 < m {
                    self.graph.prefetch_members(live[k + AHEAD / 2].2);
                }
                let (r, slot, at) = live[k];
                if let Some(step) = self.sample_step(at, &mut rngs[slot]) {
                    self.prefetch_node(step.to);
                    if visit(r, t, step.to) {
                        live[keep] = (r, slot, step.to);
                        keep += 1;
                    }
                }
            }
            live.truncate(keep);
            if live.is_empty() {
                break;
            }
        }
    }

    #[inline]
    fn prefetch_node(&self, i: NodeId) {
        crate::hypergraph::prefetch(&self.weights[i.index() * self.stride]);
        self.graph.prefetch_offsets(i);
    }

    /// The random stream for walk `replicate` from `start` under this model's seed.
    pub fn walk_rng(&self, start: NodeId, replicate: usize) -> StreamRng {
        stream::stream(self.params.seed, Domain::Walk, start.0, replicate as u32)
    }
}

/// Reusable buffers for [`TransitionModel::walk_lockstep`].
#[derive(Debug, Default)]
pub(crate) struct Lockstep {
    rngs: Vec<StreamRng>,
    live: Vec<(usize, usize, NodeId)>,
}
