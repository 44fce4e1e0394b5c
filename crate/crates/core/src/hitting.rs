//! Decayed hitting probability `h(j, S)` and influence centrality `I(S)`.
//!
//! `h(j, S) = 1` for `j ∈ S`, otherwise `Σ_i c·p_ji·h(i, S)`. With `Q` the
//! transitions inside `V − S` and `Q'` the transitions from `V − S` into `S`,
//!
//! ```text
//! h(j, S) = c·e_jᵀ (I − cQ)⁻¹ Q' e = Σ_{t ≥ 1} c^t · e_jᵀ Q^{t−1} Q' e
//! ```
//!
//! Three evaluators are provided: a dense direct solve (small graphs only, used
//! as the reference), the `L`-term partial sum computed by sparse propagation,
//! and the Monte Carlo estimator that averages `c^t` over `R` walks stopped at
//! their first entry into `S`. Keeping `L` terms loses at most `c^{L+1}/(1 − c)`;
//! the Monte Carlo error exceeds `ε` with probability at most
//! `2L·exp(−2(1 − c)²ε²R)`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::greedy::LOCKSTEP_BATCH;
use crate::hypergraph::{NodeId, NodeSet};
use crate::walker::{Lockstep, TransitionModel};

/// Node-count ceiling for the dense solver.
pub const EXACT_NODE_LIMIT: usize = 2000;

/// Below this many walk steps `mc_hitting` stays on the calling thread.
const PARALLEL_STEP_THRESHOLD: usize = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HittingMethod {
    Exact,
    TruncatedExact,
    MonteCarlo,
}

impl HittingMethod {
    pub fn name(self) -> &'static str {
        match self {
            HittingMethod::Exact => "exact",
            HittingMethod::TruncatedExact => "truncated",
            HittingMethod::MonteCarlo => "mc",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HittingEstimate {
    pub value: f64,
    pub method: HittingMethod,
    pub walk_length: usize,
    /// Set for Monte Carlo estimates only.
    pub replicates: Option<usize>,
}

/// Target accuracy `ε` and failure probability `δ`, both in `(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorBudget {
    epsilon: f64,
    delta: f64,
}

impl ErrorBudget {
    pub fn new(epsilon: f64, delta: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 1.0) || !(delta > 0.0 && delta < 1.0) {
            return Err(Error::param(format!(
                "error budget needs 0 < ε, δ < 1 (got ε = {epsilon}, δ = {delta})"
            )));
        }
        Ok(ErrorBudget { epsilon, delta })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }
}

fn check_decay(c: f64) -> Result<()> {
    if c > 0.0 && c < 1.0 {
        Ok(())
    } else {
        Err(Error::param(format!("decay c = {c} must lie in (0, 1)")))
    }
}

/// Smallest `L` with `c^{L+1}/(1 − c) ≤ ε`, i.e. `⌈log(ε − εc)/log c⌉ − 1` clamped at 0.
pub fn required_walk_length(c: f64, epsilon: f64) -> Result<usize> {
    check_decay(c)?;
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::param(format!("ε = {epsilon} must lie in (0, 1]")));
    }
    let tail = |l: usize| c.powi(l as i32 + 1) / (1.0 - c);
    let raw = ((epsilon * (1.0 - c)).ln() / c.ln()).ceil() - 1.0;
    let mut l = if raw > 0.0 { raw as usize } else { 0 };
    // The closed form can be off by one in floating point; settle on the exact minimum.
    while tail(l) > epsilon {
        l += 1;
    }
    while l > 0 && tail(l - 1) <= epsilon {
        l -= 1;
    }
    Ok(l)
}

/// Smallest `R ≥ 1` with `R ≥ log(2L/δ) / (2(1 − c)²ε²)`.
pub fn required_replicates(c: f64, walk_length: usize, budget: ErrorBudget) -> Result<usize> {
    check_decay(c)?;
    if walk_length == 0 {
        return Ok(1);
    }
    let eps = budget.epsilon();
    let bound =
        (2.0 * walk_length as f64 / budget.delta()).ln() / (2.0 * (1.0 - c).powi(2) * eps * eps);
    Ok(if bound <= 1.0 {
        1
    } else {
        bound.ceil() as usize
    })
}

/// Splits a total budget evenly between truncation and sampling error and returns `(L, R)`.
pub fn split_budget(c: f64, total: ErrorBudget) -> Result<(usize, usize)> {
    let half = total.epsilon() / 2.0;
    let l = required_walk_length(c, half)?;
    let r = required_replicates(c, l, ErrorBudget::new(half, total.delta())?)?;
    Ok((l, r))
}

/// Decayed first-passage values `E[c^τ; τ < σ]` for every node, where `τ` is the first
/// step at which the walk is in `targets` and `σ` the first step in `avoid`.
/// Nodes in `targets` get 1, nodes only in `avoid` get 0.
///
/// With `avoid = ∅` this is `h(·, targets)`; with `targets = {u}` and `avoid = S` it is
/// `Σ_h c^h P^S(·, {u}, h)`.
pub fn first_passage_exact(
    model: &TransitionModel<'_>,
    targets: &NodeSet,
    avoid: &NodeSet,
) -> Result<Vec<f64>> {
    let n = model.node_count();
    if n > EXACT_NODE_LIMIT {
        return Err(Error::GraphTooLarge {
            node_count: n,
            limit: EXACT_NODE_LIMIT,
        });
    }
    let mut out: Vec<f64> = (0..n)
        .map(|j| {
            if targets.contains(NodeId::from_index(j)) {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    if targets.is_empty() {
        return Ok(out);
    }
    let transient: Vec<NodeId> = model
        .graph()
        .nodes()
        .filter(|&j| !targets.contains(j) && !avoid.contains(j))
        .collect();
    let m = transient.len();
    if m == 0 {
        return Ok(out);
    }
    let mut slot = vec![usize::MAX; n];
    for (k, &j) in transient.iter().enumerate() {
        slot[j.index()] = k;
    }
    let c = model.decay();
    let mut a = DMatrix::<f64>::identity(m, m);
    let mut b = DVector::<f64>::zeros(m);
    for (row, &j) in transient.iter().enumerate() {
        for (i, p) in model.transition_row(j) {
            if targets.contains(i) {
                b[row] += c * p;
            } else if slot[i.index()] != usize::MAX {
                a[(row, slot[i.index()])] -= c * p;
            }
        }
    }
    let x = a
        .lu()
        .solve(&b)
        .expect("I - cQ is strictly diagonally dominant for c < 1");
    for (k, &j) in transient.iter().enumerate() {
        out[j.index()] = x[k];
    }
    Ok(out)
}

/// `h(j, S)` for every node by dense solve.
pub fn exact_hitting_all(model: &TransitionModel<'_>, s: &NodeSet) -> Result<Vec<f64>> {
    first_passage_exact(model, s, &NodeSet::empty(model.node_count()))
}

/// Infinite-horizon `h(j, S)`. `h(j, ∅)` is taken to be 0.
pub fn exact_hitting(model: &TransitionModel<'_>, j: NodeId, s: &NodeSet) -> Result<f64> {
    model.graph().check_node(j)?;
    if s.contains(j) {
        return Ok(1.0);
    }
    Ok(exact_hitting_all(model, s)?[j.index()])
}

/// The partial sum `h^L(j, S)` for every node, by `L` sparse matrix-vector products.
pub fn truncated_hitting_all(
    model: &TransitionModel<'_>,
    s: &NodeSet,
    walk_length: usize,
) -> Vec<f64> {
    let n = model.node_count();
    let mut h: Vec<f64> = (0..n)
        .map(|j| {
            if s.contains(NodeId::from_index(j)) {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    if s.is_empty() || walk_length == 0 {
        return h;
    }
    // Rows restricted to V − S, plus the one-step mass into S.
    let mut offsets = Vec::with_capacity(n + 1);
    offsets.push(0usize);
    let mut cols: Vec<u32> = Vec::new();
    let mut vals: Vec<f64> = Vec::new();
    let mut x = vec![0.0; n];
    for j in model.graph().nodes() {
        if !s.contains(j) {
            for (i, p) in model.transition_row(j) {
                if s.contains(i) {
                    x[j.index()] += p;
                } else {
                    cols.push(i.0);
                    vals.push(p);
                }
            }
        }
        offsets.push(cols.len());
    }
    let c = model.decay();
    let mut ct = 1.0;
    let mut next = vec![0.0; n];
    for t in 1..=walk_length {
        ct *= c;
        for j in 0..n {
            h[j] += ct * x[j];
        }
        if t == walk_length {
            break;
        }
        for j in 0..n {
            let mut acc = 0.0;
            for k in offsets[j]..offsets[j + 1] {
                acc += vals[k] * x[cols[k] as usize];
            }
            next[j] = acc;
        }
        std::mem::swap(&mut x, &mut next);
    }
    h
}

/// `h^L(j, S)`, the first `L` terms of the series.
pub fn truncated_hitting(
    model: &TransitionModel<'_>,
    j: NodeId,
    s: &NodeSet,
    walk_length: usize,
) -> f64 {
    if s.contains(j) {
        return 1.0;
    }
    truncated_hitting_all(model, s, walk_length)[j.index()]
}

/// First step `t ∈ 1..=L` at which walk `replicate` from `j` is in `S`.
///
/// Uses the same random stream as [`TransitionModel::sample_walk`] for that
/// `(j, replicate)`, so the walk seen here is a prefix of the recorded one.
pub fn first_hit_step(
    model: &TransitionModel<'_>,
    j: NodeId,
    s: &NodeSet,
    replicate: usize,
    walk_length: usize,
) -> Option<usize> {
    let mut rng = model.walk_rng(j, replicate);
    let mut at = j;
    for t in 1..=walk_length {
        at = model.sample_step(at, &mut rng)?.to;
        if s.contains(at) {
            return Some(t);
        }
    }
    None
}

/// Monte Carlo estimate `ĥ^L(j, S)` using the model's `L`, `R` and seed.
pub fn mc_hitting(model: &TransitionModel<'_>, j: NodeId, s: &NodeSet) -> HittingEstimate {
    let p = model.params();
    let (l, r) = (p.walk_length, p.replicates);
    let value = if s.contains(j) {
        1.0
    } else if s.is_empty() || l == 0 {
        0.0
    } else {
        // Walks are run in lockstep batches; each stops at its first entry into S.
        let tally =
            |mut counts: Vec<u64>, lockstep: &mut Lockstep, reps: std::ops::Range<usize>| {
                model.walk_lockstep(j, reps, l, lockstep, |_, t, v| {
                    let hit = s.contains(v);
                    if hit {
                        counts[t] += 1;
                    }
                    !hit
                });
                counts
            };
        let batches = (0..r)
            .step_by(LOCKSTEP_BATCH)
            .map(|lo| lo..(lo + LOCKSTEP_BATCH).min(r));
        let counts = if r * l >= PARALLEL_STEP_THRESHOLD {
            batches
                .collect::<Vec<_>>()
                .into_par_iter()
                .fold(
                    || (vec![0u64; l + 1], Lockstep::default()),
                    |(c, mut ls), reps| (tally(c, &mut ls, reps), ls),
                )
                .map(|(c, _)| c)
                .reduce(
                    || vec![0u64; l + 1],
                    |mut a, b| {
                        a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                        a
                    },
                )
        } else {
            let mut ls = Lockstep::default();
            batches.fold(vec![0u64; l + 1], |c, reps| tally(c, &mut ls, reps))
        };
        estimate_from_counts(model, &counts, r)
    };
    HittingEstimate {
        value,
        method: HittingMethod::MonteCarlo,
        walk_length: l,
        replicates: Some(r),
    }
}

/// `Σ_t c^t · counts[t] / R`, the estimator shared by every walk-based path.
pub(crate) fn estimate_from_counts(
    model: &TransitionModel<'_>,
    counts: &[u64],
    replicates: usize,
) -> f64 {
    let total: f64 = counts
        .iter()
        .enumerate()
        .skip(1)
        .map(|(t, &k)| model.decay_pow(t) * k as f64)
        .sum();
    total / replicates as f64
}

/// `I(S) = |S| + Σ_{j ∉ S} h(j, S)` by dense solve.
pub fn influence_centrality_exact(model: &TransitionModel<'_>, s: &NodeSet) -> Result<f64> {
    if s.is_empty() {
        return Ok(0.0);
    }
    let h = exact_hitting_all(model, s)?;
    Ok(h.iter().sum())
}

/// `I(S)` with every `h(j, S)` estimated by [`mc_hitting`].
pub fn influence_centrality_mc(model: &TransitionModel<'_>, s: &NodeSet) -> f64 {
    if s.is_empty() {
        return 0.0;
    }
    let rest: f64 = model
        .graph()
        .nodes()
        .filter(|&j| !s.contains(j))
        .map(|j| mc_hitting(model, j, s).value)
        .sum();
    s.len() as f64 + rest
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypergraph::build_graph;
    use crate::walker::ModelParams;
    use approx::assert_relative_eq;

    fn n(v: u32) -> NodeId {
        NodeId(v)
    }

    fn triangle() -> crate::SanGraph {
        build_graph(3, [(n(0), n(1)), (n(1), n(2)), (n(2), n(0))], [], false).unwrap()
    }

    /// Sums c^t · P(first hit at t) over every path of length ≤ depth.
    fn enumerate_paths(model: &TransitionModel<'_>, j: NodeId, s: &NodeSet, depth: usize) -> f64 {
        fn go(
            m: &TransitionModel<'_>,
            at: NodeId,
            s: &NodeSet,
            t: usize,
            depth: usize,
            prob: f64,
        ) -> f64 {
            if t > depth {
                return 0.0;
            }
            let mut acc = 0.0;
            for (i, p) in m.transition_row(at) {
                let q = prob * p;
                if s.contains(i) {
                    acc += m.decay().powi(t as i32) * q;
                } else {
                    acc += go(m, i, s, t + 1, depth, q);
                }
            }
            acc
        }
        go(model, j, s, 1, depth, 1.0)
    }

    #[test]
    fn triangle_exact_is_one_third() {
        let g = triangle();
        let m = TransitionModel::new(&g, ModelParams::new(0.5, 0.0)).unwrap();
        let s = NodeSet::from_nodes(3, [n(0)]).unwrap();
        let h = exact_hitting(&m, n(1), &s).unwrap();
        assert_relative_eq!(h, 1.0 / 3.0, epsilon = 1e-14);
        // Depth-30 path enumeration is within c^31/(1-c) of the limit.
        let brute = enumerate_paths(&m, n(1), &s, 30);
        assert!((brute - 1.0 / 3.0).abs() < 1e-9);
        assert_relative_eq!(
            influence_centrality_exact(&m, &s).unwrap(),
            5.0 / 3.0,
            epsilon = 1e-14
        );
    }

    #[test]
    fn member_and_unreachable_cases() {
        let g = build_graph(4, [(n(0), n(1)), (n(2), n(3))], [], false).unwrap();
        let m = TransitionModel::new(&g, ModelParams::new(0.5, 0.0)).unwrap();
        let s = NodeSet::from_nodes(4, [n(0)]).unwrap();
        assert_eq!(exact_hitting(&m, n(0), &s).unwrap(), 1.0);
        assert_eq!(exact_hitting(&m, n(2), &s).unwrap(), 0.0);
        assert_eq!(
            influence_centrality_exact(&m, &NodeSet::empty(4)).unwrap(),
            0.0
        );
        assert_eq!(
            influence_centrality_exact(&m, &NodeSet::full(4)).unwrap(),
            4.0
        );
    }

    #[test]
    fn truncated_terms() {
        let g = triangle();
        let m = TransitionModel::new(&g, ModelParams::new(0.5, 0.0)).unwrap();
        let s = NodeSet::from_nodes(3, [n(0)]).unwrap();
        assert_eq!(truncated_hitting(&m, n(1), &s, 0), 0.0);
        assert_relative_eq!(truncated_hitting(&m, n(1), &s, 1), 0.25);
        // Second term: 1 → 2 → 0 with prob 1/4, weight c² = 1/4.
        assert_relative_eq!(truncated_hitting(&m, n(1), &s, 2), 0.25 + 0.0625);
        let exact = 1.0 / 3.0;
        for l in 0..25 {
            let d = exact - truncated_hitting(&m, n(1), &s, l);
            assert!(d >= -1e-15 && d <= 0.5f64.powi(l as i32 + 1) / 0.5 + 1e-15);
        }
    }

    #[test]
    fn too_large_for_dense_solver() {
        let g = build_graph(EXACT_NODE_LIMIT + 1, [], [], false).unwrap();
        let m = TransitionModel::new(&g, ModelParams::new(0.5, 0.0)).unwrap();
        let s = NodeSet::from_nodes(g.node_count(), [n(0)]).unwrap();
        assert!(matches!(
            exact_hitting(&m, n(1), &s),
            Err(Error::GraphTooLarge { .. })
        ));
    }

    #[test]
    fn walk_length_formula() {
        assert_eq!(required_walk_length(0.5, 0.01).unwrap(), 7);
        assert_eq!(required_walk_length(0.5, 1.0).unwrap(), 0);
        assert!(required_walk_length(1.0, 0.1).is_err());
        for &c in &[0.1, 0.3, 0.5, 0.7, 0.9] {
            for &eps in &[0.5, 0.1, 1e-3, 1e-6] {
                let l = required_walk_length(c, eps).unwrap();
                assert!(c.powi(l as i32 + 1) / (1.0 - c) <= eps);
                let formula = (((eps - eps * c).ln() / c.ln()).ceil() - 1.0).max(0.0) as usize;
                assert!(l.abs_diff(formula) <= 1);
            }
        }
    }

    #[test]
    fn replicate_formula() {
        let b = ErrorBudget::new(0.1, 0.05).unwrap();
        assert_eq!(required_replicates(0.5, 7, b).unwrap(), 1127);
        let near_one = ErrorBudget::new(0.99, 0.999_999).unwrap();
        assert_eq!(required_replicates(0.01, 1, near_one).unwrap(), 1);
        let r1 = required_replicates(0.5, 7, ErrorBudget::new(0.05, 0.05).unwrap()).unwrap();
        let r2 = required_replicates(0.5, 7, ErrorBudget::new(0.1, 0.05).unwrap()).unwrap();
        assert!((r1 as i64 - 4 * r2 as i64).abs() <= 4);
        assert!(ErrorBudget::new(0.0, 0.5).is_err());
        assert!(ErrorBudget::new(0.5, 1.0).is_err());
    }

    #[test]
    fn mc_deterministic_hit() {
        let g = triangle();
        let m = TransitionModel::new(&g, ModelParams::new(0.5, 0.0).with_replicates(50)).unwrap();
        let s = NodeSet::from_nodes(3, [n(0), n(2)]).unwrap();
        let est = mc_hitting(&m, n(1), &s);
        assert_eq!(est.value, 0.5);
        assert_eq!(est.replicates, Some(50));
        assert_eq!(mc_hitting(&m, n(0), &s).value, 1.0);
        assert_eq!(mc_hitting(&m, n(1), &NodeSet::empty(3)).value, 0.0);
    }

    #[test]
    fn mc_close_to_exact_on_triangle() {
        let g = triangle();
        let m = TransitionModel::new(
            &g,
            ModelParams::new(0.5, 0.0)
                .with_walk_length(30)
                .with_replicates(100_000)
                .with_seed(3),
        )
        .unwrap();
        let s = NodeSet::from_nodes(3, [n(0)]).unwrap();
        let est = mc_hitting(&m, n(1), &s);
        assert!((est.value - 1.0 / 3.0).abs() < 0.01, "{}", est.value);
        assert_eq!(mc_hitting(&m, n(1), &s), est);
    }
}
