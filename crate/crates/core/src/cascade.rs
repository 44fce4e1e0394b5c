//! Independent cascade simulation on a SAN, and the SAN → weighted digraph transform.
//!
//! A newly active node `i` gets one chance to activate each inactive `j` with
//! probability `g_ij = c·p_ji`. The SAN simulator derives its coins from
//! `(seed, simulation, i, j)`, so two seed sets simulated with the same config
//! see identical coins (paired comparison).

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hypergraph::{NodeId, NodeSet, SanGraph};
use crate::stream::{self, Domain};
use crate::walker::{ModelParams, TransitionModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CascadeConfig {
    simulations: usize,
    rng_seed: u64,
}

impl CascadeConfig {
    pub fn new(simulations: usize, rng_seed: u64) -> Result<Self> {
        if simulations == 0 {
            return Err(Error::param("at least one cascade simulation is required"));
        }
        Ok(CascadeConfig {
            simulations,
            rng_seed,
        })
    }

    pub fn simulations(&self) -> usize {
        self.simulations
    }

    pub fn rng_seed(&self) -> u64 {
        self.rng_seed
    }
}

impl Default for CascadeConfig {
    fn default() -> Self {
        CascadeConfig {
            simulations: 1000,
            rng_seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpreadEstimate {
    pub mean_spread: f64,
    pub std_error: f64,
    pub simulations: usize,
}

impl SpreadEstimate {
    fn from_sizes(sizes: &[usize]) -> Self {
        let m = sizes.len() as f64;
        let mean = sizes.iter().map(|&x| x as f64).sum::<f64>() / m;
        let std_error = if sizes.len() > 1 {
            let var = sizes
                .iter()
                .map(|&x| (x as f64 - mean).powi(2))
                .sum::<f64>()
                / (m - 1.0);
            (var / m).sqrt()
        } else {
            0.0
        };
        SpreadEstimate {
            mean_spread: mean,
            std_error,
            simulations: sizes.len(),
        }
    }
}

fn seed_mask(node_count: usize, s: &NodeSet) -> Result<()> {
    if s.is_empty() {
        return Err(Error::param("seed set must be nonempty"));
    }
    if s.universe() != node_count {
        return Err(Error::param(format!(
            "seed set is over {} nodes but the graph has {node_count}",
            s.universe()
        )));
    }
    Ok(())
}

/// Runs one cascade. `targets(i)` lists `(j, g_ij)`; `coin(i, j)` draws the activation coin.
fn cascade<'a, T, C>(
    n: usize,
    s: &NodeSet,
    targets: T,
    mut coin: C,
    active: &mut Vec<bool>,
    frontier: &mut Vec<u32>,
) -> usize
where
    T: Fn(usize) -> &'a [(u32, f64)],
    C: FnMut(usize, usize) -> f64,
{
    active.clear();
    active.resize(n, false);
    frontier.clear();
    for &v in s.members() {
        active[v.index()] = true;
        frontier.push(v.0);
    }
    let mut head = 0;
    while head < frontier.len() {
        let i = frontier[head] as usize;
        head += 1;
        for &(j, g) in targets(i) {
            let j = j as usize;
            if !active[j] && coin(i, j) < g {
                active[j] = true;
                frontier.push(j as u32);
            }
        }
    }
    frontier.len()
}

/// Influence arcs gathered from the SAN structure: for each `i`, every `j` with `i ∈ N(j)`
/// or sharing an activity with `i`, weighted `c·p_ji`.
fn influence_lists(model: &TransitionModel<'_>) -> Vec<Vec<(u32, f64)>> {
    let g = model.graph();
    g.nodes()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|i| {
            let mut cand: Vec<NodeId> = g.influenced(i).to_vec();
            for &e in g.memberships(i) {
                cand.extend(g.hyperedge(e).members().iter().copied().filter(|&j| j != i));
            }
            cand.sort_unstable();
            cand.dedup();
            cand.into_iter()
                .filter_map(|j| {
                    let w = model.influence_prob(i, j);
                    (w > 0.0).then_some((j.0, w))
                })
                .collect()
        })
        .collect()
}

/// Mean final active-set size over `cfg.simulations` cascades seeded by `S`.
pub fn simulate_spread(
    g: &SanGraph,
    params: &ModelParams,
    s: &NodeSet,
    cfg: &CascadeConfig,
) -> Result<SpreadEstimate> {
    seed_mask(g.node_count(), s)?;
    let model = TransitionModel::new(g, params.clone())?;
    let lists = influence_lists(&model);
    let n = g.node_count();
    let seed = cfg.rng_seed;
    let sizes: Vec<usize> = (0..cfg.simulations)
        .into_par_iter()
        .map_init(
            || (Vec::new(), Vec::new()),
            |(active, frontier), sim| {
                cascade(
                    n,
                    s,
                    |i| lists[i].as_slice(),
                    |i, j| stream::hashed_unit(seed, sim as u64, i as u64, j as u64),
                    active,
                    frontier,
                )
            },
        )
        .collect();
    Ok(SpreadEstimate::from_sizes(&sizes))
}

/// `[σ(SAN) − σ(OSN)] / σ(OSN)`.
pub fn improvement_ratio(sigma_san: f64, sigma_osn: f64) -> Result<f64> {
    if sigma_osn == 0.0 {
        return Err(Error::ZeroDenominator);
    }
    if !(sigma_osn > 0.0) {
        return Err(Error::param(format!(
            "baseline spread {sigma_osn} must be positive"
        )));
    }
    Ok((sigma_san - sigma_osn) / sigma_osn)
}

/// Directed graph with arc activation probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGraph {
    node_count: usize,
    offsets: Vec<usize>,
    arcs: Vec<(u32, f64)>,
}

impl WeightedGraph {
    /// Builds from `(src, dst, weight)` triples. Weights must lie in `[0, 1]`;
    /// repeated pairs are rejected.
    pub fn from_arcs(
        node_count: usize,
        arcs: impl IntoIterator<Item = (NodeId, NodeId, f64)>,
    ) -> Result<Self> {
        let mut all: Vec<(u32, u32, f64)> = Vec::new();
        for (i, j, w) in arcs {
            for v in [i, j] {
                if v.index() >= node_count {
                    return Err(Error::NodeOutOfRange {
                        node: v.0 as u64,
                        node_count,
                    });
                }
            }
            if !(0.0..=1.0).contains(&w) {
                return Err(Error::param(format!(
                    "arc ({i}, {j}) has weight {w} outside [0, 1]"
                )));
            }
            all.push((i.0, j.0, w));
        }
        all.sort_by_key(|&(i, j, _)| (i, j));
        if let Some(w) = all
            .windows(2)
            .find(|w| (w[0].0, w[0].1) == (w[1].0, w[1].1))
        {
            return Err(Error::DuplicateEdge(NodeId(w[0].0), NodeId(w[0].1)));
        }
        let mut offsets = vec![0usize; node_count + 1];
        for &(i, _, _) in &all {
            offsets[i as usize + 1] += 1;
        }
        for k in 0..node_count {
            offsets[k + 1] += offsets[k];
        }
        Ok(WeightedGraph {
            node_count,
            offsets,
            arcs: all.into_iter().map(|(_, j, w)| (j, w)).collect(),
        })
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn arc_count(&self) -> usize {
        self.arcs.len()
    }

    /// `(dst, weight)` for arcs leaving `i`, sorted by `dst`.
    pub fn out_arcs(&self, i: NodeId) -> &[(u32, f64)] {
        &self.arcs[self.offsets[i.index()]..self.offsets[i.index() + 1]]
    }

    pub fn weight(&self, i: NodeId, j: NodeId) -> f64 {
        let out = self.out_arcs(i);
        out.binary_search_by_key(&j.0, |&(d, _)| d)
            .map_or(0.0, |k| out[k].1)
    }

    pub fn arcs(&self) -> impl Iterator<Item = (NodeId, NodeId, f64)> + '_ {
        (0..self.node_count).flat_map(move |i| {
            self.out_arcs(NodeId::from_index(i))
                .iter()
                .map(move |&(j, w)| (NodeId::from_index(i), NodeId(j), w))
        })
    }

    /// One `src<TAB>dst<TAB>weight` line per arc, weight to 17 significant digits.
    pub fn write_tsv(&self, out: &mut impl Write) -> std::io::Result<()> {
        for (i, j, w) in self.arcs() {
            writeln!(out, "{i}\t{j}\t{w:.16e}")?;
        }
        Ok(())
    }

    pub fn save_tsv(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        self.write_tsv(&mut out)
            .and_then(|_| out.flush())
            .map_err(|e| Error::io(path, e))
    }

    /// Reads the TSV arc list. Without `node_count`, the graph spans `0..=max id`.
    pub fn load_tsv(path: &Path, node_count: Option<usize>) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut arcs = Vec::new();
        for (k, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |message: String| Error::Parse {
                path: path.to_path_buf(),
                line: k + 1,
                message,
            };
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(bad(format!(
                    "expected 3 tab-separated fields, found {}",
                    fields.len()
                )));
            }
            let id = |s: &str| {
                s.parse::<u32>()
                    .map_err(|e| bad(format!("bad node id {s:?}: {e}")))
            };
            let w = fields[2]
                .parse::<f64>()
                .map_err(|e| bad(format!("bad weight {:?}: {e}", fields[2])))?;
            arcs.push((NodeId(id(fields[0])?), NodeId(id(fields[1])?), w));
        }
        let n = node_count.unwrap_or_else(|| {
            arcs.iter()
                .map(|&(i, j, _)| i.index().max(j.index()) + 1)
                .max()
                .unwrap_or(0)
        });
        Self::from_arcs(n, arcs)
    }
}

/// Every arc `i → j` with `g_ij = c·p_ji > 0`.
pub fn to_weighted_graph(g: &SanGraph, params: &ModelParams) -> Result<WeightedGraph> {
    let model = TransitionModel::new(g, params.clone())?;
    let c = model.decay();
    let arcs: Vec<(NodeId, NodeId, f64)> = g
        .nodes()
        .flat_map(|j| {
            model
                .transition_row(j)
                .into_iter()
                .filter(|&(_, p)| p > 0.0)
                .map(move |(i, p)| (i, j, c * p))
        })
        .collect();
    WeightedGraph::from_arcs(g.node_count(), arcs)
}

/// Plain independent cascade on a weighted digraph, one sequential random stream per simulation.
pub fn simulate_weighted_ic(
    wg: &WeightedGraph,
    s: &NodeSet,
    cfg: &CascadeConfig,
) -> Result<SpreadEstimate> {
    seed_mask(wg.node_count(), s)?;
    let n = wg.node_count();
    let sizes: Vec<usize> = (0..cfg.simulations)
        .into_par_iter()
        .map_init(
            || (Vec::new(), Vec::new()),
            |(active, frontier), sim| {
                let mut rng = stream::stream(
                    cfg.rng_seed,
                    Domain::WeightedCascade,
                    sim as u32,
                    (sim >> 32) as u32,
                );
                cascade(
                    n,
                    s,
                    |i| wg.out_arcs(NodeId::from_index(i)),
                    |_, _| rng.random::<f64>(),
                    active,
                    frontier,
                )
            },
        )
        .collect();
    Ok(SpreadEstimate::from_sizes(&sizes))
}
