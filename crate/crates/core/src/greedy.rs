//! Greedy seed selection maximizing `I(S)`.
//!
//! [`greedy_baseline`] re-estimates `I(S ∪ {u})` from scratch for every candidate.
//! [`greedy_optimized`] records `R` walks of length `L` from every node once, then
//! maintains per-node accumulators as seeds are added so each step costs only
//! the walks that pass through the new seed.
//!
//! Both read walk `(j, r)` from the same random stream, so given equal
//! parameters they see the same trajectories and select the same seeds.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hitting::influence_centrality_mc;
use crate::hypergraph::{NodeId, NodeSet, SanGraph};
use crate::walker::{Lockstep, ModelParams, TransitionModel};

/// Default cap on the in-memory size of a [`WalkStore`].
pub const DEFAULT_MEMORY_BUDGET: u64 = 4 << 30;

pub const SPILL_MAGIC: &[u8; 8] = b"SANWALK1";
const SPILL_HEADER_LEN: u64 = 8 + 4 + 4 + 4 + 8;

const PAD: u32 = u32::MAX;
const FIRST: u32 = 1 << 31;
const NO_CUT: u16 = u16::MAX;
/// Nodes whose walks are generated together when spilling.
const SPILL_BLOCK_NODES: usize = 4096;

/// How phase 2 scores a candidate `u`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GainRule {
    /// `Î(S ∪ {u}) − Î(S)` on the recorded walks, evaluated from the accumulators.
    /// Selects exactly what [`greedy_baseline`] selects.
    #[default]
    Direct,
    /// `(1 − P[u])·(1 + score[u])`. Equal to `Direct` in expectation but not walk by walk.
    Factored,
}

#[derive(Debug, Clone)]
pub struct GreedyOptions {
    pub gain_rule: GainRule,
    pub memory_budget: u64,
    /// Where to keep trajectories when they do not fit in `memory_budget`.
    pub spill_path: Option<PathBuf>,
}

impl Default for GreedyOptions {
    fn default() -> Self {
        GreedyOptions {
            gain_rule: GainRule::Direct,
            memory_budget: DEFAULT_MEMORY_BUDGET,
            spill_path: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeedResult {
    pub seeds: Vec<NodeId>,
    pub marginal_gains: Vec<f64>,
    pub params_used: ModelParams,
}

impl SeedResult {
    /// Estimated `I(S)` of the full seed set.
    pub fn estimated_centrality(&self) -> f64 {
        self.marginal_gains.iter().sum()
    }
}

fn check_k(g: &SanGraph, k: usize) -> Result<()> {
    if k == 0 || k > g.node_count() {
        return Err(Error::SeedCountOutOfRange {
            k,
            node_count: g.node_count(),
        });
    }
    Ok(())
}

/// Lowest-id candidate whose gain is within rounding of the maximum.
fn pick(gains: impl Iterator<Item = (NodeId, f64)> + Clone) -> Option<(NodeId, f64)> {
    let best = gains
        .clone()
        .map(|(_, g)| g)
        .fold(f64::NEG_INFINITY, f64::max);
    if best == f64::NEG_INFINITY {
        return None;
    }
    let tol = 1e-10 * best.abs().max(1.0);
    gains
        .filter(|&(_, g)| g >= best - tol)
        .min_by_key(|&(u, _)| u)
}

/// Greedy selection that evaluates every candidate with fresh walks.
/// Costs `O(k·n²·R·L)` walk steps.
pub fn greedy_baseline(g: &SanGraph, params: ModelParams, k: usize) -> Result<SeedResult> {
    check_k(g, k)?;
    let model = TransitionModel::new(g, params.clone())?;
    let mut s = NodeSet::empty(g.node_count());
    let mut current = 0.0;
    let mut seeds = Vec::with_capacity(k);
    let mut gains = Vec::with_capacity(k);
    for _ in 0..k {
        let candidates: Vec<(NodeId, f64)> = g
            .nodes()
            .filter(|&u| !s.contains(u))
            .collect::<Vec<_>>()
            .into_par_iter()
            .map(|u| (u, influence_centrality_mc(&model, &s.with(u))))
            .collect();
        let (u, value) = pick(candidates.iter().copied()).expect("k ≤ n leaves a candidate");
        seeds.push(u);
        gains.push(value - current);
        current = value;
        s.insert(u);
    }
    Ok(SeedResult {
        seeds,
        marginal_gains: gains,
        params_used: params,
    })
}

/// Greedy selection on a single set of recorded walks, `O(n·R·L)` overall.
pub fn greedy_optimized(g: &SanGraph, params: ModelParams, k: usize) -> Result<SeedResult> {
    greedy_optimized_with(g, params, k, &GreedyOptions::default())
}

pub fn greedy_optimized_with(
    g: &SanGraph,
    params: ModelParams,
    k: usize,
    opts: &GreedyOptions,
) -> Result<SeedResult> {
    check_k(g, k)?;
    let model = TransitionModel::new(g, params.clone())?;
    let mut store = WalkStore::build(&model, opts)?;
    let mut seeds = Vec::with_capacity(k);
    let mut gains = Vec::with_capacity(k);
    for step in 0..k {
        let (u, gain) = store
            .best_candidate(opts.gain_rule)
            .expect("k ≤ n leaves a candidate");
        seeds.push(u);
        gains.push(gain);
        if step + 1 < k {
            store.apply_update(u)?;
        }
    }
    Ok(SeedResult {
        seeds,
        marginal_gains: gains,
        params_used: params,
    })
}

enum Trajectories {
    Memory(Vec<u32>),
    Spilled { file: File, path: PathBuf },
}

/// Recorded walks plus the incremental state of the optimized greedy.
///
/// Entry `t` of walk `(j, r)` is the node reached after `t + 1` steps. The
/// first time a walk reaches a node other than its start is indexed under that
/// node. For the current seed set `S` and each candidate `u ∉ S`:
///
/// * `score[u]` sums `c^{t_u}/R` over walks from `j ∉ S ∪ {u}` reaching `u` at
///   `t_u` before they reach `S`;
/// * `hit_prob[u]` is `ĥ(u, S)`, the mean of `c^{t_S}` over walks from `u`;
/// * `overlap[u]` sums `c^{t_S}/R` over the walks counted in `score[u]` that go
///   on to reach `S` at `t_S`.
///
/// Entries for nodes already in `S` are left stale.
pub struct WalkStore {
    n: usize,
    replicates: usize,
    walk_length: usize,
    seed: u64,
    traj: Trajectories,
    offsets: Vec<usize>,
    index: Vec<u32>,
    cut: Vec<u16>,
    /// `c^t / R`.
    weight: Vec<f64>,
    score: Vec<f64>,
    hit_prob: Vec<f64>,
    overlap: Vec<f64>,
    seeds: NodeSet,
}

impl std::fmt::Debug for WalkStore {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("WalkStore")
            .field("n", &self.n)
            .field("replicates", &self.replicates)
            .field("walk_length", &self.walk_length)
            .field("spilled", &self.is_spilled())
            .field("seeds", &self.seeds.members())
            .finish()
    }
}

/// Marks first visits in one walk. Positions equal to `start` are never first visits.
fn mark_first_visits(start: u32, walk: &mut [u32], scratch: &mut Vec<(u32, u32)>) {
    let len = walk.iter().position(|&x| x == PAD).unwrap_or(walk.len());
    let walk = &mut walk[..len];
    if len <= 64 {
        for t in 0..len {
            let x = walk[t] & !FIRST;
            let seen = x == start || walk[..t].iter().any(|&y| y & !FIRST == x);
            walk[t] = if seen { x } else { x | FIRST };
        }
        return;
    }
    scratch.clear();
    scratch.extend(
        walk.iter()
            .enumerate()
            .map(|(t, &x)| (x & !FIRST, t as u32)),
    );
    scratch.sort_unstable();
    let mut prev = None;
    for &(x, t) in scratch.iter() {
        let first = prev != Some(x) && x != start;
        walk[t as usize] = if first { x | FIRST } else { x };
        prev = Some(x);
    }
}

/// Replicates walked together by [`TransitionModel::walk_lockstep`].
pub(crate) const LOCKSTEP_BATCH: usize = 256;

fn fill_walks(
    model: &TransitionModel<'_>,
    first_node: usize,
    block: &mut [u32],
    r_count: usize,
    l: usize,
) {
    block.par_chunks_mut(r_count * l).enumerate().for_each_init(
        || (Vec::new(), Lockstep::default()),
        |(scratch, lockstep), (offset, chunk)| {
            let j = NodeId::from_index(first_node + offset);
            chunk.fill(PAD);
            for lo in (0..r_count).step_by(LOCKSTEP_BATCH) {
                let hi = (lo + LOCKSTEP_BATCH).min(r_count);
                model.walk_lockstep(j, lo..hi, l, lockstep, |r, t, v| {
                    chunk[r * l + t - 1] = v.0;
                    true
                });
            }
            for walk in chunk.chunks_mut(l) {
                mark_first_visits(j.0, walk, scratch);
            }
        },
    );
}

fn count_first_visits(counts: &mut [usize], walks: &[u32]) {
    for &x in walks {
        if x != PAD && x & FIRST != 0 {
            counts[(x & !FIRST) as usize] += 1;
        }
    }
}

impl WalkStore {
    /// Bytes held in memory: trajectories, worst-case first-visit index, cut markers and accumulators.
    pub fn estimated_bytes(n: usize, replicates: usize, walk_length: usize, spilled: bool) -> u64 {
        let steps = n as u64 * replicates as u64 * walk_length as u64;
        let traj = if spilled { 0 } else { 4 * steps };
        traj + 4 * steps + 2 * n as u64 * replicates as u64 + 8 * (4 * n as u64 + 1)
    }

    /// Phase 1: records `R` walks of length `L` from every node and initializes
    /// `score` with `S = ∅`.
    pub fn build(model: &TransitionModel<'_>, opts: &GreedyOptions) -> Result<Self> {
        let p = model.params();
        let (n, r, l) = (model.node_count(), p.replicates, p.walk_length);
        let steps = n as u64 * r as u64 * l as u64;
        if steps >= u32::MAX as u64 {
            return Err(Error::param(format!(
                "{steps} walk steps exceed the addressable store size; lower R or L"
            )));
        }
        let in_memory = Self::estimated_bytes(n, r, l, false);
        let spill = if in_memory <= opts.memory_budget {
            None
        } else {
            let spilled = Self::estimated_bytes(n, r, l, true);
            match &opts.spill_path {
                Some(path) if spilled <= opts.memory_budget => Some(path.clone()),
                Some(_) => {
                    return Err(Error::MemoryBudgetExceeded {
                        required: spilled,
                        budget: opts.memory_budget,
                    })
                }
                None => {
                    return Err(Error::MemoryBudgetExceeded {
                        required: in_memory,
                        budget: opts.memory_budget,
                    })
                }
            }
        };
        let mut counts = vec![0usize; n];
        let traj = match spill {
            None => {
                let mut walks = vec![PAD; steps as usize];
                if l > 0 {
                    fill_walks(model, 0, &mut walks, r, l);
                }
                count_first_visits(&mut counts, &walks);
                Trajectories::Memory(walks)
            }
            Some(path) => {
                log::info!(
                    "walk store exceeds memory budget; spilling trajectories to {}",
                    path.display()
                );
                let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
                let mut out = BufWriter::new(file);
                write_header(&mut out, n, r, l, p.seed).map_err(|e| Error::io(&path, e))?;
                let mut block = Vec::new();
                let mut first = 0;
                while first < n && l > 0 {
                    let last = (first + SPILL_BLOCK_NODES).min(n);
                    block.clear();
                    block.resize((last - first) * r * l, PAD);
                    fill_walks(model, first, &mut block, r, l);
                    count_first_visits(&mut counts, &block);
                    write_records(&mut out, &block).map_err(|e| Error::io(&path, e))?;
                    first = last;
                }
                out.flush().map_err(|e| Error::io(&path, e))?;
                drop(out);
                let file = File::open(&path).map_err(|e| Error::io(&path, e))?;
                Trajectories::Spilled { file, path }
            }
        };
        let mut store = WalkStore {
            n,
            replicates: r,
            walk_length: l,
            seed: p.seed,
            traj,
            offsets: Vec::new(),
            index: Vec::new(),
            cut: vec![NO_CUT; n * r],
            weight: (0..=l).map(|t| model.decay_pow(t) / r as f64).collect(),
            score: vec![0.0; n],
            hit_prob: vec![0.0; n],
            overlap: vec![0.0; n],
            seeds: NodeSet::empty(n),
        };
        store.build_index(&counts)?;
        Ok(store)
    }

    fn build_index(&mut self, counts: &[usize]) -> Result<()> {
        let mut offsets = Vec::with_capacity(self.n + 1);
        offsets.push(0usize);
        for &c in counts {
            offsets.push(offsets.last().unwrap() + c);
        }
        let mut fill = offsets[..self.n].to_vec();
        let mut index = vec![0u32; offsets[self.n]];
        let l = self.walk_length;
        let mut place = |base: usize, walks: &[u32], score: &mut [f64]| {
            for (k, &x) in walks.iter().enumerate() {
                if x != PAD && x & FIRST != 0 {
                    let node = (x & !FIRST) as usize;
                    index[fill[node]] = (base + k) as u32;
                    fill[node] += 1;
                    score[node] += self.weight[k % l + 1];
                }
            }
        };
        match &self.traj {
            Trajectories::Memory(walks) => place(0, walks, &mut self.score),
            Trajectories::Spilled { file, path } => {
                let mut input = BufReader::with_capacity(1 << 20, file);
                input
                    .seek(SeekFrom::Start(SPILL_HEADER_LEN))
                    .map_err(|e| Error::io(path, e))?;
                let block_len = SPILL_BLOCK_NODES * self.replicates * l;
                let total = self.n * self.replicates * l;
                let mut base = 0;
                let mut bytes = Vec::new();
                let mut block = Vec::new();
                while base < total {
                    let len = block_len.min(total - base);
                    bytes.resize(len * 4, 0);
                    input
                        .read_exact(&mut bytes)
                        .map_err(|e| Error::io(path, e))?;
                    decode(&bytes, &mut block);
                    place(base, &block, &mut self.score);
                    base += len;
                }
            }
        }
        self.offsets = offsets;
        self.index = index;
        Ok(())
    }

    /// Writes the trajectories in the spill format: a little-endian header
    /// `SANWALK1, n: u32, R: u32, L: u32, seed: u64`, then `n·R` records of `L`
    /// `u32` entries ordered by `(start, replicate)`. The high bit of an entry
    /// marks a first visit; `u32::MAX` pads walks that ended at a dangling node.
    pub fn write_spill(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        write_header(
            &mut out,
            self.n,
            self.replicates,
            self.walk_length,
            self.seed,
        )
        .map_err(|e| Error::io(path, e))?;
        match &self.traj {
            Trajectories::Memory(walks) => {
                write_records(&mut out, walks).map_err(|e| Error::io(path, e))?
            }
            Trajectories::Spilled { file, path: src } => {
                let mut input = file;
                input
                    .seek(SeekFrom::Start(SPILL_HEADER_LEN))
                    .map_err(|e| Error::io(src, e))?;
                std::io::copy(&mut input, &mut out).map_err(|e| Error::io(path, e))?;
            }
        }
        out.flush().map_err(|e| Error::io(path, e))
    }

    /// Loads trajectories written by [`WalkStore::write_spill`] and rebuilds the
    /// phase-1 state. `n`, `R`, `L` and the seed must match the model.
    pub fn from_spill(model: &TransitionModel<'_>, path: &Path) -> Result<Self> {
        let p = model.params();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut input = BufReader::new(file);
        let bad = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            message,
        };
        let mut header = [0u8; SPILL_HEADER_LEN as usize];
        input
            .read_exact(&mut header)
            .map_err(|e| Error::io(path, e))?;
        if &header[..8] != SPILL_MAGIC {
            return Err(bad("not a walk store file".into()));
        }
        let word = |at: usize| u32::from_le_bytes(header[at..at + 4].try_into().unwrap()) as usize;
        let (n, r, l) = (word(8), word(12), word(16));
        let seed = u64::from_le_bytes(header[20..28].try_into().unwrap());
        if (n, r, l, seed) != (model.node_count(), p.replicates, p.walk_length, p.seed) {
            return Err(bad(format!(
                "store has n={n} R={r} L={l} seed={seed}; model has n={} R={} L={} seed={}",
                model.node_count(),
                p.replicates,
                p.walk_length,
                p.seed
            )));
        }
        let mut bytes = vec![0u8; n * r * l * 4];
        input
            .read_exact(&mut bytes)
            .map_err(|e| Error::io(path, e))?;
        let mut walks = Vec::new();
        decode(&bytes, &mut walks);
        let mut scratch = Vec::new();
        let mut counts = vec![0usize; n];
        if l > 0 {
            for (w, walk) in walks.chunks_mut(l).enumerate() {
                let start = (w / r) as u32;
                for x in walk.iter_mut() {
                    if *x != PAD {
                        if (*x & !FIRST) as usize >= n {
                            return Err(bad(format!(
                                "walk {w} visits node {} outside the graph",
                                *x & !FIRST
                            )));
                        }
                        *x &= !FIRST;
                    }
                }
                mark_first_visits(start, walk, &mut scratch);
            }
        }
        count_first_visits(&mut counts, &walks);
        let mut store = WalkStore {
            n,
            replicates: r,
            walk_length: l,
            seed,
            traj: Trajectories::Memory(walks),
            offsets: Vec::new(),
            index: Vec::new(),
            cut: vec![NO_CUT; n * r],
            weight: (0..=l).map(|t| model.decay_pow(t) / r as f64).collect(),
            score: vec![0.0; n],
            hit_prob: vec![0.0; n],
            overlap: vec![0.0; n],
            seeds: NodeSet::empty(n),
        };
        store.build_index(&counts)?;
        Ok(store)
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn replicates(&self) -> usize {
        self.replicates
    }

    pub fn walk_length(&self) -> usize {
        self.walk_length
    }

    pub fn is_spilled(&self) -> bool {
        matches!(self.traj, Trajectories::Spilled { .. })
    }

    pub fn spill_path(&self) -> Option<&Path> {
        match &self.traj {
            Trajectories::Spilled { path, .. } => Some(path),
            Trajectories::Memory(_) => None,
        }
    }

    pub fn seeds(&self) -> &NodeSet {
        &self.seeds
    }

    pub fn score(&self) -> &[f64] {
        &self.score
    }

    pub fn hit_prob(&self) -> &[f64] {
        &self.hit_prob
    }

    pub fn overlap(&self) -> &[f64] {
        &self.overlap
    }

    fn read_walk<'a>(
        traj: &'a Trajectories,
        l: usize,
        w: usize,
        buf: &'a mut Vec<u32>,
    ) -> Result<&'a [u32]> {
        match traj {
            Trajectories::Memory(walks) => Ok(&walks[w * l..(w + 1) * l]),
            Trajectories::Spilled { file, path } => {
                let mut bytes = vec![0u8; l * 4];
                let mut f = file;
                f.seek(SeekFrom::Start(SPILL_HEADER_LEN + (w * l * 4) as u64))
                    .and_then(|_| f.read_exact(&mut bytes))
                    .map_err(|e| Error::io(path, e))?;
                decode(&bytes, buf);
                Ok(buf)
            }
        }
    }

    /// The recorded walk `(j, r)`, truncated where it reached a dangling node.
    pub fn walk(&self, j: NodeId, r: usize) -> Result<Vec<NodeId>> {
        let mut buf = Vec::new();
        let w = Self::read_walk(
            &self.traj,
            self.walk_length,
            j.index() * self.replicates + r,
            &mut buf,
        )?;
        Ok(w.iter()
            .take_while(|&&x| x != PAD)
            .map(|&x| NodeId(x & !FIRST))
            .collect())
    }

    /// `(start, replicate, step)` of every walk whose first visit to `i` is at `step`.
    pub fn first_visits(&self, i: NodeId) -> impl Iterator<Item = (NodeId, usize, usize)> + '_ {
        let (r, l) = (self.replicates, self.walk_length);
        self.index[self.offsets[i.index()]..self.offsets[i.index() + 1]]
            .iter()
            .map(move |&pos| {
                let pos = pos as usize;
                let w = pos / l;
                (NodeId::from_index(w / r), w % r, pos % l + 1)
            })
    }

    /// Estimated marginal gain of adding `u ∉ S`.
    pub fn gain(&self, u: NodeId, rule: GainRule) -> f64 {
        let i = u.index();
        match rule {
            GainRule::Direct => 1.0 - self.hit_prob[i] + self.score[i] - self.overlap[i],
            GainRule::Factored => (1.0 - self.hit_prob[i]) * (1.0 + self.score[i]),
        }
    }

    /// Highest-gain node outside `S`, lowest id on ties.
    pub fn best_candidate(&self, rule: GainRule) -> Option<(NodeId, f64)> {
        let s = &self.seeds;
        pick(
            (0..self.n)
                .map(NodeId::from_index)
                .filter(move |&u| !s.contains(u))
                .map(move |u| (u, self.gain(u, rule))),
        )
    }

    /// Adds `v` to `S`: drops the walks that start at `v`, then truncates every
    /// walk whose first visit to `v` precedes its first entry into `S`.
    pub fn apply_update(&mut self, v: NodeId) -> Result<()> {
        if v.index() >= self.n {
            return Err(Error::NodeOutOfRange {
                node: v.0 as u64,
                node_count: self.n,
            });
        }
        if self.seeds.contains(v) {
            return Err(Error::param(format!("node {v} is already a seed")));
        }
        let (r, l) = (self.replicates, self.walk_length);
        let mut buf = Vec::new();
        for w in v.index() * r..(v.index() + 1) * r {
            let cut = self.cut[w];
            let end = if cut == NO_CUT { l } else { cut as usize };
            let walk = Self::read_walk(&self.traj, l, w, &mut buf)?;
            for t in 1..=end {
                let x = walk[t - 1];
                if x == PAD {
                    break;
                }
                if x & FIRST == 0 {
                    continue;
                }
                let u = (x & !FIRST) as usize;
                self.score[u] -= self.weight[t];
                if cut != NO_CUT && t < end {
                    self.overlap[u] -= self.weight[end];
                }
            }
        }
        self.seeds.insert(v);
        for k in self.offsets[v.index()]..self.offsets[v.index() + 1] {
            let pos = self.index[k] as usize;
            let w = pos / l;
            let j = w / r;
            if self.seeds.contains(NodeId::from_index(j)) {
                continue;
            }
            let tv = pos % l + 1;
            let cut = self.cut[w];
            let finite = cut != NO_CUT;
            if finite && tv >= cut as usize {
                continue;
            }
            let old = if finite {
                self.weight[cut as usize]
            } else {
                0.0
            };
            let delta = self.weight[tv] - old;
            self.hit_prob[j] += delta;
            let end = if finite { cut as usize } else { l };
            let walk = Self::read_walk(&self.traj, l, w, &mut buf)?;
            for t in 1..=end {
                let x = walk[t - 1];
                if x == PAD {
                    break;
                }
                if x & FIRST == 0 {
                    continue;
                }
                let u = (x & !FIRST) as usize;
                if t == tv {
                    // v's own entries go stale; clear them so every accumulator drains to 0.
                    self.overlap[u] -= old;
                } else if t < tv {
                    self.overlap[u] += delta;
                } else {
                    self.score[u] -= self.weight[t];
                    if finite && t < end {
                        self.overlap[u] -= old;
                    }
                }
            }
            self.cut[w] = tv as u16;
        }
        Ok(())
    }
}

fn write_header(
    out: &mut impl Write,
    n: usize,
    r: usize,
    l: usize,
    seed: u64,
) -> std::io::Result<()> {
    out.write_all(SPILL_MAGIC)?;
    for x in [n, r, l] {
        out.write_all(&(x as u32).to_le_bytes())?;
    }
    out.write_all(&seed.to_le_bytes())
}

fn write_records(out: &mut impl Write, walks: &[u32]) -> std::io::Result<()> {
    let mut bytes = Vec::with_capacity(walks.len().min(1 << 20) * 4);
    for chunk in walks.chunks(1 << 20) {
        bytes.clear();
        for &x in chunk {
            bytes.extend_from_slice(&x.to_le_bytes());
        }
        out.write_all(&bytes)?;
    }
    Ok(())
}

fn decode(bytes: &[u8], out: &mut Vec<u32>) {
    out.clear();
    out.extend(
        bytes
            .chunks_exact(4)
            .map(|b| u32::from_le_bytes(b.try_into().unwrap())),
    );
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hitting::{first_passage_exact, influence_centrality_exact};
    use crate::hypergraph::build_graph;
    use approx::assert_relative_eq;

    fn n(v: u32) -> NodeId {
        NodeId(v)
    }

    fn star() -> SanGraph {
        build_graph(6, (1..6).map(|leaf| (n(0), n(leaf))), [], false).unwrap()
    }

    fn path5() -> SanGraph {
        // Directed chain 4 → 3 → 2 → 1 → 0: the walk from 0 runs 0, 1, 2, 3, 4.
        build_graph(5, (0..4).map(|i| (n(i + 1), n(i))), [], true).unwrap()
    }

    #[test]
    fn first_visit_marking() {
        let mut walk = vec![1, 2, 1, 0, 3, PAD];
        mark_first_visits(0, &mut walk, &mut Vec::new());
        assert_eq!(walk, vec![1 | FIRST, 2 | FIRST, 1, 0, 3 | FIRST, PAD]);
        let mut long: Vec<u32> = (0..100).map(|t| t % 7).collect();
        mark_first_visits(3, &mut long, &mut Vec::new());
        let firsts: Vec<usize> = (0..100).filter(|&t| long[t] & FIRST != 0).collect();
        assert_eq!(firsts, vec![0, 1, 2, 4, 5, 6]);
    }

    #[test]
    fn phase_one_scores_chain() {
        let g = path5();
        let params = ModelParams::new(0.5, 0.0)
            .with_walk_length(4)
            .with_replicates(3);
        let model = TransitionModel::new(&g, params).unwrap();
        let store = WalkStore::build(&model, &GreedyOptions::default()).unwrap();
        assert_eq!(store.walk(n(0), 2).unwrap(), vec![n(1), n(2), n(3), n(4)]);
        assert_eq!(store.walk(n(3), 0).unwrap(), vec![n(4)]);
        // score[2] = c¹ (from 1) + c² (from 0).
        assert_relative_eq!(store.score()[2], 0.75);
        assert_eq!(store.score()[0], 0.0);
        assert!(store.hit_prob().iter().all(|&p| p == 0.0));
        let visits: Vec<_> = store.first_visits(n(2)).collect();
        assert_eq!(visits.len(), 6);
        assert!(visits.contains(&(n(0), 1, 2)));
    }

    #[test]
    fn single_walk_hand_trace() {
        let g = path5();
        let params = ModelParams::new(0.5, 0.0)
            .with_walk_length(4)
            .with_replicates(1);
        let model = TransitionModel::new(&g, params).unwrap();
        let mut store = WalkStore::build(&model, &GreedyOptions::default()).unwrap();
        let before = store.score().to_vec();
        store.apply_update(n(2)).unwrap();
        // Walk 0 → 1 → 2 → 3 → 4 now stops at 2 (step 2).
        assert_relative_eq!(store.hit_prob()[0], 0.25);
        assert_relative_eq!(store.hit_prob()[1], 0.5);
        // score[3] loses c³ (walk from 0), c² (from 1) and c¹ (from 2 itself).
        assert_relative_eq!(before[3] - store.score()[3], 0.125 + 0.25 + 0.5);
        // Only the walk from 3 still reaches 4 before S.
        assert_relative_eq!(store.score()[4], 0.5);
        // A walk that already reached S is not touched by a later node.
        store.apply_update(n(3)).unwrap();
        assert_relative_eq!(store.hit_prob()[0], 0.25);
        assert!(store.apply_update(n(3)).is_err());
    }

    #[test]
    fn conservation_after_all_nodes() {
        let g = build_graph(
            8,
            [
                (n(0), n(1)),
                (n(1), n(2)),
                (n(2), n(3)),
                (n(3), n(0)),
                (n(4), n(5)),
                (n(5), n(6)),
                (n(6), n(7)),
                (n(2), n(6)),
            ],
            [
                crate::Hyperedge::new(1, [n(0), n(4), n(7)]),
                crate::Hyperedge::new(1, [n(1), n(5)]),
            ],
            false,
        )
        .unwrap();
        let params = ModelParams::new(0.6, 0.4)
            .with_walk_length(7)
            .with_replicates(20)
            .with_seed(5);
        let model = TransitionModel::new(&g, params).unwrap();
        let mut store = WalkStore::build(&model, &GreedyOptions::default()).unwrap();
        for v in [5, 0, 7, 2, 3, 1, 6, 4] {
            store.apply_update(n(v)).unwrap();
            assert!(store.score().iter().all(|&s| s > -1e-9));
            assert!(store
                .hit_prob()
                .iter()
                .all(|&p| (-1e-9..=1.0 + 1e-9).contains(&p)));
        }
        for (&s, &o) in store.score().iter().zip(store.overlap()) {
            assert!(s.abs() < 1e-12 && o.abs() < 1e-12, "{s} {o}");
        }
    }

    #[test]
    fn star_selects_center_first() {
        let g = star();
        let model = TransitionModel::new(&g, ModelParams::new(0.5, 0.0)).unwrap();
        let center =
            influence_centrality_exact(&model, &NodeSet::from_nodes(6, [n(0)]).unwrap()).unwrap();
        let leaf =
            influence_centrality_exact(&model, &NodeSet::from_nodes(6, [n(1)]).unwrap()).unwrap();
        assert!(center > leaf);
        let params = ModelParams::new(0.5, 0.0).with_replicates(200);
        let base = greedy_baseline(&g, params.clone(), 1).unwrap();
        assert_eq!(base.seeds, vec![n(0)]);
        let opt = greedy_optimized(&g, params, 2).unwrap();
        assert_eq!(opt.seeds[0], n(0));
        assert!(opt.marginal_gains[1] < opt.marginal_gains[0]);
    }

    #[test]
    fn exhaustion_and_range() {
        let g = star();
        let params = ModelParams::new(0.5, 0.0).with_replicates(10);
        let res = greedy_optimized(&g, params.clone(), 6).unwrap();
        let mut sorted = res.seeds.clone();
        sorted.sort();
        assert_eq!(sorted, (0..6).map(n).collect::<Vec<_>>());
        assert!(matches!(
            greedy_optimized(&g, params.clone(), 0),
            Err(Error::SeedCountOutOfRange { .. })
        ));
        assert!(matches!(
            greedy_baseline(&g, params, 7),
            Err(Error::SeedCountOutOfRange { .. })
        ));
    }

    #[test]
    fn optimized_matches_baseline_small() {
        let g = build_graph(
            7,
            [
                (n(0), n(1)),
                (n(1), n(2)),
                (n(2), n(0)),
                (n(3), n(4)),
                (n(4), n(5)),
                (n(5), n(6)),
                (n(6), n(3)),
                (n(0), n(3)),
            ],
            [crate::Hyperedge::new(1, [n(1), n(4), n(6)])],
            false,
        )
        .unwrap();
        let params = ModelParams::new(0.5, 0.3)
            .with_walk_length(6)
            .with_replicates(30)
            .with_seed(11);
        let a = greedy_baseline(&g, params.clone(), 4).unwrap();
        let b = greedy_optimized(&g, params, 4).unwrap();
        assert_eq!(a.seeds, b.seeds);
        for (x, y) in a.marginal_gains.iter().zip(&b.marginal_gains) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn factored_gain_matches_exact_identity() {
        let g = star();
        let model = TransitionModel::new(&g, ModelParams::new(0.5, 0.0)).unwrap();
        let s = NodeSet::from_nodes(6, [n(1)]).unwrap();
        let u = n(0);
        let h = first_passage_exact(&model, &s, &NodeSet::empty(6)).unwrap()[0];
        let to_u = first_passage_exact(&model, &NodeSet::from_nodes(6, [u]).unwrap(), &s).unwrap();
        let sum: f64 = (0..6).filter(|&j| j != 0 && j != 1).map(|j| to_u[j]).sum();
        let lhs = (1.0 - h) * (1.0 + sum);
        let rhs = influence_centrality_exact(&model, &s.with(u)).unwrap()
            - influence_centrality_exact(&model, &s).unwrap();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn memory_guard_and_spill() {
        let g = star();
        let params = ModelParams::new(0.5, 0.0)
            .with_walk_length(5)
            .with_replicates(40)
            .with_seed(2);
        let model = TransitionModel::new(&g, params.clone()).unwrap();
        let tight = GreedyOptions {
            memory_budget: 100,
            ..GreedyOptions::default()
        };
        assert!(matches!(
            WalkStore::build(&model, &tight),
            Err(Error::MemoryBudgetExceeded { .. })
        ));

        let dir = tempfile::tempdir().unwrap();
        let spill = GreedyOptions {
            memory_budget: WalkStore::estimated_bytes(6, 40, 5, true),
            spill_path: Some(dir.path().join("walks.bin")),
            ..GreedyOptions::default()
        };
        let mut on_disk = WalkStore::build(&model, &spill).unwrap();
        assert!(on_disk.is_spilled());
        let mut in_mem = WalkStore::build(&model, &GreedyOptions::default()).unwrap();
        assert_eq!(on_disk.score(), in_mem.score());
        for v in [0, 3] {
            on_disk.apply_update(n(v)).unwrap();
            in_mem.apply_update(n(v)).unwrap();
        }
        assert_eq!(on_disk.score(), in_mem.score());
        assert_eq!(on_disk.hit_prob(), in_mem.hit_prob());
        assert_eq!(
            greedy_optimized_with(&g, params.clone(), 3, &spill).unwrap(),
            greedy_optimized(&g, params.clone(), 3).unwrap()
        );

        let copy = dir.path().join("copy.bin");
        in_mem.write_spill(&copy).unwrap();
        let loaded = WalkStore::from_spill(&model, &copy).unwrap();
        assert_eq!(loaded.walk(n(2), 7).unwrap(), in_mem.walk(n(2), 7).unwrap());
        let fresh = WalkStore::build(&model, &GreedyOptions::default()).unwrap();
        assert_eq!(loaded.score(), fresh.score());

        let other = TransitionModel::new(&g, params.with_seed(3)).unwrap();
        assert!(WalkStore::from_spill(&other, &copy).is_err());
    }
}
