//! Social-activity network model.
//!
//! A [`SanGraph`] holds users, the user-user influence links `E` and the typed
//! activity hyperedges `ℰ_1..ℰ_l`. Adjacency and incidence are stored in
//! compressed (CSR) form; the graph is immutable once built.
//!
//! Orientation: a directed edge `(i, j)` means "`i` influences `j`", so
//! [`SanGraph::neighbors`]`(j)` returns `N(j) = {i | (i, j) ∈ E}`, the nodes a walk
//! at `j` may step to. Undirected edges are inserted in both orientations.

use std::fmt;

use log::warn;

use crate::error::{Error, Result};

/// Largest supported node count. Walk storage reserves the top bit of each id.
pub const MAX_NODES: usize = i32::MAX as usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct NodeId(pub u32);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }

    #[inline]
    pub fn from_index(i: usize) -> Self {
        debug_assert!(i <= MAX_NODES);
        NodeId(i as u32)
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl From<u32> for NodeId {
    fn from(v: u32) -> Self {
        NodeId(v)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct HyperedgeId(pub u32);

impl HyperedgeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// One online activity: the set of users who took part in it.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Hyperedge {
    activity_type: u32,
    members: Vec<NodeId>,
}

impl Hyperedge {
    /// Members are sorted and deduplicated.
    pub fn new(activity_type: u32, members: impl IntoIterator<Item = NodeId>) -> Self {
        let mut members: Vec<NodeId> = members.into_iter().collect();
        members.sort_unstable();
        members.dedup();
        Hyperedge {
            activity_type,
            members,
        }
    }

    pub fn activity_type(&self) -> u32 {
        self.activity_type
    }

    pub fn members(&self) -> &[NodeId] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, j: NodeId) -> bool {
        self.members.binary_search(&j).is_ok()
    }

    /// `M_e(j)`: every member except `j`.
    pub fn co_members(&self, j: NodeId) -> Result<impl Iterator<Item = NodeId> + '_> {
        if !self.contains(j) {
            return Err(Error::NotAMember { node: j });
        }
        Ok(self.members.iter().copied().filter(move |&m| m != j))
    }
}

/// Counts of input items dropped by a non-strict build.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BuildReport {
    pub self_loops_dropped: usize,
    pub duplicate_edges_dropped: usize,
    pub small_hyperedges_dropped: usize,
}

impl BuildReport {
    pub fn total_dropped(&self) -> usize {
        self.self_loops_dropped + self.duplicate_edges_dropped + self.small_hyperedges_dropped
    }
}

/// Collects edges and hyperedges, validates them and freezes a [`SanGraph`].
///
/// In the default mode self-loops, repeated edges and hyperedges with fewer than
/// two members are dropped and counted. In strict mode each of them is an error.
#[derive(Debug, Clone)]
pub struct GraphBuilder {
    node_count: usize,
    directed: bool,
    strict: bool,
    activity_types: Option<u32>,
    edges: Vec<(NodeId, NodeId)>,
    hyperedges: Vec<Hyperedge>,
}

impl GraphBuilder {
    pub fn new(node_count: usize) -> Self {
        GraphBuilder {
            node_count,
            directed: false,
            strict: false,
            activity_types: None,
            edges: Vec::new(),
            hyperedges: Vec::new(),
        }
    }

    pub fn directed(mut self, directed: bool) -> Self {
        self.directed = directed;
        self
    }

    pub fn strict(mut self, strict: bool) -> Self {
        self.strict = strict;
        self
    }

    /// Fixes `l`. Without this, `l` is the largest type present (at least 1).
    pub fn activity_types(mut self, l: u32) -> Self {
        self.activity_types = Some(l);
        self
    }

    pub fn edge(mut self, i: NodeId, j: NodeId) -> Self {
        self.edges.push((i, j));
        self
    }

    pub fn edges(mut self, edges: impl IntoIterator<Item = (NodeId, NodeId)>) -> Self {
        self.edges.extend(edges);
        self
    }

    pub fn hyperedge(mut self, e: Hyperedge) -> Self {
        self.hyperedges.push(e);
        self
    }

    pub fn hyperedges(mut self, es: impl IntoIterator<Item = Hyperedge>) -> Self {
        self.hyperedges.extend(es);
        self
    }

    pub fn push_edge(&mut self, i: NodeId, j: NodeId) {
        self.edges.push((i, j));
    }

    /// Adds a hyperedge from raw members; strict builds reject repeated members.
    pub fn push_hyperedge_members(&mut self, activity_type: u32, members: &[NodeId]) -> Result<()> {
        let e = Hyperedge::new(activity_type, members.iter().copied());
        if self.strict && e.len() != members.len() {
            let mut sorted = members.to_vec();
            sorted.sort_unstable();
            let dup = sorted.windows(2).find(|w| w[0] == w[1]).map(|w| w[0]);
            return Err(Error::DuplicateMember(dup.unwrap_or_default()));
        }
        self.hyperedges.push(e);
        Ok(())
    }

    pub fn push_hyperedge(&mut self, e: Hyperedge) {
        self.hyperedges.push(e);
    }

    pub fn build(self) -> Result<(SanGraph, BuildReport)> {
        let n = self.node_count;
        if n > MAX_NODES {
            return Err(Error::GraphTooLarge {
                node_count: n,
                limit: MAX_NODES,
            });
        }
        let check = |v: NodeId| -> Result<()> {
            if v.index() >= n {
                Err(Error::NodeOutOfRange {
                    node: v.0 as u64,
                    node_count: n,
                })
            } else {
                Ok(())
            }
        };

        let mut report = BuildReport::default();

        // (target, source) pairs: source ∈ N(target).
        let mut arcs: Vec<(NodeId, NodeId)> = Vec::with_capacity(self.edges.len() * 2);
        let mut seen: Vec<(NodeId, NodeId)> = Vec::with_capacity(self.edges.len());
        for &(i, j) in &self.edges {
            check(i)?;
            check(j)?;
            if i == j {
                if self.strict {
                    return Err(Error::SelfLoop(i));
                }
                report.self_loops_dropped += 1;
                continue;
            }
            let key = if self.directed {
                (i, j)
            } else {
                (i.min(j), i.max(j))
            };
            seen.push(key);
        }
        let before = seen.len();
        seen.sort_unstable();
        if self.strict {
            if let Some(w) = seen.windows(2).find(|w| w[0] == w[1]) {
                return Err(Error::DuplicateEdge(w[0].0, w[0].1));
            }
        }
        seen.dedup();
        report.duplicate_edges_dropped = before - seen.len();
        for &(i, j) in &seen {
            arcs.push((j, i));
            if !self.directed {
                arcs.push((i, j));
            }
        }

        let mut max_type = 0u32;
        let mut kept = Vec::with_capacity(self.hyperedges.len());
        for e in self.hyperedges {
            for &m in e.members() {
                check(m)?;
            }
            if e.activity_type == 0 {
                return Err(Error::InvalidActivityType {
                    activity_type: 0,
                    activity_types: self.activity_types.unwrap_or(max_type.max(1)),
                });
            }
            if let Some(l) = self.activity_types {
                if e.activity_type > l {
                    return Err(Error::InvalidActivityType {
                        activity_type: e.activity_type,
                        activity_types: l,
                    });
                }
            }
            if e.len() < 2 {
                if self.strict {
                    return Err(Error::SmallHyperedge {
                        activity_type: e.activity_type,
                        members: e.len(),
                    });
                }
                report.small_hyperedges_dropped += 1;
                continue;
            }
            max_type = max_type.max(e.activity_type);
            kept.push(e);
        }
        let l = self.activity_types.unwrap_or(max_type.max(1));
        // Grouped by type; stable so equal types keep input order.
        kept.sort_by_key(|e| e.activity_type);

        let (in_offsets, in_nodes) = csr(n, arcs.iter().copied());
        let (out_offsets, out_nodes) = csr(n, arcs.iter().map(|&(t, s)| (s, t)));

        let lu = l as usize;
        let slots = n * lu;
        let mut inc_offsets = vec![0usize; slots + 1];
        for e in &kept {
            let t = e.activity_type as usize - 1;
            for &m in e.members() {
                inc_offsets[m.index() * lu + t + 1] += 1;
            }
        }
        for s in 0..slots {
            inc_offsets[s + 1] += inc_offsets[s];
        }
        let mut fill = inc_offsets.clone();
        let mut inc_edges = vec![HyperedgeId(0); inc_offsets[slots]];
        let mut inc_spans = vec![MemberSpan::default(); inc_offsets[slots]];
        let mut member_pool = Vec::with_capacity(inc_offsets[slots]);
        for (id, e) in kept.iter().enumerate() {
            let t = e.activity_type as usize - 1;
            let start = member_pool.len();
            member_pool.extend_from_slice(e.members());
            for (pos, &m) in e.members().iter().enumerate() {
                let slot = m.index() * lu + t;
                inc_edges[fill[slot]] = HyperedgeId(id as u32);
                inc_spans[fill[slot]] = MemberSpan {
                    edge: HyperedgeId(id as u32),
                    start,
                    len: e.len() as u32,
                    pos: pos as u32,
                };
                fill[slot] += 1;
            }
        }

        let graph = SanGraph {
            node_count: n,
            directed: self.directed,
            activity_types: l,
            edge_count: seen.len(),
            in_offsets,
            in_nodes,
            out_offsets,
            out_nodes,
            hyperedges: kept,
            inc_offsets,
            inc_edges,
            inc_spans,
            member_pool,
        };
        Ok((graph, report))
    }
}

fn csr(
    n: usize,
    pairs: impl Iterator<Item = (NodeId, NodeId)> + Clone,
) -> (Vec<usize>, Vec<NodeId>) {
    let mut offsets = vec![0usize; n + 1];
    for (k, _) in pairs.clone() {
        offsets[k.index() + 1] += 1;
    }
    for i in 0..n {
        offsets[i + 1] += offsets[i];
    }
    let mut fill = offsets.clone();
    let mut nodes = vec![NodeId(0); offsets[n]];
    for (k, v) in pairs {
        nodes[fill[k.index()]] = v;
        fill[k.index()] += 1;
    }
    for i in 0..n {
        nodes[offsets[i]..offsets[i + 1]].sort_unstable();
    }
    (offsets, nodes)
}

/// Builds a graph in the default (lenient) mode, logging how many items were dropped.
pub fn build_graph(
    node_count: usize,
    edges: impl IntoIterator<Item = (NodeId, NodeId)>,
    hyperedges: impl IntoIterator<Item = Hyperedge>,
    directed: bool,
) -> Result<SanGraph> {
    let (g, report) = GraphBuilder::new(node_count)
        .directed(directed)
        .edges(edges)
        .hyperedges(hyperedges)
        .build()?;
    if report.total_dropped() > 0 {
        warn!(
            "graph build dropped {} self-loop(s), {} duplicate edge(s), {} hyperedge(s) with <2 members",
            report.self_loops_dropped, report.duplicate_edges_dropped, report.small_hyperedges_dropped
        );
    }
    Ok(g)
}

#[inline(always)]
pub(crate) fn prefetch<T>(x: &T) {
    #[cfg(target_arch = "x86_64")]
    // SAFETY: a prefetch is only a hint and never faults.
    unsafe {
        use std::arch::x86_64::{_mm_prefetch, _MM_HINT_T0};
        _mm_prefetch::<_MM_HINT_T0>((x as *const T).cast());
    }
    #[cfg(not(target_arch = "x86_64"))]
    let _ = x;
}

/// Immutable hypergraph `G(V, E, ℰ_1, …, ℰ_l)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SanGraph {
    node_count: usize,
    directed: bool,
    activity_types: u32,
    edge_count: usize,
    in_offsets: Vec<usize>,
    in_nodes: Vec<NodeId>,
    out_offsets: Vec<usize>,
    out_nodes: Vec<NodeId>,
    hyperedges: Vec<Hyperedge>,
    inc_offsets: Vec<usize>,
    inc_edges: Vec<HyperedgeId>,
    /// Parallel to `inc_edges`: where each hyperedge's members sit in `member_pool`.
    inc_spans: Vec<MemberSpan>,
    member_pool: Vec<NodeId>,
}

/// Members of one hyperedge in the flat member pool, and the owner's position among them.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub(crate) struct MemberSpan {
    pub edge: HyperedgeId,
    pub start: usize,
    pub len: u32,
    pub pos: u32,
}

impl SanGraph {
    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    /// `l`, the number of activity types.
    pub fn activity_types(&self) -> u32 {
        self.activity_types
    }

    /// Number of distinct user-user links (undirected links counted once).
    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn hyperedge_count(&self) -> usize {
        self.hyperedges.len()
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + Clone {
        (0..self.node_count as u32).map(NodeId)
    }

    pub fn contains_node(&self, j: NodeId) -> bool {
        j.index() < self.node_count
    }

    pub fn check_node(&self, j: NodeId) -> Result<()> {
        if self.contains_node(j) {
            Ok(())
        } else {
            Err(Error::NodeOutOfRange {
                node: j.0 as u64,
                node_count: self.node_count,
            })
        }
    }

    /// Cache hint for the offsets of `j`'s neighbour and incidence lists.
    #[inline]
    pub(crate) fn prefetch_offsets(&self, j: NodeId) {
        prefetch(&self.in_offsets[j.index()]);
        prefetch(&self.in_offsets[j.index() + 1]);
        prefetch(&self.inc_offsets[j.index() * self.activity_types as usize]);
        prefetch(&self.inc_offsets[(j.index() + 1) * self.activity_types as usize]);
    }

    /// Cache hint for the heads of `j`'s neighbour and incidence lists.
    #[inline]
    pub(crate) fn prefetch_lists(&self, j: NodeId) {
        let (lo, hi) = (self.in_offsets[j.index()], self.in_offsets[j.index() + 1]);
        if lo < hi {
            prefetch(&self.in_nodes[lo]);
            prefetch(&self.in_nodes[hi - 1]);
        }
        if let Some(x) = self
            .inc_spans
            .get(self.inc_offsets[j.index() * self.activity_types as usize])
        {
            prefetch(x);
        }
    }

    /// Cache hint for the member lists of the first few hyperedges containing `j`.
    #[inline]
    pub(crate) fn prefetch_members(&self, j: NodeId) {
        let l = self.activity_types as usize;
        let lo = self.inc_offsets[j.index() * l];
        let hi = self.inc_offsets[(j.index() + 1) * l].min(lo + 4);
        for span in &self.inc_spans[lo..hi] {
            prefetch(&self.member_pool[span.start]);
            prefetch(&self.member_pool[span.start + span.len as usize - 1]);
        }
    }

    /// `N(j)`, sorted. Panics if `j` is out of range.
    #[inline]
    pub fn neighbors(&self, j: NodeId) -> &[NodeId] {
        let j = j.index();
        &self.in_nodes[self.in_offsets[j]..self.in_offsets[j + 1]]
    }

    /// Nodes `j` with `i ∈ N(j)`, i.e. the users `i` directly influences.
    #[inline]
    pub fn influenced(&self, i: NodeId) -> &[NodeId] {
        let i = i.index();
        &self.out_nodes[self.out_offsets[i]..self.out_offsets[i + 1]]
    }

    /// User-user links as given: `(i, j)` with `i` influencing `j`; undirected links once with `i < j`.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        let directed = self.directed;
        self.nodes().flat_map(move |j| {
            self.neighbors(j)
                .iter()
                .copied()
                .filter(move |&i| directed || i < j)
                .map(move |i| (i, j))
        })
    }

    pub fn hyperedges(&self) -> &[Hyperedge] {
        &self.hyperedges
    }

    #[inline]
    pub fn hyperedge(&self, id: HyperedgeId) -> &Hyperedge {
        &self.hyperedges[id.index()]
    }

    /// `ℰ_t(j)` as hyperedge ids.
    pub fn incident_hyperedges(&self, j: NodeId, t: u32) -> Result<&[HyperedgeId]> {
        self.check_node(j)?;
        if t == 0 || t > self.activity_types {
            return Err(Error::InvalidActivityType {
                activity_type: t,
                activity_types: self.activity_types,
            });
        }
        Ok(self.incident(j, t))
    }

    /// Unchecked `ℰ_t(j)`; `t` is 1-based.
    #[inline]
    pub(crate) fn incident(&self, j: NodeId, t: u32) -> &[HyperedgeId] {
        let slot = j.index() * self.activity_types as usize + (t as usize - 1);
        &self.inc_edges[self.inc_offsets[slot]..self.inc_offsets[slot + 1]]
    }

    /// Member spans of the type-`t` hyperedges containing `j`, in the order of [`Self::incident`].
    #[inline]
    pub(crate) fn incident_spans(&self, j: NodeId, t: u32) -> &[MemberSpan] {
        let slot = j.index() * self.activity_types as usize + (t as usize - 1);
        &self.inc_spans[self.inc_offsets[slot]..self.inc_offsets[slot + 1]]
    }

    #[inline]
    pub(crate) fn member_pool(&self) -> &[NodeId] {
        &self.member_pool
    }

    /// Every hyperedge containing `j`, all types.
    pub fn memberships(&self, j: NodeId) -> &[HyperedgeId] {
        let l = self.activity_types as usize;
        let lo = self.inc_offsets[j.index() * l];
        let hi = self.inc_offsets[(j.index() + 1) * l];
        &self.inc_edges[lo..hi]
    }

    /// `M_e(j)` for hyperedge `e` of this graph.
    pub fn co_members(
        &self,
        e: HyperedgeId,
        j: NodeId,
    ) -> Result<impl Iterator<Item = NodeId> + '_> {
        self.hyperedge(e).co_members(j)
    }
}

/// A node subset with O(1) membership tests.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeSet {
    mask: Vec<bool>,
    members: Vec<NodeId>,
}

impl NodeSet {
    pub fn empty(node_count: usize) -> Self {
        NodeSet {
            mask: vec![false; node_count],
            members: Vec::new(),
        }
    }

    pub fn from_nodes(node_count: usize, nodes: impl IntoIterator<Item = NodeId>) -> Result<Self> {
        let mut s = NodeSet::empty(node_count);
        for v in nodes {
            if v.index() >= node_count {
                return Err(Error::NodeOutOfRange {
                    node: v.0 as u64,
                    node_count,
                });
            }
            s.insert(v);
        }
        Ok(s)
    }

    pub fn full(node_count: usize) -> Self {
        NodeSet {
            mask: vec![true; node_count],
            members: (0..node_count as u32).map(NodeId).collect(),
        }
    }

    /// Returns false if `v` was already present.
    pub fn insert(&mut self, v: NodeId) -> bool {
        if self.mask[v.index()] {
            return false;
        }
        self.mask[v.index()] = true;
        self.members.push(v);
        true
    }

    pub fn remove(&mut self, v: NodeId) -> bool {
        if !self.mask[v.index()] {
            return false;
        }
        self.mask[v.index()] = false;
        self.members.retain(|&m| m != v);
        true
    }

    #[inline]
    pub fn contains(&self, v: NodeId) -> bool {
        self.mask.get(v.index()).copied().unwrap_or(false)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Members in insertion order.
    pub fn members(&self) -> &[NodeId] {
        &self.members
    }

    pub fn universe(&self) -> usize {
        self.mask.len()
    }

    pub fn with(&self, v: NodeId) -> NodeSet {
        let mut s = self.clone();
        s.insert(v);
        s
    }
}
