//! Building graphs from rating data, BFS sub-sampling, synthetic generation and
//! the on-disk graph format.
//!
//! Input files are tab-separated with `#` comments:
//!
//! * social links: `src<TAB>dst`, meaning `src` influences `dst`;
//! * ratings: `user<TAB>item<TAB>rating[<TAB>activity_type]`.
//!
//! Ratings below the threshold are dropped. The users who kept a rating for an
//! item form one hyperedge of the item's activity type (1 when the column is absent).

use std::collections::hash_map::Entry;
use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};
use crate::hypergraph::{GraphBuilder, Hyperedge, NodeId, SanGraph, MAX_NODES};
use crate::stream::{self, Domain};

pub const DEFAULT_THRESHOLD: f64 = 3.0;
pub const GRAPH_FORMAT_VERSION: u32 = 1;
const GRAPH_MAGIC: &str = "san-graph";

#[derive(Debug, Clone, PartialEq)]
pub struct RatingRecord {
    pub user: String,
    pub item: String,
    pub rating: f64,
    pub activity_type: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IngestReport {
    pub nodes_kept: usize,
    pub edges_kept: usize,
    pub ratings_read: usize,
    pub ratings_kept: usize,
    pub ratings_dropped_below_threshold: usize,
    pub malformed_lines: usize,
    pub hyperedges_built: usize,
    pub hyperedges_dropped_small: usize,
    pub self_loops_dropped: usize,
    pub duplicate_edges_dropped: usize,
    pub reversed_pairs: usize,
}

impl IngestReport {
    pub fn entries(&self) -> [(&'static str, usize); 11] {
        [
            ("nodes_kept", self.nodes_kept),
            ("edges_kept", self.edges_kept),
            ("ratings_read", self.ratings_read),
            ("ratings_kept", self.ratings_kept),
            (
                "ratings_dropped_below_threshold",
                self.ratings_dropped_below_threshold,
            ),
            ("malformed_lines", self.malformed_lines),
            ("hyperedges_built", self.hyperedges_built),
            ("hyperedges_dropped_small", self.hyperedges_dropped_small),
            ("self_loops_dropped", self.self_loops_dropped),
            ("duplicate_edges_dropped", self.duplicate_edges_dropped),
            ("reversed_pairs", self.reversed_pairs),
        ]
    }
}

/// `key = value` lines.
impl fmt::Display for IngestReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in self.entries() {
            writeln!(f, "{k} = {v}")?;
        }
        Ok(())
    }
}

/// Dense node ids for external user ids, in order of first appearance.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IdMap {
    external: Vec<String>,
    lookup: HashMap<String, NodeId>,
}

impl IdMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.external.len()
    }

    pub fn is_empty(&self) -> bool {
        self.external.is_empty()
    }

    pub fn get(&self, external: &str) -> Option<NodeId> {
        self.lookup.get(external).copied()
    }

    pub fn external(&self, id: NodeId) -> Option<&str> {
        self.external.get(id.index()).map(String::as_str)
    }

    pub fn get_or_insert(&mut self, external: &str) -> Result<NodeId> {
        if let Some(&id) = self.lookup.get(external) {
            return Ok(id);
        }
        if self.external.len() >= MAX_NODES {
            return Err(Error::GraphTooLarge {
                node_count: self.external.len() + 1,
                limit: MAX_NODES,
            });
        }
        let id = NodeId::from_index(self.external.len());
        self.external.push(external.to_owned());
        self.lookup.insert(external.to_owned(), id);
        Ok(id)
    }

    /// `external_id<TAB>node_id` per line.
    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        (|| {
            for (k, ext) in self.external.iter().enumerate() {
                writeln!(out, "{ext}\t{k}")?;
            }
            out.flush()
        })()
        .map_err(|e| Error::io(path, e))
    }

    /// Reads a mapping file. Node ids must be exactly `0..len` in some order.
    pub fn load(path: &Path) -> Result<Self> {
        let mut pairs = Vec::new();
        for_each_line(path, |line_no, line| {
            let (ext, id) = line
                .split_once('\t')
                .ok_or_else(|| parse_err(path, line_no, "expected external_id<TAB>node_id"))?;
            let id: usize = id
                .trim()
                .parse()
                .map_err(|e| parse_err(path, line_no, format!("bad node id {id:?}: {e}")))?;
            pairs.push((id, ext.to_owned(), line_no));
            Ok(())
        })?;
        pairs.sort_by_key(|p| p.0);
        let mut map = IdMap::new();
        for (k, (id, ext, line_no)) in pairs.into_iter().enumerate() {
            if id != k {
                return Err(parse_err(
                    path,
                    line_no,
                    format!("node ids are not dense: expected {k}, found {id}"),
                ));
            }
            if map.lookup.contains_key(&ext) {
                return Err(parse_err(
                    path,
                    line_no,
                    format!("external id {ext:?} listed twice"),
                ));
            }
            map.get_or_insert(&ext)?;
        }
        Ok(map)
    }
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// Calls `f(line_number, trimmed_line)` for each non-blank, non-comment line.
fn for_each_line(path: &Path, mut f: impl FnMut(usize, &str) -> Result<()>) -> Result<()> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    for (k, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim_end_matches(['\r', '\n']);
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        f(k + 1, line)?;
    }
    Ok(())
}

/// In lenient mode a parse error is logged and counted instead of returned.
fn tolerate(lenient: bool, malformed: &mut usize, r: Result<()>) -> Result<()> {
    match r {
        Err(e @ Error::Parse { .. }) if lenient => {
            log::warn!("skipping malformed line: {e}");
            *malformed += 1;
            Ok(())
        }
        other => other,
    }
}

pub fn read_social_edges(
    path: &Path,
    lenient: bool,
    report: &mut IngestReport,
) -> Result<Vec<(String, String)>> {
    let mut edges = Vec::new();
    let mut malformed = 0;
    for_each_line(path, |k, line| {
        let r = (|| {
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 2 || fields.iter().any(|f| f.trim().is_empty()) {
                return Err(parse_err(
                    path,
                    k,
                    format!("expected user<TAB>user, found {} field(s)", fields.len()),
                ));
            }
            edges.push((fields[0].trim().to_owned(), fields[1].trim().to_owned()));
            Ok(())
        })();
        tolerate(lenient, &mut malformed, r)
    })?;
    report.malformed_lines += malformed;
    Ok(edges)
}

pub fn read_ratings(
    path: &Path,
    lenient: bool,
    report: &mut IngestReport,
) -> Result<Vec<RatingRecord>> {
    let mut records = Vec::new();
    let mut malformed = 0;
    for_each_line(path, |k, line| {
        let r = (|| {
            let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
            if !(3..=4).contains(&fields.len()) || fields[..2].iter().any(|f| f.is_empty()) {
                return Err(parse_err(
                    path,
                    k,
                    format!(
                        "expected user<TAB>item<TAB>rating[<TAB>type], found {} field(s)",
                        fields.len()
                    ),
                ));
            }
            let rating: f64 = fields[2]
                .parse()
                .map_err(|e| parse_err(path, k, format!("bad rating {:?}: {e}", fields[2])))?;
            if !rating.is_finite() {
                return Err(parse_err(path, k, format!("rating {rating} is not finite")));
            }
            let activity_type = match fields.get(3) {
                None => 1,
                Some(t) => match t.parse::<u32>() {
                    Ok(t) if t >= 1 => t,
                    _ => return Err(parse_err(path, k, format!("bad activity type {t:?}"))),
                },
            };
            records.push(RatingRecord {
                user: fields[0].to_owned(),
                item: fields[1].to_owned(),
                rating,
                activity_type,
            });
            Ok(())
        })();
        tolerate(lenient, &mut malformed, r)
    })?;
    report.malformed_lines += malformed;
    Ok(records)
}

#[derive(Debug, Clone)]
pub struct IngestOptions {
    /// Ratings strictly below this are dropped.
    pub threshold: f64,
    pub directed: bool,
    /// Count and skip malformed lines instead of failing.
    pub lenient: bool,
    /// Ids assigned before reading; new users are appended.
    pub id_map: Option<IdMap>,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions {
            threshold: DEFAULT_THRESHOLD,
            directed: false,
            lenient: false,
            id_map: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LoadedSan {
    pub graph: SanGraph,
    pub ids: IdMap,
    /// External item id of each hyperedge, indexed like `graph.hyperedges()`.
    pub items: Vec<String>,
    pub report: IngestReport,
}

/// Builds a SAN from a social-link file and an optional rating file.
pub fn load_san(social: &Path, ratings: Option<&Path>, opts: &IngestOptions) -> Result<LoadedSan> {
    let mut report = IngestReport::default();
    let links = read_social_edges(social, opts.lenient, &mut report)?;
    let records = match ratings {
        Some(p) => read_ratings(p, opts.lenient, &mut report)?,
        None => Vec::new(),
    };
    from_records(links, records, opts, report)
}

/// [`load_san`] on already parsed input.
pub fn from_records(
    links: Vec<(String, String)>,
    records: Vec<RatingRecord>,
    opts: &IngestOptions,
    mut report: IngestReport,
) -> Result<LoadedSan> {
    let mut ids = opts.id_map.clone().unwrap_or_default();
    let mut edges = Vec::with_capacity(links.len());
    for (a, b) in &links {
        edges.push((ids.get_or_insert(a)?, ids.get_or_insert(b)?));
    }
    if !opts.directed {
        let mut ordered: Vec<(NodeId, NodeId)> =
            edges.iter().copied().filter(|(a, b)| a != b).collect();
        ordered.sort_unstable();
        ordered.dedup();
        report.reversed_pairs = ordered
            .iter()
            .filter(|&&(a, b)| a < b && ordered.binary_search(&(b, a)).is_ok())
            .count();
        if report.reversed_pairs > 0 {
            log::warn!(
                "{} link(s) appear in both directions; treated as one undirected link each",
                report.reversed_pairs
            );
        }
    }

    report.ratings_read = records.len();
    let mut groups: Vec<(u32, String, Vec<NodeId>)> = Vec::new();
    let mut group_of: HashMap<(u32, String), usize> = HashMap::new();
    for rec in records {
        if rec.rating < opts.threshold {
            report.ratings_dropped_below_threshold += 1;
            continue;
        }
        report.ratings_kept += 1;
        let user = ids.get_or_insert(&rec.user)?;
        let k = match group_of.entry((rec.activity_type, rec.item)) {
            Entry::Occupied(e) => *e.get(),
            Entry::Vacant(e) => {
                groups.push((e.key().0, e.key().1.clone(), Vec::new()));
                *e.insert(groups.len() - 1)
            }
        };
        groups[k].2.push(user);
    }

    let mut builder = GraphBuilder::new(ids.len())
        .directed(opts.directed)
        .edges(edges);
    let mut items = Vec::new();
    for (t, item, members) in groups {
        let e = Hyperedge::new(t, members);
        if e.len() < 2 {
            report.hyperedges_dropped_small += 1;
            continue;
        }
        items.push((t, item));
        builder.push_hyperedge(e);
    }
    let (graph, built) = builder.build()?;
    // The builder orders hyperedges by type, stably.
    items.sort_by_key(|&(t, _)| t);
    report.nodes_kept = graph.node_count();
    report.edges_kept = graph.edge_count();
    report.hyperedges_built = graph.hyperedge_count();
    report.self_loops_dropped = built.self_loops_dropped;
    report.duplicate_edges_dropped = built.duplicate_edges_dropped;
    Ok(LoadedSan {
        graph,
        ids,
        items: items.into_iter().map(|(_, item)| item).collect(),
        report,
    })
}

/// Writes `g` back out as social and rating TSV files that [`load_san`] reads
/// into the same graph. Ratings are written with value `rating`.
pub fn export_tsv(
    g: &SanGraph,
    ids: &IdMap,
    items: Option<&[String]>,
    rating: f64,
    social: &Path,
    ratings: &Path,
) -> Result<()> {
    let name = |v: NodeId| {
        ids.external(v)
            .map(str::to_owned)
            .unwrap_or_else(|| v.to_string())
    };
    let file = File::create(social).map_err(|e| Error::io(social, e))?;
    let mut out = BufWriter::new(file);
    (|| {
        for (i, j) in g.edges() {
            writeln!(out, "{}\t{}", name(i), name(j))?;
        }
        out.flush()
    })()
    .map_err(|e| Error::io(social, e))?;
    let file = File::create(ratings).map_err(|e| Error::io(ratings, e))?;
    let mut out = BufWriter::new(file);
    (|| {
        for (k, e) in g.hyperedges().iter().enumerate() {
            let item = items
                .and_then(|it| it.get(k))
                .cloned()
                .unwrap_or_else(|| format!("h{k}"));
            for &m in e.members() {
                writeln!(out, "{}\t{item}\t{rating}\t{}", name(m), e.activity_type())?;
            }
        }
        out.flush()
    })()
    .map_err(|e| Error::io(ratings, e))
}

/// Sub-SAN induced by the first `target` nodes reached by BFS from `start`.
///
/// Links are followed in both directions. Each BFS level is visited in
/// increasing NodeId order. The result keeps the relative order of the
/// surviving nodes; the second value maps new ids to old ones.
pub fn bfs_extract(g: &SanGraph, start: NodeId, target: usize) -> Result<(SanGraph, Vec<NodeId>)> {
    g.check_node(start)?;
    if target == 0 || target > g.node_count() {
        return Err(Error::param(format!(
            "target size {target} must lie in 1..={}",
            g.node_count()
        )));
    }
    let n = g.node_count();
    let mut seen = vec![false; n];
    seen[start.index()] = true;
    let mut kept = vec![start];
    let mut level = vec![start];
    'bfs: while kept.len() < target && !level.is_empty() {
        let mut next: Vec<NodeId> = Vec::new();
        for &v in &level {
            for &w in g.neighbors(v).iter().chain(g.influenced(v)) {
                if !seen[w.index()] {
                    seen[w.index()] = true;
                    next.push(w);
                }
            }
        }
        next.sort_unstable();
        for &w in &next {
            if kept.len() == target {
                break 'bfs;
            }
            kept.push(w);
        }
        level = next;
    }
    if kept.len() < target {
        log::warn!(
            "component of node {start} has {} nodes, fewer than the requested {target}",
            kept.len()
        );
    }
    kept.sort_unstable();
    let mut new_id = vec![u32::MAX; n];
    for (k, &v) in kept.iter().enumerate() {
        new_id[v.index()] = k as u32;
    }
    let map = |v: NodeId| (new_id[v.index()] != u32::MAX).then(|| NodeId(new_id[v.index()]));
    let edges = g.edges().filter_map(|(i, j)| Some((map(i)?, map(j)?)));
    let hyperedges = g
        .hyperedges()
        .iter()
        .map(|e| {
            Hyperedge::new(
                e.activity_type(),
                e.members().iter().filter_map(|&m| map(m)),
            )
        })
        .filter(|e| e.len() >= 2);
    let (sub, _) = GraphBuilder::new(kept.len())
        .directed(g.is_directed())
        .activity_types(g.activity_types())
        .edges(edges)
        .hyperedges(hyperedges)
        .build()?;
    Ok((sub, kept))
}

/// Random SAN: Erdős–Rényi links plus hyperedges with independent membership.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub nodes: usize,
    pub edge_prob: f64,
    pub activities: usize,
    pub membership_prob: f64,
    pub activity_types: u32,
    pub directed: bool,
    pub seed: u64,
}

/// Attempts per hyperedge before giving up on reaching two members.
const MAX_REDRAWS: usize = 10_000;

impl SynthConfig {
    pub fn new(
        nodes: usize,
        edge_prob: f64,
        activities: usize,
        membership_prob: f64,
        seed: u64,
    ) -> Self {
        SynthConfig {
            nodes,
            edge_prob,
            activities,
            membership_prob,
            activity_types: 1,
            directed: false,
            seed,
        }
    }

    pub fn directed(mut self, directed: bool) -> Self {
        self.directed = directed;
        self
    }

    pub fn activity_types(mut self, l: u32) -> Self {
        self.activity_types = l;
        self
    }

    pub fn generate(&self) -> Result<SanGraph> {
        for (name, p) in [
            ("edge", self.edge_prob),
            ("membership", self.membership_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::param(format!(
                    "{name} probability {p} outside [0, 1]"
                )));
            }
        }
        if self.activity_types == 0 {
            return Err(Error::param("at least one activity type is required"));
        }
        let n = self.nodes;
        let mut rng = stream::stream(self.seed, Domain::Synth, 0, 0);
        let mut edges = Vec::new();
        // Pair k of row i is (i, j) with j > i, or any j ≠ i when directed.
        let row_len = |i: usize| if self.directed { n - 1 } else { n - 1 - i };
        let pair = |i: usize, k: usize| {
            if self.directed {
                if k < i {
                    k
                } else {
                    k + 1
                }
            } else {
                i + 1 + k
            }
        };
        if n >= 2 {
            let (mut i, mut k) = (0usize, 0usize);
            let mut skip = geometric_skip(&mut rng, self.edge_prob);
            'edges: loop {
                k = match k.checked_add(skip) {
                    Some(k) => k,
                    None => break,
                };
                while k >= row_len(i) {
                    k -= row_len(i);
                    i += 1;
                    if i >= n || row_len(i) == 0 {
                        break 'edges;
                    }
                }
                edges.push((NodeId::from_index(i), NodeId::from_index(pair(i, k))));
                k += 1;
                skip = geometric_skip(&mut rng, self.edge_prob);
            }
        }

        let mut rng = stream::stream(self.seed, Domain::Synth, 1, 0);
        let mut hyperedges = Vec::with_capacity(self.activities);
        let mut members = Vec::new();
        let mut abandoned = 0;
        for _ in 0..self.activities {
            let t = rng.random_range(1..=self.activity_types);
            let mut ok = false;
            if n >= 2 && self.membership_prob > 0.0 {
                for _ in 0..MAX_REDRAWS {
                    members.clear();
                    let mut v = geometric_skip(&mut rng, self.membership_prob);
                    while v < n {
                        members.push(NodeId::from_index(v));
                        v = v
                            .saturating_add(1)
                            .saturating_add(geometric_skip(&mut rng, self.membership_prob));
                    }
                    if members.len() >= 2 {
                        ok = true;
                        break;
                    }
                }
            }
            if ok {
                hyperedges.push(Hyperedge::new(t, members.iter().copied()));
            } else {
                abandoned += 1;
            }
        }
        if abandoned > 0 {
            log::warn!(
                "{abandoned} synthetic activities never reached two members and were left out"
            );
        }
        let (g, _) = GraphBuilder::new(n)
            .directed(self.directed)
            .activity_types(self.activity_types)
            .edges(edges)
            .hyperedges(hyperedges)
            .build()?;
        Ok(g)
    }
}

/// Number of failures before the next success of a Bernoulli(`p`) sequence.
fn geometric_skip<R: Rng + ?Sized>(rng: &mut R, p: f64) -> usize {
    if p >= 1.0 {
        return 0;
    }
    if p <= 0.0 {
        return usize::MAX;
    }
    let u: f64 = 1.0 - rng.random::<f64>();
    let s = (u.ln() / (1.0 - p).ln()).floor();
    if s >= usize::MAX as f64 {
        usize::MAX
    } else {
        s as usize
    }
}

/// Undirected random SAN with one activity type.
pub fn synth_san(
    n: usize,
    edge_prob: f64,
    activities: usize,
    membership_prob: f64,
    seed: u64,
) -> Result<SanGraph> {
    SynthConfig::new(n, edge_prob, activities, membership_prob, seed).generate()
}

/// Text serialization:
///
/// ```text
/// san-graph 1
/// nodes <n>
/// directed <0|1>
/// types <l>
/// e <i> <j>            one per link, i influences j
/// h <type> <m1> <m2>…  one per hyperedge
/// ```
pub fn write_graph(g: &SanGraph, out: &mut impl Write) -> std::io::Result<()> {
    writeln!(out, "{GRAPH_MAGIC} {GRAPH_FORMAT_VERSION}")?;
    writeln!(out, "nodes {}", g.node_count())?;
    writeln!(out, "directed {}", g.is_directed() as u8)?;
    writeln!(out, "types {}", g.activity_types())?;
    for (i, j) in g.edges() {
        writeln!(out, "e {i} {j}")?;
    }
    for e in g.hyperedges() {
        write!(out, "h {}", e.activity_type())?;
        for m in e.members() {
            write!(out, " {m}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

pub fn save_graph(g: &SanGraph, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    write_graph(g, &mut out)
        .and_then(|_| out.flush())
        .map_err(|e| Error::io(path, e))
}

/// Reads a file written by [`save_graph`]. The build is strict: the file must
/// describe a valid graph as is.
pub fn load_graph(path: &Path) -> Result<SanGraph> {
    let mut header: Vec<(&'static str, usize)> = Vec::new();
    let mut builder: Option<GraphBuilder> = None;
    let mut line_count = 0;
    for_each_line(path, |k, line| {
        line_count += 1;
        let mut words = line.split_whitespace();
        let head = words.next().unwrap_or_default();
        let nums = |words: std::str::SplitWhitespace<'_>| -> Result<Vec<u64>> {
            words
                .map(|w| {
                    w.parse::<u64>()
                        .map_err(|e| parse_err(path, k, format!("bad number {w:?}: {e}")))
                })
                .collect()
        };
        let id = |x: u64| -> Result<NodeId> {
            u32::try_from(x)
                .map(NodeId)
                .map_err(|_| parse_err(path, k, format!("node id {x} too large")))
        };
        if line_count == 1 {
            let version = nums(words)?;
            if head != GRAPH_MAGIC || version != [GRAPH_FORMAT_VERSION as u64] {
                return Err(parse_err(
                    path,
                    k,
                    format!("expected header `{GRAPH_MAGIC} {GRAPH_FORMAT_VERSION}`"),
                ));
            }
            return Ok(());
        }
        if header.len() < 3 {
            let expected = ["nodes", "directed", "types"][header.len()];
            let v = nums(words)?;
            if head != expected || v.len() != 1 {
                return Err(parse_err(path, k, format!("expected `{expected} <value>`")));
            }
            header.push((expected, v[0] as usize));
            if header.len() == 3 {
                if header[1].1 > 1 {
                    return Err(parse_err(path, k - 1, "directed must be 0 or 1"));
                }
                builder = Some(
                    GraphBuilder::new(header[0].1)
                        .directed(header[1].1 == 1)
                        .activity_types(header[2].1 as u32)
                        .strict(true),
                );
            }
            return Ok(());
        }
        let b = builder.as_mut().expect("header complete");
        match head {
            "e" => {
                let v = nums(words)?;
                if v.len() != 2 {
                    return Err(parse_err(path, k, "a link needs exactly two endpoints"));
                }
                b.push_edge(id(v[0])?, id(v[1])?);
            }
            "h" => {
                let v = nums(words)?;
                if v.is_empty() {
                    return Err(parse_err(path, k, "missing activity type"));
                }
                let members = v[1..].iter().map(|&x| id(x)).collect::<Result<Vec<_>>>()?;
                b.push_hyperedge_members(v[0] as u32, &members)
                    .map_err(|e| parse_err(path, k, e.to_string()))?;
            }
            other => return Err(parse_err(path, k, format!("unknown record {other:?}"))),
        }
        Ok(())
    })?;
    let builder = builder.ok_or_else(|| parse_err(path, line_count, "truncated header"))?;
    let (g, _) = builder
        .build()
        .map_err(|e| parse_err(path, 0, e.to_string()))?;
    Ok(g)
}
