use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use sanim::cascade::{
    improvement_ratio, simulate_spread, to_weighted_graph, CascadeConfig, SpreadEstimate,
};
use sanim::greedy::{greedy_baseline, greedy_optimized_with, GainRule, GreedyOptions};
use sanim::hitting::{exact_hitting_all, mc_hitting, truncated_hitting_all};
use sanim::ingest::{
    bfs_extract, load_graph, load_san, save_graph, IdMap, IngestOptions, SynthConfig,
};
use sanim::stream::{self, Domain};
use sanim::{ModelParams, NodeId, NodeSet, SanGraph, TransitionModel};

use crate::args::*;
use crate::manifest::{manifest_path, sibling, RunManifest};
use crate::{OutputError, UsageError};

pub fn run(cli: Cli) -> Result<()> {
    let argv: Vec<String> = std::env::args().skip(1).collect();
    dispatch(cli.command, argv)
}

fn dispatch(command: Command, argv: Vec<String>) -> Result<()> {
    let run = Run {
        argv,
        start: Instant::now(),
    };
    match command {
        Command::Ingest(a) => ingest(&a, run),
        Command::Select(a) => select(&a, run),
        Command::Estimate(a) => estimate(&a, run),
        Command::Simulate(a) => simulate(&a, run),
        Command::Bench(a) => bench(&a, run),
        Command::ExportWeighted(a) => export_weighted(&a, run),
        Command::Replay(a) => {
            let m = RunManifest::load(&a.manifest)?;
            let cli = <Cli as clap::Parser>::try_parse_from(
                std::iter::once("sanim".to_string()).chain(m.argv.iter().cloned()),
            )
            .map_err(|e| UsageError(format!("manifest arguments do not parse: {e}")))?;
            if matches!(cli.command, Command::Replay(_)) {
                return Err(UsageError("a manifest cannot replay another replay".into()).into());
            }
            log::info!("replaying `{}` from {}", m.subcommand, a.manifest.display());
            dispatch(cli.command, m.argv)
        }
    }
}

struct Run {
    argv: Vec<String>,
    start: Instant,
}

impl Run {
    fn finish(
        self,
        subcommand: &str,
        out: &Path,
        parameters: impl Serialize,
        results: serde_json::Value,
        mut outputs: Vec<PathBuf>,
    ) -> Result<()> {
        let path = manifest_path(out);
        outputs.insert(0, out.to_path_buf());
        let manifest = RunManifest {
            subcommand: subcommand.to_string(),
            argv: self.argv,
            parameters: json!({ "arguments": parameters, "results": results }),
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            wall_time_seconds: self.start.elapsed().as_secs_f64(),
            outputs,
        };
        manifest.save(&path)
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).context(OutputError(path.to_path_buf()))
}

fn output<T>(path: &Path, r: sanim::Result<T>) -> Result<T> {
    r.map_err(|e| anyhow::Error::new(e).context(OutputError(path.to_path_buf())))
}

/// Seed lists are either a `select` CSV or one node id per line (first field).
fn read_seeds(path: &Path, g: &SanGraph) -> Result<(Vec<NodeId>, NodeSet)> {
    let text = std::fs::read_to_string(path).map_err(|e| sanim::Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let mut seeds = Vec::new();
    let mut column = 0;
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if line.starts_with("rank,") {
            column = 1;
            continue;
        }
        let field = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|f| !f.is_empty())
            .nth(column)
            .unwrap_or_default();
        let id: u32 = field.parse().map_err(|e| sanim::Error::Parse {
            path: path.to_path_buf(),
            line: k + 1,
            message: format!("bad node id {field:?}: {e}"),
        })?;
        seeds.push(NodeId(id));
    }
    let set = NodeSet::from_nodes(g.node_count(), seeds.iter().copied())?;
    Ok((seeds, set))
}

fn model_params(m: &ModelArgs, g: &SanGraph) -> Result<(Resolved, ModelParams)> {
    let res = m.resolve()?;
    let params = res.params(g.activity_types())?;
    Ok((res, params))
}

fn ingest(a: &IngestArgs, run: Run) -> Result<()> {
    if !a.threshold.is_finite() {
        return Err(UsageError("--threshold must be finite".into()).into());
    }
    let id_map = a.id_map.as_deref().map(IdMap::load).transpose()?;
    let opts = IngestOptions {
        threshold: a.threshold,
        directed: a.directed,
        lenient: a.lenient,
        id_map,
    };
    let loaded = load_san(&a.social, a.ratings.as_deref(), &opts)?;
    let mut report = loaded.report.to_string();
    let (graph, ids) = match a.extract_bfs {
        None => (loaded.graph, loaded.ids),
        Some(target) => {
            let n = loaded.graph.node_count();
            if n == 0 || target == 0 {
                return Err(
                    UsageError("BFS extraction needs a nonempty graph and target".into()).into(),
                );
            }
            if target > n {
                log::warn!("--extract-bfs {target} exceeds the {n} nodes available");
            }
            let start = match a.bfs_start {
                Some(v) => NodeId(v),
                None => NodeId::from_index(
                    stream::stream(a.bfs_start_seed, Domain::Misc, 0, 0).random_range(0..n),
                ),
            };
            let (sub, old) = bfs_extract(&loaded.graph, start, target.min(n))?;
            let mut ids = IdMap::new();
            for &v in &old {
                ids.get_or_insert(
                    loaded
                        .ids
                        .external(v)
                        .expect("every node has an external id"),
                )?;
            }
            let _ = writeln!(report, "bfs_start = {start}");
            let _ = writeln!(report, "bfs_nodes = {}", sub.node_count());
            let _ = writeln!(report, "bfs_edges = {}", sub.edge_count());
            let _ = writeln!(report, "bfs_hyperedges = {}", sub.hyperedge_count());
            (sub, ids)
        }
    };
    output(&a.out, save_graph(&graph, &a.out))?;
    let ids_path = sibling(&a.out, "ids.tsv");
    output(&ids_path, ids.save(&ids_path))?;
    let report_path = sibling(&a.out, "report.txt");
    write_text(&report_path, &report)?;
    println!(
        "{} nodes, {} links, {} hyperedges -> {}",
        graph.node_count(),
        graph.edge_count(),
        graph.hyperedge_count(),
        a.out.display()
    );
    run.finish(
        "ingest",
        &a.out,
        a,
        json!(null),
        vec![ids_path, report_path],
    )
}

fn select(a: &SelectArgs, run: Run) -> Result<()> {
    a.model.check()?;
    let g = load_graph(&a.graph)?;
    let (res, params) = model_params(&a.model, &g)?;
    let k = a.k as usize;
    let result = match a.algorithm {
        Algorithm::Baseline => greedy_baseline(&g, params, k)?,
        Algorithm::Optimized => {
            let opts = GreedyOptions {
                gain_rule: match a.gain_rule {
                    GainRuleArg::Direct => GainRule::Direct,
                    GainRuleArg::Factored => GainRule::Factored,
                },
                memory_budget: a.memory_budget,
                spill_path: a.spill.clone(),
            };
            greedy_optimized_with(&g, params, k, &opts)?
        }
    };
    let mut csv = String::from("rank,node,marginal_gain,cumulative_gain\n");
    let mut total = 0.0;
    for (rank, (v, gain)) in result.seeds.iter().zip(&result.marginal_gains).enumerate() {
        total += gain;
        let _ = writeln!(csv, "{},{},{},{}", rank + 1, v, gain, total);
    }
    write_text(&a.out, &csv)?;
    println!(
        "selected {k} seeds ({:?}, L={}, R={}); estimated centrality {}",
        a.algorithm, res.walk_length, res.replicates, total
    );
    run.finish(
        "select",
        &a.out,
        json!({ "args": a, "resolved": res }),
        json!({ "estimated_centrality": total }),
        vec![],
    )
}

fn estimate(a: &EstimateArgs, run: Run) -> Result<()> {
    a.model.check()?;
    let g = load_graph(&a.graph)?;
    let (res, params) = model_params(&a.model, &g)?;
    let (_, s) = read_seeds(&a.seeds, &g)?;
    let model = TransitionModel::new(&g, params)?;
    let h = match a.method {
        Method::Exact => exact_hitting_all(&model, &s)?,
        Method::Truncated => truncated_hitting_all(&model, &s, res.walk_length),
        Method::Mc => g
            .nodes()
            .collect::<Vec<_>>()
            .par_iter()
            .map(|&j| mc_hitting(&model, j, &s).value)
            .collect(),
    };
    let centrality = if s.is_empty() { 0.0 } else { h.iter().sum() };
    let mut csv = String::from("node,h\n");
    for (j, v) in h.iter().enumerate() {
        let _ = writeln!(csv, "{j},{v}");
    }
    write_text(&a.out, &csv)?;
    println!(
        "centrality {centrality} ({} seeds, {:?})",
        s.len(),
        a.method
    );
    run.finish(
        "estimate",
        &a.out,
        json!({ "args": a, "resolved": res }),
        json!({ "centrality": centrality }),
        vec![],
    )
}

fn spread_row(csv: &mut String, label: &str, path: &Path, e: &SpreadEstimate) {
    let _ = writeln!(
        csv,
        "{label},{},{},{},{}",
        path.display(),
        e.mean_spread,
        e.std_error,
        e.simulations
    );
}

fn simulate(a: &SimulateArgs, run: Run) -> Result<()> {
    a.model.check()?;
    let cfg = CascadeConfig::new(a.simulations, a.model.seed)?;
    if a.simulations == 1 {
        log::warn!("a single simulation reports std_error 0");
    }
    let g = load_graph(&a.graph)?;
    let (res, params) = model_params(&a.model, &g)?;
    let (_, s) = read_seeds(&a.seeds, &g)?;
    let est = simulate_spread(&g, &params, &s, &cfg)?;
    let mut csv = String::from("set,path,mean_spread,std_error,simulations\n");
    spread_row(&mut csv, "seeds", &a.seeds, &est);
    let mut results = json!({ "mean_spread": est.mean_spread, "std_error": est.std_error });
    println!("spread {} ± {}", est.mean_spread, est.std_error);
    if let Some(other) = &a.compare {
        let (_, t) = read_seeds(other, &g)?;
        let base = simulate_spread(&g, &params, &t, &cfg)?;
        spread_row(&mut csv, "compare", other, &base);
        let ratio = improvement_ratio(est.mean_spread, base.mean_spread)?;
        println!(
            "compare {} ± {}; improvement ratio {ratio}",
            base.mean_spread, base.std_error
        );
        results["compare_mean_spread"] = json!(base.mean_spread);
        results["improvement_ratio"] = json!(ratio);
    }
    write_text(&a.out, &csv)?;
    run.finish(
        "simulate",
        &a.out,
        json!({ "args": a, "resolved": res }),
        results,
        vec![],
    )
}

fn bench(a: &BenchArgs, run: Run) -> Result<()> {
    if !(a.c > 0.0 && a.c < 1.0) {
        return Err(UsageError(format!("--c {} must lie in (0, 1)", a.c)).into());
    }
    if a.alphas.iter().any(|x| !(0.0..=1.0).contains(x)) {
        return Err(UsageError("--alphas values must lie in [0, 1]".into()).into());
    }
    let mut csv =
        String::from("n,alpha,k,algorithm,wall_time_seconds,estimated_centrality,spread\n");
    for &n in &a.sizes {
        let edge_prob = if n > 1 {
            (a.avg_degree / (n - 1) as f64).min(1.0)
        } else {
            0.0
        };
        let activities = (a.activities_per_node * n as f64).round() as usize;
        let membership = if n > 0 {
            (a.members_per_activity / n as f64).min(1.0)
        } else {
            0.0
        };
        let g = SynthConfig::new(n, edge_prob, activities, membership, a.seed).generate()?;
        log::info!(
            "n={n}: {} links, {} activities",
            g.edge_count(),
            g.hyperedge_count()
        );
        for &alpha in &a.alphas {
            let params = ModelParams::new(a.c, alpha)
                .with_walk_length(a.walk_length)
                .with_replicates(a.replicates)
                .with_seed(a.seed);
            for &k in &a.ks {
                if k == 0 || k > n {
                    log::warn!("skipping k={k} for n={n}");
                    continue;
                }
                for &alg in &a.algorithms {
                    let t = Instant::now();
                    let result = match alg {
                        Algorithm::Baseline => greedy_baseline(&g, params.clone(), k)?,
                        Algorithm::Optimized => {
                            greedy_optimized_with(&g, params.clone(), k, &GreedyOptions::default())?
                        }
                    };
                    let wall = t.elapsed().as_secs_f64();
                    let spread = if a.simulations > 0 {
                        let s = NodeSet::from_nodes(n, result.seeds.iter().copied())?;
                        let cfg = CascadeConfig::new(a.simulations, a.seed)?;
                        simulate_spread(&g, &params, &s, &cfg)?
                            .mean_spread
                            .to_string()
                    } else {
                        String::new()
                    };
                    let name = match alg {
                        Algorithm::Baseline => "baseline",
                        Algorithm::Optimized => "optimized",
                    };
                    let _ = writeln!(
                        csv,
                        "{n},{alpha},{k},{name},{wall:.6},{},{spread}",
                        result.estimated_centrality()
                    );
                }
            }
        }
    }
    write_text(&a.out, &csv)?;
    run.finish("bench", &a.out, a, json!(null), vec![])
}

fn export_weighted(a: &ExportArgs, run: Run) -> Result<()> {
    a.model.check()?;
    let g = load_graph(&a.graph)?;
    let (res, params) = model_params(&a.model, &g)?;
    let wg = to_weighted_graph(&g, &params)?;
    output(&a.out, wg.save_tsv(&a.out))?;
    println!("{} arcs -> {}", wg.arc_count(), a.out.display());
    run.finish(
        "export-weighted",
        &a.out,
        json!({ "args": a, "resolved": res }),
        json!({ "arcs": wg.arc_count() }),
        vec![],
    )
}
