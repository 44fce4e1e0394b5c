use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use sanim::hitting::{required_replicates, split_budget, ErrorBudget};
use sanim::{ActivityWeights, ModelParams};

use crate::UsageError;

#[derive(Debug, Parser)]
#[command(
    name = "sanim",
    version,
    about = "Influence maximization on social-activity networks"
)]
pub struct Cli {
    /// Worker thread cap (defaults to all cores).
    #[arg(long, global = true, env = "SANIM_THREADS")]
    pub threads: Option<usize>,

    /// More logging (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a graph file from social-link and rating TSV files.
    Ingest(IngestArgs),
    /// Pick k seeds by greedy maximization of influence centrality.
    Select(SelectArgs),
    /// Hitting probabilities and centrality of a seed set.
    Estimate(EstimateArgs),
    /// Independent cascade spread of one or two seed sets.
    Simulate(SimulateArgs),
    /// Timing sweep on synthetic graphs.
    Bench(BenchArgs),
    /// Write the equivalent weighted digraph as `src<TAB>dst<TAB>weight`.
    ExportWeighted(ExportArgs),
    /// Re-run the command recorded in a manifest.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ModelArgs {
    /// Decay factor c in (0, 1).
    #[arg(long = "c", default_value_t = 0.5)]
    pub decay: f64,

    /// Activity weight α, or one weight per activity type (comma-separated).
    /// A single value on a multi-type graph is split evenly across types.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    pub alpha: Vec<f64>,

    /// Walk length L.
    #[arg(short = 'L', long)]
    pub walk_length: Option<usize>,

    /// Walks per node R.
    #[arg(short = 'R', long)]
    pub replicates: Option<usize>,

    /// Total error target; sets L and R when they are not given, split evenly
    /// between truncation and sampling.
    #[arg(long)]
    pub epsilon: Option<f64>,

    /// Failure probability used with --epsilon.
    #[arg(long, default_value_t = 0.05)]
    pub delta: f64,

    /// Random seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

pub const DEFAULT_WALK_LENGTH: usize = 10;
pub const DEFAULT_REPLICATES: usize = 100;

#[derive(Debug, Clone, Serialize)]
pub struct Resolved {
    pub decay: f64,
    pub alpha: Vec<f64>,
    pub walk_length: usize,
    pub replicates: usize,
    pub seed: u64,
}

impl ModelArgs {
    /// Parameter-domain checks that need no data.
    pub fn check(&self) -> Result<(), UsageError> {
        if !(self.decay > 0.0 && self.decay < 1.0) {
            return Err(UsageError(format!("--c {} must lie in (0, 1)", self.decay)));
        }
        if self.alpha.is_empty() || self.alpha.iter().any(|a| !a.is_finite() || *a < 0.0) {
            return Err(UsageError(
                "--alpha values must be finite and non-negative".into(),
            ));
        }
        let sum: f64 = self.alpha.iter().sum();
        if sum > 1.0 + 1e-12 {
            return Err(UsageError(format!("--alpha values sum to {sum} > 1")));
        }
        if let Some(e) = self.epsilon {
            ErrorBudget::new(e, self.delta).map_err(|err| UsageError(err.to_string()))?;
        }
        if self.replicates == Some(0) {
            return Err(UsageError("--replicates must be at least 1".into()));
        }
        Ok(())
    }

    pub fn resolve(&self) -> Result<Resolved, UsageError> {
        self.check()?;
        let (mut l, mut r) = (DEFAULT_WALK_LENGTH, DEFAULT_REPLICATES);
        if let Some(eps) = self.epsilon {
            let total = ErrorBudget::new(eps, self.delta).map_err(|e| UsageError(e.to_string()))?;
            let (le, re) =
                split_budget(self.decay, total).map_err(|e| UsageError(e.to_string()))?;
            l = self.walk_length.unwrap_or(le);
            r = if self.walk_length.is_some() {
                let half = ErrorBudget::new(eps / 2.0, self.delta)
                    .map_err(|e| UsageError(e.to_string()))?;
                required_replicates(self.decay, l, half).map_err(|e| UsageError(e.to_string()))?
            } else {
                re
            };
        }
        if let Some(x) = self.walk_length {
            l = x;
        }
        if let Some(x) = self.replicates {
            r = x;
        }
        Ok(Resolved {
            decay: self.decay,
            alpha: self.alpha.clone(),
            walk_length: l,
            replicates: r,
            seed: self.seed,
        })
    }
}

impl Resolved {
    pub fn params(&self, activity_types: u32) -> Result<ModelParams, UsageError> {
        let l = activity_types as usize;
        let weights = if self.alpha.len() == l {
            self.alpha.clone()
        } else if self.alpha.len() == 1 {
            vec![self.alpha[0] / l as f64; l]
        } else {
            return Err(UsageError(format!(
                "--alpha lists {} weights but the graph has {l} activity type(s)",
                self.alpha.len()
            )));
        };
        Ok(ModelParams::new(self.decay, 0.0)
            .with_weights(ActivityWeights::Uniform(weights))
            .with_walk_length(self.walk_length)
            .with_replicates(self.replicates)
            .with_seed(self.seed))
    }
}

#[derive(Debug, Args, Serialize)]
pub struct IngestArgs {
    /// Social links, `src<TAB>dst` per line.
    #[arg(long)]
    pub social: PathBuf,

    /// Ratings, `user<TAB>item<TAB>rating[<TAB>type]` per line.
    #[arg(long)]
    pub ratings: Option<PathBuf>,

    /// Ratings below this value are dropped.
    #[arg(long, default_value_t = sanim::ingest::DEFAULT_THRESHOLD)]
    pub threshold: f64,

    #[arg(long)]
    pub directed: bool,

    /// Skip and count malformed lines.
    #[arg(long)]
    pub lenient: bool,

    /// Existing `external_id<TAB>node_id` map to extend.
    #[arg(long)]
    pub id_map: Option<PathBuf>,

    /// Keep only the first N nodes reached by BFS.
    #[arg(long, value_name = "N")]
    pub extract_bfs: Option<usize>,

    /// Seed for drawing the BFS start node.
    #[arg(long, default_value_t = 0)]
    pub bfs_start_seed: u64,

    /// Explicit BFS start node (dense id), overriding --bfs-start-seed.
    #[arg(long)]
    pub bfs_start: Option<u32>,

    /// Graph file to write; the id map, report and manifest go next to it.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Baseline,
    Optimized,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GainRuleArg {
    Direct,
    Factored,
}

#[derive(Debug, Args, Serialize)]
pub struct SelectArgs {
    #[arg(long)]
    pub graph: PathBuf,

    /// Number of seeds.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub k: u64,

    #[command(flatten)]
    pub model: ModelArgs,

    #[arg(long, value_enum, default_value_t = Algorithm::Optimized)]
    pub algorithm: Algorithm,

    /// Candidate scoring in the optimized algorithm.
    #[arg(long, value_enum, default_value_t = GainRuleArg::Direct)]
    pub gain_rule: GainRuleArg,

    /// Walk store memory cap in bytes.
    #[arg(long, default_value_t = sanim::greedy::DEFAULT_MEMORY_BUDGET)]
    pub memory_budget: u64,

    /// Scratch file for trajectories when the store exceeds the budget.
    #[arg(long)]
    pub spill: Option<PathBuf>,

    /// Seed CSV to write (`rank,node,marginal_gain,cumulative_gain`).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Exact,
    Truncated,
    Mc,
}

#[derive(Debug, Args, Serialize)]
pub struct EstimateArgs {
    #[arg(long)]
    pub graph: PathBuf,

    /// Seed list: a `select` CSV or one node id per line.
    #[arg(long)]
    pub seeds: PathBuf,

    #[command(flatten)]
    pub model: ModelArgs,

    #[arg(long, value_enum, default_value_t = Method::Mc)]
    pub method: Method,

    /// Per-node CSV to write (`node,h`).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    #[arg(long)]
    pub graph: PathBuf,

    #[arg(long)]
    pub seeds: PathBuf,

    /// Second seed set; reports [σ(seeds) − σ(compare)] / σ(compare).
    #[arg(long)]
    pub compare: Option<PathBuf>,

    #[command(flatten)]
    pub model: ModelArgs,

    #[arg(long, default_value_t = 10_000)]
    pub simulations: usize,

    /// CSV to write (`set,mean_spread,std_error,simulations`).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct BenchArgs {
    /// Graph sizes.
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    pub sizes: Vec<usize>,

    #[arg(long, value_delimiter = ',', num_args = 0.., default_value = "0")]
    pub alphas: Vec<f64>,

    #[arg(long, value_delimiter = ',', num_args = 0.., default_value = "10")]
    pub ks: Vec<usize>,

    #[arg(long, value_enum, value_delimiter = ',', default_value = "optimized")]
    pub algorithms: Vec<Algorithm>,

    /// Mean number of links per node in the synthetic graphs.
    #[arg(long, default_value_t = 10.0)]
    pub avg_degree: f64,

    /// Activities per node.
    #[arg(long, default_value_t = 1.0)]
    pub activities_per_node: f64,

    /// Mean members per activity.
    #[arg(long, default_value_t = 3.0)]
    pub members_per_activity: f64,

    /// Cascade runs per cell for the spread column (0 leaves it empty).
    #[arg(long, default_value_t = 0)]
    pub simulations: usize,

    #[arg(long, default_value_t = 0.5)]
    pub c: f64,

    #[arg(short = 'L', long, default_value_t = DEFAULT_WALK_LENGTH)]
    pub walk_length: usize,

    #[arg(short = 'R', long, default_value_t = DEFAULT_REPLICATES)]
    pub replicates: usize,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// CSV to write (`n,alpha,k,algorithm,wall_time_seconds,estimated_centrality,spread`).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct ExportArgs {
    #[arg(long)]
    pub graph: PathBuf,

    #[command(flatten)]
    pub model: ModelArgs,

    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct ReplayArgs {
    pub manifest: PathBuf,
}
