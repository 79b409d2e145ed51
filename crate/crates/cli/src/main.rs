//! `gfen` command-line pipeline.
//!
//! Exit codes: 0 success, 2 input or configuration error, 3 numerical
//! failure (including solver non-convergence).

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::commands::NumericalFailure;

#[derive(Debug, Parser)]
#[command(
    name = "gfen",
    version,
    about = "Graph-fused elastic net density smoothing"
)]
struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for parallel stages (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Repeat for more log output; -q silences info messages.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[arg(short, long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Turn a trip log into per-trip productivity observations.
    Ingest(IngestArgs),
    /// Build the spatiotemporal graph from locations and adjacency.
    Graph(GraphArgs),
    /// Build the quantile split tree from pooled observations.
    Tree(TreeArgs),
    /// Select penalties by cross-validation and Bayesian optimization.
    Tune(TuneArgs),
    /// Fit the MAP fields and export the density.
    Fit(FitArgs),
    /// Draw posterior samples around a fitted model.
    Sample(SampleArgs),
    /// Evaluate per-vertex density summaries.
    Query(QueryArgs),
    /// Generate a simulated grid task as pipeline inputs.
    Simulate(SimulateArgs),
    /// Run the GFL / GFEN / GMRF comparison sweep.
    Bench(BenchArgs),
    /// Apply the 1D proximal solvers to a CSV vector.
    #[command(hide = true)]
    Prox(ProxArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub trips: Option<PathBuf>,
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub timezone: Option<String>,
    /// Keep trips ending on or after this local date or time.
    #[arg(long)]
    pub from: Option<String>,
    /// Keep trips ending before this local date or time.
    #[arg(long)]
    pub to: Option<String>,
}

#[derive(Debug, Args)]
pub struct GraphArgs {
    #[arg(long)]
    pub locations: Option<PathBuf>,
    #[arg(long)]
    pub adjacency: Option<PathBuf>,
    /// Time slots per cycle.
    #[arg(long)]
    pub times: Option<usize>,
    #[arg(long, value_parser = ["cyclic", "linear"])]
    pub topology: Option<String>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TreeArgs {
    #[arg(long)]
    pub observations: Option<PathBuf>,
    #[arg(long)]
    pub depth: Option<usize>,
    #[arg(long)]
    pub left_tail_splits: Option<usize>,
    #[arg(long)]
    pub tail_splits: Option<usize>,
    #[arg(long)]
    pub tail_cap: Option<f64>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args, Clone)]
pub struct DataArgs {
    #[arg(long)]
    pub graph: Option<PathBuf>,
    #[arg(long)]
    pub tree: Option<PathBuf>,
    #[arg(long)]
    pub observations: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TuneArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub generations: Option<usize>,
    #[arg(long)]
    pub per_generation: Option<usize>,
    #[arg(long)]
    pub folds: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// One penalty set for the whole tree instead of one per split.
    #[arg(long)]
    pub shared: bool,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Penalty file written by `tune`.
    #[arg(long, conflicts_with = "lambda")]
    pub penalties: Option<PathBuf>,
    /// Shared penalties: spatial_l1,spatial_l2,temporal_l1,temporal_l2.
    #[arg(long, value_delimiter = ',')]
    pub lambda: Option<Vec<f64>>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Replay a previous fit from its manifest.
    #[arg(long, conflicts_with_all = ["graph", "tree", "observations", "penalties", "lambda", "tol", "max_iter"])]
    pub manifest: Option<PathBuf>,
    /// Write outputs even when some splits did not converge.
    #[arg(long)]
    pub allow_nonconverged: bool,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    /// Model directory written by `fit`.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub burn_in: Option<usize>,
    #[arg(long)]
    pub thin: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Density query for credible bands, e.g. `tail:21.64`, `quantile:0.1`, `iqr`, `mean`.
    #[arg(long)]
    pub query: Vec<String>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct QueryArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Queries such as `tail:21.64`, `quantile:0.1`, `iqr`, `mean`.
    #[arg(long)]
    pub query: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    pub threshold: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    pub alpha: Vec<f64>,
    /// Named threshold set (`living-wage`).
    #[arg(long)]
    pub preset: Option<String>,
    /// Restrict output to one time slot.
    #[arg(long)]
    pub hour: Option<usize>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 15)]
    pub grid: usize,
    /// Spatial effect: constant, linear or mixed.
    #[arg(long, default_value = "constant")]
    pub spatial: String,
    #[arg(long, default_value = "constant")]
    pub temporal: String,
    #[arg(long, default_value_t = 0.2)]
    pub sigma: f64,
    #[arg(long, default_value_t = 0.1)]
    pub missing: f64,
    #[arg(long, default_value_t = 10)]
    pub samples: usize,
    #[arg(long)]
    pub outliers: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub grid: Option<usize>,
    #[arg(long)]
    pub replicates: Option<usize>,
    #[arg(long)]
    pub n_lambda: Option<usize>,
    #[arg(long)]
    pub folds: Option<usize>,
    #[arg(long)]
    pub depth: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub missing: Option<Vec<f64>>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// 30 x 30 grid and 48 replicates.
    #[arg(long)]
    pub full_scale: bool,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ProxArgs {
    #[arg(long, value_parser = ["tv1", "tv2"])]
    pub kind: String,
    #[arg(long)]
    pub lambda: f64,
    /// CSV with a `y` column.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.downcast_ref::<NumericalFailure>().is_some() {
            return 3;
        }
        if let Some(gfen::GfenError::Numerical(_)) = cause.downcast_ref::<gfen::GfenError>() {
            return 3;
        }
    }
    2
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match (cli.quiet, cli.verbose) {
        (true, _) => "warn",
        (false, 0) => "info",
        (false, 1) => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();

    let result = (|| -> anyhow::Result<()> {
        if let Some(n) = cli.threads {
            anyhow::ensure!(n > 0, "--threads must be positive");
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()?;
        }
        let cfg = config::RunConfig::load(cli.config.as_deref())?;
        match &cli.command {
            Command::Ingest(a) => commands::ingest(a, &cfg),
            Command::Graph(a) => commands::graph(a, &cfg),
            Command::Tree(a) => commands::tree(a, &cfg),
            Command::Tune(a) => commands::tune(a, &cfg),
            Command::Fit(a) => commands::fit(a, &cfg),
            Command::Sample(a) => commands::sample(a, &cfg),
            Command::Query(a) => commands::query(a, &cfg),
            Command::Simulate(a) => commands::simulate(a),
            Command::Bench(a) => commands::bench(a, &cfg),
            Command::Prox(a) => commands::prox(a),
        }
    })();

    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
