//! `dygmf`: generate benchmark graphs, cluster them, score predictions,
//! inject noise and run sweeps.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage error. `DYGMF_LOG`
//! sets the log level (default `warn`).

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Run(#[from] dygmf::Error),
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Run(dygmf::Error::InvalidConfig(_)) => 2,
            CliError::Run(_) | CliError::Failed(_) => 1,
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "dygmf", version, about = "Dynamic graph clustering by temporal separated matrix factorization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic dynamic graph with ground truth.
    Generate(GenerateArgs),
    /// Cluster every snapshot of a dataset directory.
    Cluster(ClusterArgs),
    /// Score predicted label files against a dataset's ground truth.
    Evaluate(EvaluateArgs),
    /// Copy a dataset with random edges added to every snapshot.
    Noise(NoiseArgs),
    /// Run a sweep and write CSV and JSON summaries.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Generator {
    SynFix,
    SynVar,
    Green,
}

#[derive(Args, Debug)]
pub struct GenerateArgs {
    #[arg(value_enum)]
    pub generator: Generator,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// SYN-VAR size multiplier (256 nodes per unit).
    #[arg(long, default_value_t = 1)]
    pub scale: usize,
    /// Green event type.
    #[arg(long, default_value = "birth-death")]
    pub event: String,
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long, default_value_t = 10)]
    pub tau: usize,
    #[arg(long, default_value_t = 10)]
    pub communities: usize,
    #[arg(long, default_value_t = 0.2)]
    pub mixing: f64,
    #[arg(long, default_value_t = 20.0)]
    pub avg_degree: f64,
    #[arg(long, default_value_t = 50)]
    pub max_degree: usize,
}

/// Solver settings shared by `cluster` and `bench`. Precedence: defaults,
/// then the config file, then `--set`, then the named flags.
#[derive(Args, Debug, Default)]
pub struct SolverArgs {
    /// Flat `key = value` configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override one configuration key, e.g. `--set beta=5`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of subsets.
    #[arg(long)]
    pub s: Option<usize>,
    /// Maximum embedding width.
    #[arg(long)]
    pub r: Option<usize>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub landmark_fraction: Option<f64>,
    #[arg(long)]
    pub k_max: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Solve subsets on all cores.
    #[arg(long)]
    pub parallel: bool,
    #[arg(long)]
    pub no_tsmf: bool,
    #[arg(long)]
    pub no_bcr: bool,
    #[arg(long)]
    pub no_seu: bool,
}

#[derive(Args, Debug)]
pub struct ClusterArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    /// Directory with `tNNNN.pred` files.
    #[arg(long)]
    pub pred: PathBuf,
    /// Dataset directory with edge and label files.
    #[arg(long)]
    pub truth: PathBuf,
    /// Also write the JSON report here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct NoiseArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Added edges as a share of each snapshot's edge count.
    #[arg(long)]
    pub fraction: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Axis {
    Noise,
    Nodes,
    Snapshots,
    Ablation,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    /// `syn-fix`, `syn-var`, `green` or a dataset directory.
    #[arg(long)]
    pub dataset: String,
    #[arg(long, value_enum)]
    pub sweep: Axis,
    /// Comma-separated sweep values, e.g. `0,0.1,0.2` or `full,no-bcr`.
    #[arg(long)]
    pub values: String,
    #[arg(long, default_value_t = 3)]
    pub reps: usize,
    /// First repetition seed.
    #[arg(long, default_value_t = 1)]
    pub base_seed: u64,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[arg(long, default_value_t = 1)]
    pub scale: usize,
    #[arg(long, default_value = "birth-death")]
    pub event: String,
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long, default_value_t = 10)]
    pub tau: usize,
    /// Directory for `bench.csv` and `bench.json`.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub solver: SolverArgs,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("DYGMF_LOG", "warn")).init();
    let outcome = match cli.command {
        Command::Generate(a) => commands::generate(&a),
        Command::Cluster(a) => commands::cluster(&a),
        Command::Evaluate(a) => commands::evaluate(&a),
        Command::Noise(a) => commands::noise(&a),
        Command::Bench(a) => commands::bench(&a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
