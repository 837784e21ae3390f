//! `survtree` command-line interface.
//!
//! Exit codes: 0 success, 2 usage or configuration error, 3 data or model
//! error, 4 internal error.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use commands::{CliError, Code};

#[derive(Parser)]
#[command(name = "survtree", version, about = "Optimal and greedy survival trees")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a tree and write it as JSON.
    Train(TrainArgs),
    /// Leaf, risk coefficient and survival estimates per row.
    Predict(PredictArgs),
    /// Metric report of a model on a dataset.
    Evaluate(EvaluateArgs),
    /// Simulation runs against known ground-truth trees.
    Simulate(SimulateArgs),
    /// Fit both trainers on a seeded train/test split and compare them.
    Benchmark(BenchmarkArgs),
    /// Graphviz rendering of a model.
    ExportDot(ExportDotArgs),
}

#[derive(Args, Clone)]
pub struct DataArgs {
    /// CSV file with `time` and `event` columns.
    #[arg(long)]
    pub data: PathBuf,
    /// JSON sidecar declaring categorical columns. Commands that read a
    /// model fall back to the column kinds stored in it.
    #[arg(long)]
    pub schema: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TrainerKind {
    Optimal,
    Greedy,
}

#[derive(Args, Clone)]
pub struct ParamArgs {
    #[arg(long)]
    pub seed: Option<u64>,
    /// Complexity penalty: a number, or `auto` for cross-validation.
    #[arg(long)]
    pub alpha: Option<String>,
    #[arg(long)]
    pub max_depth: Option<usize>,
    #[arg(long)]
    pub min_bucket: Option<usize>,
    #[arg(long)]
    pub restarts: Option<usize>,
    #[arg(long)]
    pub folds: Option<usize>,
    /// JSON training parameters; its fields take precedence over flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub params: ParamArgs,
    #[arg(long, value_enum, default_value = "optimal")]
    pub trainer: TrainerKind,
    /// Model output path.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    /// Times at which to report leaf survival, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub at: Vec<f64>,
    /// CSV output path; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    /// Horizon for the point Brier score and Uno's C; median time by default.
    #[arg(long)]
    pub tau: Option<f64>,
    /// CSV output path for the report.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct SimulateArgs {
    /// Simulation config JSON; defaults are used for absent fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// First seed; runs use consecutive seeds.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 1)]
    pub repetitions: u64,
    /// Output directory for records.jsonl and summary.csv.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct BenchmarkArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub params: ParamArgs,
    /// Share of rows held out for evaluation.
    #[arg(long, default_value_t = 0.3)]
    pub test_fraction: f64,
    #[arg(long)]
    pub tau: Option<f64>,
    /// CSV output path; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct ExportDotArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// DOT output path; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Train(a) => commands::train(a),
        Command::Predict(a) => commands::predict(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Benchmark(a) => commands::benchmark(a),
        Command::ExportDot(a) => commands::export_dot(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { Code::Usage as u8 } else { 0 });
        }
    };
    match std::panic::catch_unwind(|| run(cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code as u8)
        }
        Err(_) => ExitCode::from(Code::Internal as u8),
    }
}
