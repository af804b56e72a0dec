mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hybridrule::{ErrorKind, Mode, Policy};

#[derive(Parser)]
#[command(name = "hybridrule", version, about = "Hybrid rule-prefix / black-box models")]
struct Cli {
    /// Log progress (repeat for more detail).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Binarize a raw table, split it and mine the antecedent pool.
    Mine(MineArgs),
    /// Train hybrid models, keeping the best cell per coverage level.
    Train(TrainArgs),
    /// Predict labels with a saved model.
    Predict(ApplyArgs),
    /// Report accuracy and transparency of a saved model.
    Eval(ApplyArgs),
    /// Run a full grid and flag the validation Pareto front.
    Pareto(TrainArgs),
    /// Sweep the normalized AUC of the generalization bound over transparency.
    Theory(TheoryArgs),
    /// Export specialization weights for training an external black box.
    Weights(WeightsArgs),
}

#[derive(Args)]
pub struct MineArgs {
    /// Raw CSV with a header row.
    #[arg(long)]
    pub data: PathBuf,
    /// JSON schema naming the label and each column's kind.
    #[arg(long)]
    pub schema: PathBuf,
    #[arg(long, default_value_t = hybridrule::data::DEFAULT_QUANTILES)]
    pub quantiles: usize,
    #[arg(long, default_value_t = 0.01)]
    pub min_support: f64,
    #[arg(long, default_value_t = 300)]
    pub top_k: usize,
    #[arg(long, default_value_t = 2)]
    pub max_card: usize,
    #[arg(long)]
    pub no_negations: bool,
    /// Train, validation and test fractions.
    #[arg(long, value_delimiter = ',', default_values_t = [0.6, 0.2, 0.2])]
    pub split: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct TrainArgs {
    /// Directory written by `mine`.
    #[arg(long)]
    pub data_dir: PathBuf,
    /// JSON run configuration; explicit flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub mode: Option<Mode>,
    #[arg(long, value_delimiter = ',')]
    pub min_coverage: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    pub lambda: Vec<f64>,
    /// `auto` or a value below 1/|S|.
    #[arg(long)]
    pub beta: Option<String>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub policy: Vec<Policy>,
    #[arg(long, value_delimiter = ',')]
    pub min_support: Vec<f64>,
    /// Prune by the antecedent's raw support instead of newly captured rows.
    #[arg(long)]
    pub raw_support: bool,
    #[arg(long)]
    pub max_length: Option<usize>,
    /// Seconds per grid cell.
    #[arg(long)]
    pub time_limit: Option<f64>,
    /// Bytes per grid cell (suffixes K, M, G accepted).
    #[arg(long)]
    pub mem_limit: Option<String>,
    /// Black-box predictions for the training split.
    #[arg(long)]
    pub bb_preds: Option<PathBuf>,
    #[arg(long)]
    pub bb_valid_preds: Option<PathBuf>,
    #[arg(long)]
    pub bb_test_preds: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct ApplyArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Binarized CSV (as written by `mine`).
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub bb_preds: Option<PathBuf>,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct TheoryArgs {
    /// Natural log of |Hs|; defaults to depth-3 trees over 200 features.
    #[arg(long)]
    pub log_hs: Option<f64>,
    #[arg(long, default_value_t = 3)]
    pub tree_depth: u32,
    #[arg(long, default_value_t = 200)]
    pub n_features: u64,
    /// |Hc| / |Hs|
    #[arg(long, default_value_t = 100.0)]
    pub ratio: f64,
    /// Training set size M.
    #[arg(long, default_value_t = 5000)]
    pub samples: u64,
    #[arg(long, default_value_t = 4096)]
    pub nodes: usize,
    #[arg(long)]
    pub simpson: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct WeightsArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Binarized training CSV.
    #[arg(long)]
    pub data: PathBuf,
    /// Overrides the model's specialization coefficient.
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let result = match cli.command {
        Command::Mine(a) => commands::mine(&a),
        Command::Train(a) => commands::train(&a),
        Command::Pareto(a) => commands::pareto(&a),
        Command::Predict(a) => commands::predict(&a),
        Command::Eval(a) => commands::eval(&a),
        Command::Theory(a) => commands::theory(&a),
        Command::Weights(a) => commands::weights(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.kind() {
                ErrorKind::Config => 2,
                ErrorKind::Data => 3,
                ErrorKind::Infeasible => 4,
            })
        }
    }
}
