//! Command-line driver: generate → prepare → gridsearch → train → evaluate →
//! importance → predict, all sharing one pipeline-state directory.

pub mod commands;
pub mod error;
pub mod state;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "ttlc", version, about = "Time-to-lane-change prediction toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a highD-schema recording with known lane changes.
    Generate(GenerateArgs),
    /// Label, window and fold one or more recordings into a sample cache.
    Prepare(PrepareArgs),
    /// Cross-validated grid search on every fold except the test fold.
    Gridsearch(GridsearchArgs),
    /// Train the final model on every fold except the test fold.
    Train(TrainArgs),
    /// Evaluate the trained model on the untouched test fold.
    Evaluate(EvaluateArgs),
    /// Relative input-feature importance of the trained model.
    Importance(ImportanceArgs),
    /// Predict (TTLCL, TTLCR) and the maneuver for one window.
    Predict(PredictArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Scenario configuration (JSON); missing fields take their defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: u64,
    /// Output directory for NAME.csv, NAME.meta.json and NAME.truth.json.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "recording")]
    pub name: String,
}

#[derive(Debug, Args)]
pub struct PrepareArgs {
    /// Pipeline-state directory.
    #[arg(long)]
    pub state: PathBuf,
    #[arg(long)]
    pub seed: u64,
    /// Feature history in seconds; sets the cached window length.
    #[arg(long, default_value_t = 3.0)]
    pub t_h: f64,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    /// Fold reserved for the final evaluation.
    #[arg(long, default_value_t = 0)]
    pub test_fold: usize,
    /// Tracks CSV files; metadata is read from NAME.meta.json next to each.
    #[arg(required = true)]
    pub recordings: Vec<PathBuf>,
}

/// Training overrides shared by gridsearch and train.
#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    /// Training configuration (JSON); flags below override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub max_epochs: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    /// Rescale gradients whose global norm exceeds this value.
    #[arg(long)]
    pub clip_norm: Option<f64>,
}

#[derive(Debug, Args)]
pub struct GridsearchArgs {
    #[arg(long)]
    pub state: PathBuf,
    #[arg(long)]
    pub seed: u64,
    /// Grid definition (JSON); defaults to the 54-point grid.
    #[arg(long)]
    pub grid: Option<PathBuf>,
    /// Cross-validation folds over the non-test vehicles.
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[command(flatten)]
    pub fit: FitArgs,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub state: PathBuf,
    #[arg(long)]
    pub seed: u64,
    /// Hyperparameters not given here are taken from the grid-search winner.
    #[arg(long)]
    pub n_lstm: Option<usize>,
    #[arg(long)]
    pub n_dense: Option<usize>,
    #[arg(long)]
    pub t_h: Option<f64>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[command(flatten)]
    pub fit: FitArgs,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub state: PathBuf,
    #[arg(long)]
    pub seed: u64,
    /// Balance the three maneuver classes (default).
    #[arg(long, conflicts_with = "undersampled")]
    pub balanced: bool,
    /// Keep a third of lane following, as during training.
    #[arg(long)]
    pub undersampled: bool,
    /// Classification horizon in seconds.
    #[arg(long, default_value_t = 5.0)]
    pub horizon: f64,
    /// Width of the error-over-TTLC bins in seconds.
    #[arg(long, default_value_t = 0.25)]
    pub bin_width: f64,
}

#[derive(Debug, Args)]
pub struct ImportanceArgs {
    #[arg(long)]
    pub state: PathBuf,
    /// absolute or signed weight sums.
    #[arg(long, default_value = "absolute")]
    pub importance_mode: ttlc_core::nn::ImportanceMode,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Use the model recorded in this state directory.
    #[arg(long, required_unless_present = "model", conflicts_with = "model")]
    pub state: Option<PathBuf>,
    /// Model file to use instead of a state directory.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Raw feature window as CSV with one column per feature.
    #[arg(long, required_unless_present = "recording", conflicts_with = "recording")]
    pub window: Option<PathBuf>,
    /// Take the window from this tracks CSV ending at --frame.
    #[arg(long, requires_all = ["vehicle", "frame"])]
    pub recording: Option<PathBuf>,
    #[arg(long)]
    pub vehicle: Option<u32>,
    #[arg(long)]
    pub frame: Option<i64>,
    #[arg(long, default_value_t = 5.0)]
    pub horizon: f64,
}

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Generate(a) => commands::generate(&a),
        Command::Prepare(a) => commands::prepare(&a),
        Command::Gridsearch(a) => commands::gridsearch(&a),
        Command::Train(a) => commands::train(&a),
        Command::Evaluate(a) => commands::evaluate(&a),
        Command::Importance(a) => commands::importance(&a),
        Command::Predict(a) => commands::predict(&a),
    }
}
