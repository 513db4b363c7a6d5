use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use ebhmm_core::eval::ModelKind;

#[derive(Debug, Parser)]
#[command(
    name = "ebhmm",
    version,
    about = "Event-based hidden Markov model of disease progression"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Seed for every random choice.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Worker threads; defaults to the available cores.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a model to a cohort and write it as JSON.
    Fit(FitArgs),
    /// Stage every visit of a cohort.
    Stage(StageArgs),
    /// Predict each individual's stage some months after the last visit.
    Predict(PredictArgs),
    /// Expected event times of a fitted EB-HMM.
    Timeline(TimelineArgs),
    /// Sample a synthetic cohort and its ground truth.
    Simulate(SimulateArgs),
    /// Cross-validated conversion AU-ROC of both models, full and subset data.
    Evaluate(EvaluateArgs),
    /// AU-ROC of the EB-HMM as observed cells are hidden.
    Ablate(AblateArgs),
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub cohort: Option<PathBuf>,
    #[arg(long, value_parser = parse_model_kind)]
    pub model_kind: Option<ModelKind>,
    /// Ground-truth file; prints the Kendall tau of the fitted sequence.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Model JSON; standard output if absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StageArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub cohort: Option<PathBuf>,
    /// Horizon of the prediction column, in months.
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Staging CSV; standard output if absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub cohort: Option<PathBuf>,
    /// Months after the last visit.
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Prediction CSV; standard output if absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TimelineArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// `.json` gives JSON, anything else CSV; standard output (CSV) if absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Ground truth to sample from; otherwise built from the `[simulate]` section.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Number of individuals.
    #[arg(long)]
    pub n: Option<usize>,
    /// Cohort file (`.json` or CSV). The truth goes to `<stem>.truth.json`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub cohort: Option<PathBuf>,
    #[arg(long)]
    pub folds: Option<usize>,
    /// JSON report; the table always goes to standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[arg(long)]
    pub cohort: Option<PathBuf>,
    #[arg(long)]
    pub folds: Option<usize>,
    /// Comma-separated fractions of observed cells to hide.
    #[arg(long, value_delimiter = ',')]
    pub fractions: Option<Vec<f64>>,
    /// JSON report; the table always goes to standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_model_kind(s: &str) -> Result<ModelKind, String> {
    s.parse()
}
