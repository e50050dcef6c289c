use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use fair_auction::gsm::BaseTransform;
use fair_auction::Mechanism;

#[derive(Debug, Parser)]
#[command(name = "fairauction", version, about = "Group-fair single-item auctions: run, train, sweep and audit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one mechanism on a bids file and write the outcome JSON.
    RunAuction(RunAuctionArgs),
    /// Run an experiment grid and write the results CSV.
    Experiment(ExperimentArgs),
    /// Train group score functions on a statistics-side sample.
    TrainScores(TrainScoresArgs),
    /// Estimate incentive-compatibility violations on a deviation grid.
    VerifyIc(VerifyIcArgs),
    /// Estimate the expected group-welfare gap against epsilon.
    VerifyFairness(VerifyFairnessArgs),
}

/// Where the bid profile comes from: a bids file, or per-group
/// distributions sampled with `--profile-seed`.
#[derive(Debug, Args)]
pub struct ProfileArgs {
    /// JSON `{"support": [lo, hi], "groups": [[...], ...]}`.
    #[arg(long, conflicts_with = "profile_spec")]
    pub bids_file: Option<PathBuf>,
    /// Comma-separated distributions, one per group: `uniform:LO:HI` or `normal:MEAN:SD`.
    #[arg(long, requires = "sizes")]
    pub profile_spec: Option<String>,
    /// Comma-separated group sizes for `--profile-spec`.
    #[arg(long)]
    pub sizes: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub profile_seed: u64,
}

/// Learner settings for inline training.
#[derive(Debug, Args)]
pub struct LearnerArgs {
    #[arg(long, default_value = "linear")]
    pub base: BaseTransform,
    #[arg(long, default_value_t = 2000)]
    pub episodes: usize,
    #[arg(long = "steps", default_value_t = 50)]
    pub sgd_steps: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub learning_rate: f64,
    /// Dual step; the learning rate when omitted.
    #[arg(long)]
    pub dual_learning_rate: Option<f64>,
    #[arg(long, default_value_t = 32)]
    pub hidden: usize,
    #[arg(long, default_value_t = 32)]
    pub train_panels: usize,
}

#[derive(Debug, Args)]
pub struct RunAuctionArgs {
    #[arg(long)]
    pub mechanism: Mechanism,
    #[arg(long)]
    pub bids_file: PathBuf,
    /// Required for gpm, and for gsm without --scores-file.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Trained score functions for gsm; trains inline when omitted.
    #[arg(long)]
    pub scores_file: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Independent runs; above 1 a frequency summary is written instead.
    #[arg(long, default_value_t = 1)]
    pub repeat: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub learner: LearnerArgs,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// Grid JSON.
    #[arg(long)]
    pub grid: PathBuf,
    /// Results CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Per-cell records with per-trial metrics, as JSON.
    #[arg(long)]
    pub records_json: Option<PathBuf>,
    /// Worker threads; FAIRAUCTION_THREADS takes precedence.
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct TrainScoresArgs {
    #[command(flatten)]
    pub profile: ProfileArgs,
    #[arg(long)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Score file to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Training curve CSV, appended to.
    #[arg(long)]
    pub curve: Option<PathBuf>,
    #[command(flatten)]
    pub learner: LearnerArgs,
}

#[derive(Debug, Args)]
pub struct VerifyIcArgs {
    #[arg(long)]
    pub mechanism: Mechanism,
    #[command(flatten)]
    pub profile: ProfileArgs,
    #[arg(long, default_value_t = 0.0)]
    pub epsilon: f64,
    #[arg(long)]
    pub scores_file: Option<PathBuf>,
    /// `LO:HI:COUNT` or a comma-separated list; 21 points over the support by default.
    #[arg(long)]
    pub deviation_grid: Option<String>,
    /// Comma-separated buyer indices; by default the top and median bidder of every group.
    #[arg(long)]
    pub buyers: Option<String>,
    #[arg(long, default_value_t = 2000)]
    pub trials: usize,
    /// Two-sided significance level; 0.0027 is the three-sigma rule.
    #[arg(long, default_value_t = 0.0027)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Report JSON; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyFairnessArgs {
    #[arg(long)]
    pub mechanism: Mechanism,
    #[command(flatten)]
    pub profile: ProfileArgs,
    #[arg(long)]
    pub epsilon: f64,
    /// Fixed score functions for gsm; trains per repetition when omitted.
    #[arg(long)]
    pub scores_file: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    pub reps: usize,
    #[arg(long, default_value_t = 0.0027)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub learner: LearnerArgs,
}
