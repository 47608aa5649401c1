use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sad_core::data::LoadOptions;
use sad_core::{InputFormat, SimKind, TrainConfig};
use serde::{Deserialize, Serialize};

#[derive(Parser, Debug)]
#[command(name = "sad", version, about = "Sliced anti-symmetric decomposition for implicit feedback")]
pub struct Cli {
    /// Base directory for run directories (SAD_OUTPUT_DIR takes precedence).
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Clone)]
pub enum Command {
    /// Simulation study: recover a known model under growing missingness.
    Simulate(SimulateArgs),
    /// Fit SAD or BPR to an interaction file.
    Train(TrainArgs),
    /// Probit Gibbs sampler on simulated or small real data.
    Gibbs(GibbsArgs),
    /// Leave-one-out evaluation over several random splits.
    Evaluate(EvaluateArgs),
    /// Re-run a previous run from its manifest into a new directory.
    Replay(ReplayArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SimArg {
    Sim1,
    Sim2,
}

impl From<SimArg> for SimKind {
    fn from(s: SimArg) -> Self {
        match s {
            SimArg::Sim1 => SimKind::Sim1,
            SimArg::Sim2 => SimKind::Sim2,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelArg {
    Sad,
    Bpr,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FormatArg {
    /// user,item,rating[,timestamp]
    Csv,
    /// user::item::rating::timestamp
    Movielens,
}

impl From<FormatArg> for InputFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => InputFormat::CsvComma,
            FormatArg::Movielens => InputFormat::DoubleColon,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrecisionArg {
    F32,
    F64,
}

/// SGD hyperparameters shared by the training commands.
#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperArgs {
    /// Latent dimension.
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    #[arg(long, default_value_t = 0.05)]
    pub lr: f64,
    /// Weight of the l1 pull of T toward one.
    #[arg(long, default_value_t = 0.01)]
    pub l1: f64,
    #[arg(long, default_value_t = 0.005)]
    pub l2: f64,
    #[arg(long, default_value_t = 20)]
    pub epochs: usize,
    /// Relative log-likelihood change that stops training early; 0 never stops.
    #[arg(long, default_value_t = 0.0)]
    pub tol: f64,
    /// Visit users and items in random order.
    #[arg(long)]
    pub shuffle: bool,
}

impl HyperArgs {
    pub fn train_config(&self, seed: u64, model: ModelArg) -> TrainConfig {
        TrainConfig {
            learning_rate: self.lr,
            l1_weight: self.l1,
            l2_weight: self.l2,
            epochs: self.epochs,
            n_factors: self.k,
            seed,
            convergence_rel_tol: self.tol,
            freeze_right_factors: model == ModelArg::Bpr,
            shuffle: self.shuffle,
        }
    }
}

/// Where interactions come from.
#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DataArgs {
    #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
    pub format: FormatArg,
    /// Drop items with fewer interactions than this.
    #[arg(long, default_value_t = 0)]
    pub min_item_count: usize,
    /// Keep only the most active users.
    #[arg(long)]
    pub top_users: Option<usize>,
}

impl DataArgs {
    pub fn load_options(&self) -> LoadOptions {
        LoadOptions {
            min_item_count: self.min_item_count,
            top_users: self.top_users,
        }
    }
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulateArgs {
    #[arg(long, value_enum, default_value_t = SimArg::Sim2)]
    pub kind: SimArg,
    /// Comma-separated fractions of observations hidden from the trainer.
    #[arg(long, value_delimiter = ',', default_value = "0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9")]
    pub missing: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 20)]
    pub n_users: usize,
    #[arg(long, default_value_t = 50)]
    pub n_items: usize,
    /// Share of T entries set to an extreme value (sim2 only).
    #[arg(long, default_value_t = 0.14)]
    pub extreme_fraction: f64,
    #[command(flatten)]
    #[serde(flatten)]
    pub hyper: HyperArgs,
    /// Worker threads for independent cells.
    #[arg(long)]
    pub parallel: Option<usize>,
    /// Flat key=value file applied over the flags.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    pub source: DataArgs,
    #[arg(long, value_enum, default_value_t = ModelArg::Sad)]
    pub model: ModelArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    #[serde(flatten)]
    pub hyper: HyperArgs,
    /// Sweep the learning-rate, epoch and l2 grid and keep the best fit.
    #[arg(long)]
    pub grid: bool,
    #[arg(long)]
    pub parallel: Option<usize>,
    /// Storage precision of the trained factors.
    #[arg(long, value_enum, default_value_t = PrecisionArg::F64)]
    pub precision: PrecisionArg,
    /// Record wall-clock seconds per epoch in the training log.
    #[arg(long)]
    pub timing: bool,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GibbsArgs {
    /// Simulate the data instead of reading a file.
    #[arg(long, value_enum, conflicts_with = "data")]
    pub sim: Option<SimArg>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub source: DataArgs,
    #[arg(long, default_value_t = 20)]
    pub n_users: usize,
    #[arg(long, default_value_t = 50)]
    pub n_items: usize,
    /// Fraction of simulated observations hidden from the sampler.
    #[arg(long, default_value_t = 0.0)]
    pub missing: f64,
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 500)]
    pub sweeps: usize,
    #[arg(long, default_value_t = 100)]
    pub burn_in: usize,
    #[arg(long, default_value_t = 1)]
    pub thin: usize,
    #[arg(long, default_value_t = 1.0)]
    pub prior_var: f64,
    /// Inner coordinate passes for each T column.
    #[arg(long, default_value_t = 2)]
    pub tau_passes: usize,
    /// Largest users x items product the sampler accepts.
    #[arg(long, default_value_t = sad_core::gibbs::DEFAULT_PAIR_CAP)]
    pub cap: usize,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    pub source: DataArgs,
    #[arg(long, value_enum, default_value_t = ModelArg::Sad)]
    pub model: ModelArg,
    #[arg(long, default_value_t = 20)]
    pub splits: usize,
    /// Split `s` uses seed `seed_base + s` for both the split and training.
    #[arg(long, default_value_t = 0)]
    pub seed_base: u64,
    /// Never-interacted items ranked against each held-out item.
    #[arg(long, default_value_t = sad_core::data::DEFAULT_TEST_NEGATIVES)]
    pub negatives: usize,
    /// Hit when the held-out item ranks below this.
    #[arg(long, default_value_t = sad_core::evaluation::DEFAULT_HIT_THRESHOLD)]
    pub threshold: usize,
    /// Evaluate this model on every split instead of training per split.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub hyper: HyperArgs,
    #[arg(long)]
    pub parallel: Option<usize>,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Clone, Debug, PartialEq)]
pub struct ReplayArgs {
    /// manifest.json of the run to repeat.
    pub manifest: PathBuf,
}
