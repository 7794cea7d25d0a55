use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fisherform::metrics::MetricKind;
use fisherform::train::Optimizer;
use fisherform::{DropoutConfig, NetworkSpec};

#[derive(Debug, Parser)]
#[command(
    name = "fisherform",
    version,
    about = "Unusual-input detection for dense softmax classifiers"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a classifier (or an ensemble) and write FGN model files.
    Train(TrainArgs),
    /// Score a dataset with one or more uncertainty metrics.
    Score(ScoreArgs),
    /// ROC curve and AUC for telling two score files apart.
    Roc(RocArgs),
    /// Write a perturbed copy or a threshold split of a dataset.
    Perturb(PerturbArgs),
    /// Run a scenario described by a JSON config.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DataFormat {
    Idx,
    Csv,
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// CSV file, IDX image file (with --labels), or the word `blobs` for synthetic clusters.
    #[arg(long)]
    pub data: String,
    /// IDX label file matching --data.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Input format; defaults to idx when --labels is given, csv otherwise.
    #[arg(long, value_enum)]
    pub format: Option<DataFormat>,
    /// Name of the label column in CSV input.
    #[arg(long, default_value = "label")]
    pub label_column: String,
    /// Points per class for `--data blobs`.
    #[arg(long, default_value_t = 200)]
    pub blob_count: usize,
    /// Per-axis standard deviation for `--data blobs`.
    #[arg(long, default_value_t = 1.0)]
    pub blob_spread: f64,
    /// Seed for blob centers and points.
    #[arg(long, default_value_t = 0)]
    pub blob_seed: u64,
    /// Number of blob classes (defaults to the network's class count, else 2).
    #[arg(long)]
    pub blob_classes: Option<usize>,
    /// Blob dimension (defaults to the network's input width, else 2).
    #[arg(long)]
    pub blob_dim: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Layer widths, input first and class count last, e.g. 784-128-10.
    #[arg(long)]
    pub arch: NetworkSpec,
    #[arg(long, default_value_t = 10)]
    pub epochs: usize,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    #[arg(long = "lr", default_value_t = 1e-3)]
    pub learning_rate: f64,
    /// sgd, sgd_momentum or adam.
    #[arg(long, default_value = "adam")]
    pub optimizer: Optimizer,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Train with dropout on hidden outputs, e.g. bernoulli:0.2.
    #[arg(long)]
    pub dropout: Option<DropoutConfig>,
    /// Oversample smaller classes every epoch.
    #[arg(long)]
    pub balance_classes: bool,
    /// Also write the parameters after every epoch (`<stem>.epochNNN.fgn`).
    #[arg(long)]
    pub snapshots: bool,
    /// Train N members with seeds seed..seed+N-1 (`<stem>.member<k>.fgn`).
    #[arg(long)]
    pub ensemble: Option<usize>,
    /// Evaluation data (same format as --data) for a test accuracy.
    #[arg(long)]
    pub test_data: Option<PathBuf>,
    #[arg(long)]
    pub test_labels: Option<PathBuf>,
    /// Output model file.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct ScoringArgs {
    /// Comma-separated metrics: error_prob, entropy, fisher, fisher_fd, mc_dropout_entropy, ensemble_entropy.
    #[arg(long, value_delimiter = ',', default_value = "entropy,fisher")]
    pub metric: Vec<MetricKind>,
    /// Stochastic forward passes for mc_dropout_entropy.
    #[arg(long, default_value_t = 32)]
    pub passes: usize,
    /// Scoring-time dropout, `bernoulli:<rate>` or `gaussian:<rate>`.
    #[arg(long, default_value = "bernoulli:0.5")]
    pub dropout: DropoutConfig,
    /// Seed of the dropout masks.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Base step of fisher_fd.
    #[arg(long, default_value_t = 1e-3)]
    pub fd_step: f64,
    /// Use the unnormalized negative entropy gradient as the Fisher direction.
    #[arg(long)]
    pub raw_direction: bool,
    /// Score ensembles by the entropy of the averaged prediction.
    #[arg(long)]
    pub mixture: bool,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Model file; with --ensemble N, the stem of `<stem>.member<k>.fgn`.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub ensemble: Option<usize>,
    #[command(flatten)]
    pub scoring: ScoringArgs,
    /// `metric,score` CSV used to fill the normalized column.
    #[arg(long)]
    pub reference: Option<PathBuf>,
    /// Also write this run's raw scores as a reference CSV.
    #[arg(long)]
    pub emit_reference: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RocArgs {
    /// Score CSV of the unusual inputs.
    #[arg(long)]
    pub positive: PathBuf,
    /// Score CSV of the normal inputs.
    #[arg(long)]
    pub negative: PathBuf,
    #[arg(long)]
    pub metric: MetricKind,
    /// Use the normalized column instead of the raw scores.
    #[arg(long)]
    pub normalized: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PerturbArgs {
    #[command(subcommand)]
    pub kind: PerturbKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Domain {
    Image,
    Tabular,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Side {
    Below,
    Above,
}

#[derive(Debug, Subcommand)]
pub enum PerturbKind {
    /// Add lambda-scaled standard normal noise to every input.
    Noise {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        lambda: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Clip to [0, 1] (image) or not (tabular); defaults to image for IDX input.
        #[arg(long, value_enum)]
        domain: Option<Domain>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Replace one color channel by 1 - value.
    Invert {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        channel: usize,
        /// HxWxC, required unless the input carries an image layout.
        #[arg(long)]
        layout: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Partition rows by `feature < threshold`.
    Split {
        #[command(flatten)]
        data: DataArgs,
        /// `<feature index>:<threshold>`, e.g. 0:-3.0.
        #[arg(long, allow_hyphen_values = true)]
        split: String,
        /// Which side is written to --out.
        #[arg(long, value_enum, default_value = "below")]
        train_side: Side,
        #[arg(long)]
        out: PathBuf,
        /// Where the other side goes.
        #[arg(long)]
        held_out: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// JSON experiment description.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory (created if missing).
    #[arg(long)]
    pub out: PathBuf,
}
