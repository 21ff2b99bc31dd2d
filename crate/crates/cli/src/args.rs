use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Clone, Parser)]
#[command(name = "fairlab", version, about = "Demographic-parity fair learning toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Fuzz the majority-collapse bounds on random discrete joints.
    OracleVerify(OracleArgs),
    /// Train ERM, fair and SA-DRO models, optionally over a sweep.
    Train(TrainArgs),
    /// Simulate federated training across heterogeneous clients.
    Fedsim(FedArgs),
    /// Merge metrics from earlier runs into one table.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct OracleArgs {
    /// Check set: 1 = DDP bound (deterministic labels), 2 = MI/ERMI/MC
    /// bounds, 3 = exact-ratio joints, 4 = perturbed-ratio joints, lemmas =
    /// Pinsker-type inequalities.
    #[arg(long, value_parser = ["1", "2", "3", "4", "lemmas", "all"])]
    pub theorem: String,
    #[arg(long, default_value_t = 200)]
    pub trials: usize,
    /// Comma-separated budgets; each check has its own default.
    #[arg(long, value_delimiter = ',')]
    pub eps: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of sensitive groups for checks 1 and 2.
    #[arg(long, default_value_t = 2)]
    pub groups: usize,
    /// Perturbation strength for check 4.
    #[arg(long, default_value_t = 0.02)]
    pub eta: f64,
    #[serde(skip)]
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SyntheticName {
    Compas,
    Adult,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DataArgs {
    /// CSV file with a header row.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Schema file for `--data`.
    #[arg(long)]
    pub schema: Option<PathBuf>,
    /// Built-in generated pool instead of a CSV.
    #[arg(long, value_enum, conflicts_with_all = ["data", "schema"])]
    pub synthetic: Option<SyntheticName>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct OptimArgs {
    #[arg(long, default_value = "ddp")]
    pub kind: String,
    /// `linear` or `mlp1:H`.
    #[arg(long, default_value = "linear")]
    pub model: String,
    #[arg(long, default_value_t = 0.05)]
    pub step_w: f64,
    #[arg(long, default_value_t = 0.01)]
    pub step_q: f64,
    /// Minibatch size; full batch when absent.
    #[arg(long)]
    pub batch: Option<usize>,
    /// `ratio` or `literal`.
    #[arg(long, default_value = "ratio")]
    pub weight_mode: String,
    /// Penalty bandwidth as a fraction of the score standard deviation.
    #[arg(long, default_value_t = 0.1)]
    pub bandwidth_scale: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Fraction of group 0 in both splits (imbalance subsampling).
    #[arg(long)]
    pub ratio: Option<f64>,
    #[arg(long, default_value_t = 2500)]
    pub n_train: usize,
    #[arg(long, default_value_t = 750)]
    pub n_test: usize,
    /// Held-out fraction when `--ratio` is absent.
    #[arg(long, default_value_t = 0.25)]
    pub test_fraction: f64,
    #[command(flatten)]
    pub optim: OptimArgs,
    #[arg(long, conflicts_with = "lambda_sweep")]
    pub lambda: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub lambda_sweep: Option<Vec<f64>>,
    /// `off`, `chi2:DELTA`, `lagrange:ZETA` or `zeta-sweep:Z1,Z2,...`.
    #[arg(long, default_value = "off")]
    pub dro: String,
    #[arg(long, default_value_t = 2000)]
    pub steps: usize,
    #[arg(long, default_value_t = 100)]
    pub record_every: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[serde(skip)]
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FedModeName {
    Fedavg,
    Fedfair,
    Fedsadro,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AggregationName {
    Weighted,
    Uniform,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FedArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value_t = 4)]
    pub clients: usize,
    /// Share of client 1's samples from the network-minority group.
    #[arg(long, default_value_t = 0.8)]
    pub minority_ratio: f64,
    /// Same share for every other client.
    #[arg(long, default_value_t = 0.2)]
    pub majority_ratio: f64,
    #[arg(long, default_value_t = 3000)]
    pub n_train: usize,
    #[arg(long, default_value_t = 750)]
    pub n_test: usize,
    #[arg(long, value_enum, default_value = "fedfair")]
    pub mode: FedModeName,
    #[command(flatten)]
    pub optim: OptimArgs,
    #[arg(long, default_value_t = 0.9)]
    pub lambda: f64,
    /// DRO mode for `fedsadro`: `chi2:DELTA` or `lagrange:ZETA`.
    #[arg(long, default_value = "lagrange:0.9")]
    pub dro: String,
    #[arg(long, default_value_t = 100)]
    pub rounds: usize,
    #[arg(long, default_value_t = 20)]
    pub local_steps: usize,
    #[arg(long, value_enum, default_value = "weighted")]
    pub aggregation: AggregationName,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also train every client alone and report both.
    #[arg(long)]
    pub local_baselines: bool,
    #[serde(skip)]
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Md,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitName {
    Train,
    Test,
}

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    /// Output directories of `train` or `fedsim` runs.
    #[arg(long = "in", num_args = 1.., required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "md")]
    pub format: ReportFormat,
    #[arg(long, value_enum, default_value = "test")]
    pub split: SplitName,
    /// Write here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
