use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use slrr::features::Kind;

#[derive(Debug, Parser)]
#[command(name = "slrr", version, about = "Low-rank representation of square-root densities on the sphere")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve for the representation matrix W.
    Fit(FitArgs),
    /// Cluster the samples.
    Cluster(ClusterArgs),
    /// Train/test classification accuracy.
    Classify(ClassifyArgs),
    /// Accuracy under additive Gaussian noise at several SNRs.
    NoiseSweep(SweepArgs),
    /// Write a synthetic labelled sphere dataset.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum KindArg {
    Raw,
    Hist,
    Sphere,
}

impl From<KindArg> for Kind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Raw => Kind::Raw,
            KindArg::Hist => Kind::Hist,
            KindArg::Sphere => Kind::Sphere,
        }
    }
}

impl From<Kind> for KindArg {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Raw => KindArg::Raw,
            Kind::Hist => KindArg::Hist,
            Kind::Sphere => KindArg::Sphere,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct FeatureArgs {
    /// How to read the numeric columns; overrides a `#kind=` directive.
    #[arg(long, value_enum)]
    pub kind: Option<KindArg>,
    /// Histogram bins per axis (raw input; default 16). For hist input, must
    /// match the column count when given.
    #[arg(long)]
    pub bins: Option<usize>,
    /// Components per measurement in raw input, stored interleaved.
    #[arg(long, default_value_t = 1)]
    pub dims: usize,
    /// Additive smoothing applied to histogram counts.
    #[arg(long, default_value_t = 0.0)]
    pub alpha: f64,
}

#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    #[arg(long, default_value_t = 0.1)]
    pub lambda: f64,
    #[arg(long, default_value_t = 0.01)]
    pub nu: f64,
    /// Distance scale of the geodesic ℓ1 weights.
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    #[arg(long, default_value_t = 1.0)]
    pub mu_factor: f64,
    #[arg(long)]
    pub forbid_diagonal: bool,
    #[arg(long, default_value_t = 1e-8)]
    pub eps: f64,
    #[arg(long, default_value_t = 1000)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 1.1)]
    pub rho: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub beta0: f64,
    #[arg(long, default_value_t = 1e10)]
    pub beta_max: f64,
    /// Refuse inputs with more samples than this.
    #[arg(long, default_value_t = 2000)]
    pub n_max: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClusterMethod {
    Proposed,
    NcutRaw,
    LrrEuclid,
    Gncut,
    Sc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClassifyMethod {
    Proposed,
    Gknn,
    KnnRaw,
    LrrEuclid,
    Sc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum AffinityArg {
    #[default]
    Abs,
    Wtw,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    #[default]
    Cluster,
    Classify,
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    pub input: PathBuf,
    #[command(flatten)]
    pub features: FeatureArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Where to write W: CSV, or the binary format for a `.bin` path.
    /// Defaults to CSV on stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-iteration trace as JSON lines.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct GraphArgs {
    /// Number of clusters; defaults to the number of classes in the label column.
    #[arg(long)]
    pub k: Option<usize>,
    /// How W becomes a graph.
    #[arg(long, value_enum, default_value_t = AffinityArg::Abs)]
    pub affinity: AffinityArg,
    /// Kernel width for the kernel baselines; defaults to the median pairwise distance.
    #[arg(long)]
    pub kernel_width: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct ClusterArgs {
    pub input: PathBuf,
    #[command(flatten)]
    pub features: FeatureArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub graph: GraphArgs,
    #[arg(long, value_enum, default_value_t = ClusterMethod::Proposed)]
    pub method: ClusterMethod,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Labels CSV (`id,cluster`); defaults to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Results JSON; defaults to stderr.
    #[arg(long)]
    pub results: Option<PathBuf>,
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SplitArgs {
    /// Fraction of each class used for training.
    #[arg(long, default_value_t = 0.8)]
    pub split: f64,
    /// Neighbours consulted by the kNN stage.
    #[arg(long, default_value_t = 1)]
    pub neighbors: usize,
}

#[derive(Debug, Clone, Args)]
pub struct ClassifyArgs {
    pub input: PathBuf,
    #[command(flatten)]
    pub features: FeatureArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub split: SplitArgs,
    /// Repeat to compare methods.
    #[arg(long = "method", value_enum, default_values_t = [ClassifyMethod::Proposed])]
    pub methods: Vec<ClassifyMethod>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Results JSON; defaults to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    pub input: PathBuf,
    #[command(flatten)]
    pub features: FeatureArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub graph: GraphArgs,
    #[command(flatten)]
    pub split: SplitArgs,
    #[arg(long, value_enum, default_value_t = Task::Cluster)]
    pub task: Task,
    /// Method names of the chosen task; repeat to compare.
    #[arg(long = "method", default_values_t = ["proposed".to_string()])]
    pub methods: Vec<String>,
    /// Linear signal-to-noise power ratio; repeatable.
    #[arg(long)]
    pub snr: Vec<f64>,
    /// SNR in decibels; repeatable.
    #[arg(long)]
    pub snr_db: Vec<f64>,
    /// Independent noise draws per SNR.
    #[arg(long, default_value_t = 1)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Long-format CSV; defaults to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 3)]
    pub k: usize,
    #[arg(long, default_value_t = 30)]
    pub n_per: usize,
    /// Sphere dimension; rows have m + 1 coordinates.
    #[arg(long, default_value_t = 9)]
    pub m: usize,
    #[arg(long, default_value_t = 0.05)]
    pub spread: f64,
    #[arg(long, default_value_t = 0.8)]
    pub min_sep: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Dataset CSV; defaults to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
