use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hyptree::train::{ModelKind, OptimizerKind};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(name = "hyptree", version, about = "Tree embedding experiments with MLPs and hyperbolic networks")]
pub struct Cli {
    /// Master seed for every random stream.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Directory receiving outputs and manifests.
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
    /// Worker threads for grids and studies (0 = all cores). HYPTREE_THREADS
    /// takes precedence.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a tree and lay it out in the plane.
    Gen(GenArgs),
    /// Embed a tree in hyperbolic space within a distortion target.
    Embed(EmbedArgs),
    /// Train an MLP or HNN embedder on a laid-out tree.
    Train(TrainArgs),
    /// Run a grid of training runs from an experiment config.
    Grid(GridArgs),
    /// Compare trained MLP distortion with the hyperbolic construction on spiders.
    Lowerbound(LowerboundArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TreeKind {
    Binary,
    Ternary,
    Random,
}

impl TreeKind {
    pub fn name(self) -> &'static str {
        match self {
            TreeKind::Binary => "binary",
            TreeKind::Ternary => "ternary",
            TreeKind::Random => "random",
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModelArg {
    Mlp,
    Hnn,
}

impl From<ModelArg> for ModelKind {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Mlp => ModelKind::Mlp,
            ModelArg::Hnn => ModelKind::Hnn,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum OptimizerArg {
    Adam,
    Sgd,
}

impl From<OptimizerArg> for OptimizerKind {
    fn from(o: OptimizerArg) -> Self {
        match o {
            OptimizerArg::Adam => OptimizerKind::Adam,
            OptimizerArg::Sgd => OptimizerKind::Sgd,
        }
    }
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, value_enum)]
    pub kind: TreeKind,
    /// Depth of a complete binary or ternary tree.
    #[arg(long, conflicts_with = "n")]
    pub depth: Option<u32>,
    /// Number of nodes (required for random trees).
    #[arg(long)]
    pub n: Option<usize>,
    /// Layout dimension.
    #[arg(long, default_value_t = 2)]
    pub layout_dim: usize,
    /// Spring layout iterations.
    #[arg(long, default_value_t = 50)]
    pub iterations: usize,
    /// Output file (default: <out-dir>/tree.json).
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EmbedArgs {
    #[arg(long)]
    pub tree: PathBuf,
    /// Distortion target, greater than 1.
    #[arg(long)]
    pub lambda: f64,
    /// Comma-separated scale grid (default 1,2,4,..,256).
    #[arg(long, value_delimiter = ',')]
    pub tau_grid: Option<Vec<f64>>,
    /// Also build an HNN realizing the embedding from the layout.
    #[arg(long)]
    pub realize_hnn: bool,
    /// Output file (default: <out-dir>/embedding.json).
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

/// Training flags; each overrides the config file when given.
#[derive(Debug, Args, Default)]
pub struct TrainFlags {
    /// TrainConfig JSON supplying defaults for unset flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub model: Option<ModelArg>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub hidden_layers: Option<usize>,
    #[arg(long)]
    pub hidden_width: Option<usize>,
    #[arg(long, value_enum)]
    pub optimizer: Option<OptimizerArg>,
    #[arg(long)]
    pub batch_norm: bool,
    #[arg(long)]
    pub train_hyperbolic_biases: bool,
    #[arg(long)]
    pub pairs_per_node: Option<usize>,
    #[arg(long)]
    pub test_fraction: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub tree: PathBuf,
    #[command(flatten)]
    pub flags: TrainFlags,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    /// ExperimentConfig JSON.
    #[arg(long)]
    pub config: PathBuf,
    /// Also write one test-MSE heatmap per model kind.
    #[arg(long)]
    pub svg: bool,
}

#[derive(Debug, Args)]
pub struct LowerboundArgs {
    /// Embedding dimension of the MLPs.
    #[arg(long = "dim", default_value_t = 2)]
    pub dim: usize,
    /// Comma-separated leaf counts.
    #[arg(long, value_delimiter = ',', default_value = "2,8,16,32,64")]
    pub leaves: Vec<usize>,
    /// Distortion target of the hyperbolic column.
    #[arg(long, default_value_t = 1.1)]
    pub lambda: f64,
    /// Training restarts per row; the lowest distortion is kept.
    #[arg(long, default_value_t = 3)]
    pub restarts: usize,
    #[arg(long, default_value_t = 100)]
    pub epochs: usize,
    #[arg(long, default_value_t = 256)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 3e-3)]
    pub lr: f64,
    /// Largest scale of the hyperbolic search.
    #[arg(long, default_value_t = 64.0)]
    pub tau_max: f64,
    /// Geometric scale steps per doubling.
    #[arg(long, default_value_t = 8)]
    pub tau_steps: u32,
}
