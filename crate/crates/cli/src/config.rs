//! Experiment configuration files and tree construction.

use std::path::{Path, PathBuf};

use hyptree::train::{ModelKind, TrainConfig};
use hyptree::trees::{gen_complete, gen_kary, gen_random, spring_layout, LayoutParams, WeightedTree};
use serde::{Deserialize, Deserializer, Serialize};

use crate::args::{TrainFlags, TreeKind};
use crate::{CliError, CliResult};

/// A grid of training runs: every tree kind and size, embedding dimension,
/// model kind and seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// One kind or a list of kinds.
    #[serde(deserialize_with = "one_or_many")]
    pub tree_kind: Vec<TreeKind>,
    /// Node counts. Binary and ternary sizes give the complete tree on the
    /// first `n` nodes in breadth-first order.
    #[serde(default)]
    pub sizes: Vec<usize>,
    /// Depths of complete binary or ternary trees, as an alternative to
    /// `sizes`.
    #[serde(default)]
    pub depths: Vec<u32>,
    #[serde(default = "default_dims")]
    pub dims: Vec<usize>,
    #[serde(default = "default_models")]
    pub models: Vec<ModelKind>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Training settings; `embed_dim`, `model_kind` and `seed` are set per
    /// row.
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default = "default_layout_iterations")]
    pub layout_iterations: usize,
    /// Overrides `--out-dir`.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

fn default_dims() -> Vec<usize> {
    vec![2, 4, 6, 8]
}

fn default_models() -> Vec<ModelKind> {
    vec![ModelKind::Mlp, ModelKind::Hnn]
}

fn default_seeds() -> Vec<u64> {
    vec![0, 1, 2]
}

fn default_layout_iterations() -> usize {
    LayoutParams::default().iterations
}

fn one_or_many<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<TreeKind>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        One(TreeKind),
        Many(Vec<TreeKind>),
    }
    Ok(match OneOrMany::deserialize(d)? {
        OneOrMany::One(k) => vec![k],
        OneOrMany::Many(v) => v,
    })
}

/// How a tree of a grid is specified.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TreeSpec {
    Size(usize),
    Depth(u32),
}

impl ExperimentConfig {
    pub fn read(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: Self = serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> CliResult<()> {
        let usage = |m: &str| Err(CliError::Usage(m.to_string()));
        if self.tree_kind.is_empty() {
            return usage("tree_kind must name at least one kind");
        }
        if self.dims.is_empty() || self.seeds.is_empty() || self.models.is_empty() {
            return usage("dims, models and seeds must be non-empty");
        }
        if self.dims.contains(&0) {
            return usage("dims must be positive");
        }
        match (self.sizes.is_empty(), self.depths.is_empty()) {
            (true, true) => return usage("one of sizes or depths is required"),
            (false, false) => return usage("give either sizes or depths, not both"),
            _ => {}
        }
        if self.sizes.contains(&0) {
            return usage("sizes must be positive");
        }
        if !self.depths.is_empty() && self.tree_kind.contains(&TreeKind::Random) {
            return usage("random trees are specified by sizes");
        }
        if self.layout_iterations == 0 {
            return usage("layout_iterations must be positive");
        }
        let mut train = self.train.clone();
        train.embed_dim = self.dims[0];
        train.validate().map_err(|e| CliError::Usage(e.to_string()))
    }

    pub fn tree_specs(&self) -> Vec<TreeSpec> {
        if self.depths.is_empty() {
            self.sizes.iter().map(|&n| TreeSpec::Size(n)).collect()
        } else {
            self.depths.iter().map(|&d| TreeSpec::Depth(d)).collect()
        }
    }
}

fn branching(kind: TreeKind) -> usize {
    match kind {
        TreeKind::Binary => 2,
        TreeKind::Ternary => 3,
        TreeKind::Random => unreachable!("random trees have no branching factor"),
    }
}

/// Builds the tree of `kind` and `spec`; random trees draw from `seed`.
pub fn build_tree(kind: TreeKind, spec: TreeSpec, seed: u64) -> CliResult<WeightedTree> {
    Ok(match (kind, spec) {
        (TreeKind::Random, TreeSpec::Size(n)) => gen_random(n, seed),
        (TreeKind::Random, TreeSpec::Depth(_)) => {
            return Err(CliError::Usage("random trees need --n".into()));
        }
        (k, TreeSpec::Size(n)) => gen_complete(branching(k), n),
        (k, TreeSpec::Depth(d)) => gen_kary(branching(k), d),
    })
}

/// [`build_tree`] followed by a spring layout from the same seed.
pub fn laid_out_tree(kind: TreeKind, spec: TreeSpec, seed: u64, layout: &LayoutParams) -> CliResult<WeightedTree> {
    let mut t = build_tree(kind, spec, seed)?;
    spring_layout(&mut t, layout, seed)?;
    Ok(t)
}

/// Training config from an optional JSON file overridden by explicit flags.
/// The seed always comes from the master `seed`.
pub fn train_config(flags: &TrainFlags, seed: u64) -> CliResult<TrainConfig> {
    let mut cfg: TrainConfig = match &flags.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?
        }
        None => TrainConfig::default(),
    };
    cfg.seed = seed;
    if let Some(m) = flags.model {
        cfg.model_kind = m.into();
    }
    if let Some(v) = flags.dim {
        cfg.embed_dim = v;
    }
    if let Some(v) = flags.epochs {
        cfg.epochs = v;
    }
    if let Some(v) = flags.batch_size {
        cfg.batch_size = v;
    }
    if let Some(v) = flags.lr {
        cfg.learning_rate = v;
    }
    if let Some(v) = flags.hidden_layers {
        cfg.hidden_layers = v;
    }
    if let Some(v) = flags.hidden_width {
        cfg.hidden_width = v;
    }
    if let Some(v) = flags.optimizer {
        cfg.optimizer = v.into();
    }
    if let Some(v) = flags.pairs_per_node {
        cfg.pairs_per_node = v;
    }
    if let Some(v) = flags.test_fraction {
        cfg.test_fraction = v;
    }
    cfg.batch_norm |= flags.batch_norm;
    cfg.train_hyperbolic_biases |= flags.train_hyperbolic_biases;
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(cfg)
}
