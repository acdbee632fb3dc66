//! Distance-supervised training of MLP and HNN tree embedders.
//!
//! A network maps each node's layout coordinates to a point; the predicted
//! distance of a pair is the Euclidean distance of the MLP outputs or the
//! unit-curvature hyperbolic distance of the HNN outputs, and the loss is
//! the mean squared error against the tree distance.

mod engine;
mod optim;

use std::collections::HashSet;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::embed::{distortion, DistortionReport};
use crate::error::{check_len, Error, Result};
use crate::hypgeom::{self, kernel};
use crate::networks::{hnn_forward, mlp_forward, DenseLayer, HnnParams, MlpParams, Network};
use crate::seed;
use crate::trees::{tree_metric, TreeMetric, WeightedTree};

pub use engine::Gradient;
pub use optim::Optimizer;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Mlp,
    Hnn,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Mlp => "mlp",
            ModelKind::Hnn => "hnn",
        })
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mlp" => Ok(ModelKind::Mlp),
            "hnn" => Ok(ModelKind::Hnn),
            other => Err(Error::InvalidArgument(format!("unknown model kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Adam,
    Sgd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub model_kind: ModelKind,
    pub hidden_layers: usize,
    pub hidden_width: usize,
    pub embed_dim: usize,
    pub optimizer: OptimizerKind,
    /// Normalize hidden pre-activations with per-batch statistics.
    pub batch_norm: bool,
    /// Also update the hyperbolic biases of an HNN.
    pub train_hyperbolic_biases: bool,
    /// Pair budget per node; all pairs are used when there are fewer.
    pub pairs_per_node: usize,
    pub test_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            batch_size: 4096,
            learning_rate: 1e-2,
            seed: 0,
            model_kind: ModelKind::Mlp,
            hidden_layers: 4,
            hidden_width: 64,
            embed_dim: 2,
            optimizer: OptimizerKind::Adam,
            batch_norm: false,
            train_hyperbolic_biases: false,
            pairs_per_node: 50,
            test_fraction: 0.1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("epochs", self.epochs),
            ("batch_size", self.batch_size),
            ("hidden_layers", self.hidden_layers),
            ("hidden_width", self.hidden_width),
            ("embed_dim", self.embed_dim),
            ("pairs_per_node", self.pairs_per_node),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(Error::InvalidArgument(format!("{name} must be at least 1")));
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::InvalidArgument("learning_rate must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.test_fraction) {
            return Err(Error::InvalidArgument("test_fraction must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pair {
    pub u: i64,
    pub v: i64,
    pub d_true: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PairBatch {
    pub pairs: Vec<Pair>,
}

impl PairBatch {
    /// Pairs of tree nodes given by index, labelled with their tree distance.
    pub fn from_indices(t: &WeightedTree, metric: &TreeMetric, idx: &[(usize, usize)]) -> Self {
        let ids = t.ids();
        let pairs = idx
            .iter()
            .map(|&(i, j)| Pair {
                u: ids[i],
                v: ids[j],
                d_true: metric.get(i, j),
            })
            .collect();
        Self { pairs }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

pub fn d_pred_mlp(p: &MlpParams, x1: &[f64], x2: &[f64]) -> Result<f64> {
    let a = mlp_forward(p, x1)?;
    let b = mlp_forward(p, x2)?;
    Ok(a.iter().zip(&b).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt())
}

pub fn d_pred_hnn(p: &HnnParams, x1: &[f64], x2: &[f64]) -> Result<f64> {
    let a = hnn_forward(p, x1)?;
    let b = hnn_forward(p, x2)?;
    hypgeom::distance(&a, &b, hypgeom::Curvature::UNIT)
}

/// Mean of `(d_true - predict(pair))^2` over the batch.
pub fn loss_mse(batch: &PairBatch, mut predict: impl FnMut(&Pair) -> Result<f64>) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let mut sum = 0.0;
    for pair in &batch.pairs {
        let r = pair.d_true - predict(pair)?;
        sum += r * r;
    }
    Ok(sum / batch.len() as f64)
}

/// Layout coordinates of every node as matrix rows, in tree node order.
#[derive(Debug, Clone)]
pub struct NodeInputs {
    ids: Vec<i64>,
    x: Array2<f64>,
}

impl NodeInputs {
    pub fn from_tree(t: &WeightedTree) -> Result<Self> {
        if !t.has_layout() {
            return Err(Error::InvalidArgument("tree has no layout coordinates".into()));
        }
        let n = t.n_dim();
        let mut x = Array2::zeros((t.len(), n));
        for i in 0..t.len() {
            x.row_mut(i).assign(&Array1::from(t.coords(i).to_vec()));
        }
        Ok(Self { ids: t.ids(), x })
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    pub fn len(&self) -> usize {
        self.x.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.x.nrows() == 0
    }

    fn index(&self, id: i64) -> Result<usize> {
        // Generated trees number nodes 0..n, so try the direct slot first.
        if let Ok(i) = usize::try_from(id) {
            if self.ids.get(i) == Some(&id) {
                return Ok(i);
            }
        }
        self.ids
            .iter()
            .position(|&v| v == id)
            .ok_or(Error::Tree(crate::TreeError::UnknownNode(id)))
    }
}

/// Pairs resolved to the rows of a sub-batch of distinct nodes.
struct Resolved {
    rows: Vec<usize>,
    local: Vec<(usize, usize, f64)>,
}

fn resolve(inputs: &NodeInputs, batch: &PairBatch) -> Result<Resolved> {
    let mut slot = vec![usize::MAX; inputs.len()];
    let mut rows = Vec::new();
    let mut local = Vec::with_capacity(batch.len());
    let mut place = |i: usize, rows: &mut Vec<usize>| {
        if slot[i] == usize::MAX {
            slot[i] = rows.len();
            rows.push(i);
        }
        slot[i]
    };
    for p in &batch.pairs {
        let (i, j) = (inputs.index(p.u)?, inputs.index(p.v)?);
        let a = place(i, &mut rows);
        let b = place(j, &mut rows);
        local.push((a, b, p.d_true));
    }
    Ok(Resolved { rows, local })
}

fn gather(inputs: &NodeInputs, rows: &[usize]) -> Array2<f64> {
    inputs.x.select(ndarray::Axis(0), rows)
}

/// Loss on `batch` and its gradient with respect to every parameter.
/// Hyperbolic-bias entries are Riemannian gradients at the bias points.
pub fn grad(
    net: &Network,
    inputs: &NodeInputs,
    batch: &PairBatch,
    batch_norm: bool,
) -> Result<(f64, Gradient)> {
    grad_with(net, inputs, batch, batch_norm, true)
}

fn grad_with(
    net: &Network,
    inputs: &NodeInputs,
    batch: &PairBatch,
    batch_norm: bool,
    bias_grads: bool,
) -> Result<(f64, Gradient)> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    check_len(net.input_dim(), inputs.dim())?;
    let r = resolve(inputs, batch)?;
    let tape = engine::forward_batch(net, &gather(inputs, &r.rows), batch_norm)?;
    let out = &tape.chart;
    let scale = 2.0 / r.local.len() as f64;
    let mut loss = 0.0;
    let mut g_out = Array2::zeros(out.raw_dim());
    for &(a, b, d_true) in &r.local {
        let (d, ga, gb) = engine::pair_distance(
            net,
            out.row(a).as_slice().unwrap(),
            out.row(b).as_slice().unwrap(),
        );
        let res = d - d_true;
        loss += res * res;
        let w = scale * res;
        g_out.row_mut(a).scaled_add(w, &Array1::from(ga));
        g_out.row_mut(b).scaled_add(w, &Array1::from(gb));
    }
    loss /= r.local.len() as f64;
    if !loss.is_finite() {
        return Err(Error::NonFinite("loss".into()));
    }
    Ok((loss, engine::backward(net, &tape, g_out, bias_grads)))
}

/// Outputs for every node, with batch statistics taken over all nodes.
pub fn embed_nodes(net: &Network, inputs: &NodeInputs, batch_norm: bool) -> Result<Array2<f64>> {
    check_len(net.input_dim(), inputs.dim())?;
    Ok(engine::forward_batch(net, &inputs.x, batch_norm)?.output)
}

/// Chart coordinates of every node (see [`chart_distance`]).
pub(crate) fn chart_nodes(net: &Network, inputs: &NodeInputs, batch_norm: bool) -> Result<Array2<f64>> {
    check_len(net.input_dim(), inputs.dim())?;
    Ok(engine::forward_batch(net, &inputs.x, batch_norm)?.chart)
}

/// Output distance from chart coordinates: Euclidean for an MLP, the
/// hyperbolic distance between the exponential images at the basepoint for
/// an HNN. Equal to [`output_distance`] on the outputs, without the
/// cancellation of ambient coordinates far from the basepoint.
pub(crate) fn chart_distance(net: &Network, a: &[f64], b: &[f64]) -> f64 {
    match net {
        Network::Mlp(_) => output_distance(net, a, b),
        Network::Hnn(_) => kernel::chart_dist(a, b),
    }
}

/// Distance between the outputs of two nodes under the network's geometry.
pub fn output_distance(net: &Network, a: &[f64], b: &[f64]) -> f64 {
    match net {
        Network::Mlp(_) => a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt(),
        Network::Hnn(_) => kernel::dist(a, b),
    }
}

fn mse_on(net: &Network, inputs: &NodeInputs, out: &Array2<f64>, pairs: &[Pair]) -> Result<f64> {
    if pairs.is_empty() {
        return Ok(f64::NAN);
    }
    let mut sum = 0.0;
    for p in pairs {
        let (i, j) = (inputs.index(p.u)?, inputs.index(p.v)?);
        let d = chart_distance(net, out.row(i).as_slice().unwrap(), out.row(j).as_slice().unwrap());
        sum += (d - p.d_true) * (d - p.d_true);
    }
    Ok(sum / pairs.len() as f64)
}

/// Kaiming-initialized network for `cfg` on `input_dim`-dimensional inputs,
/// drawn from the `init` stream; HNN biases start at the basepoints.
pub fn init_network(cfg: &TrainConfig, input_dim: usize) -> Result<Network> {
    cfg.validate()?;
    if input_dim == 0 {
        return Err(Error::InvalidArgument("input dimension must be positive".into()));
    }
    let mut rng = seed::stream_rng(cfg.seed, seed::INIT);
    let mut dims = vec![input_dim];
    dims.extend(std::iter::repeat_n(cfg.hidden_width, cfg.hidden_layers));
    dims.push(cfg.embed_dim);
    let layers = dims
        .windows(2)
        .map(|w| {
            let std = (2.0 / w[0] as f64).sqrt();
            let a = Array2::from_shape_simple_fn((w[1], w[0]), || {
                std * rng.sample::<f64, _>(StandardNormal)
            });
            DenseLayer::new(a, Array1::zeros(w[1]))
        })
        .collect::<Result<Vec<_>>>()?;
    let mlp = MlpParams::new(layers)?;
    Ok(match cfg.model_kind {
        ModelKind::Mlp => Network::Mlp(mlp),
        ModelKind::Hnn => Network::Hnn(HnnParams::from_mlp(mlp)),
    })
}

/// Training and test pairs: every unordered pair when there are at most
/// `pairs_per_node * n` of them, otherwise that many distinct pairs drawn
/// uniformly; then a seeded split.
pub fn sample_pairs(t: &WeightedTree, metric: &TreeMetric, cfg: &TrainConfig) -> (PairBatch, PairBatch) {
    let n = t.len();
    let total = n * n.saturating_sub(1) / 2;
    let budget = cfg.pairs_per_node.saturating_mul(n);
    let mut rng = seed::stream_rng(cfg.seed, seed::SPLIT);
    let mut idx: Vec<(usize, usize)> = if total <= budget {
        (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect()
    } else {
        let mut seen = HashSet::with_capacity(budget);
        let mut out = Vec::with_capacity(budget);
        while out.len() < budget {
            let i = rng.random_range(0..n);
            let j = rng.random_range(0..n);
            if i != j && seen.insert((i.min(j), i.max(j))) {
                out.push((i.min(j), i.max(j)));
            }
        }
        out
    };
    idx.shuffle(&mut rng);
    let n_test = (cfg.test_fraction * idx.len() as f64).floor() as usize;
    let test = idx.split_off(idx.len() - n_test);
    (
        PairBatch::from_indices(t, metric, &idx),
        PairBatch::from_indices(t, metric, &test),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub train_mse: f64,
    /// Not a number when there are no test pairs.
    pub test_mse: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub network: Network,
    pub batch_norm: bool,
    pub history: Vec<EpochLoss>,
    pub report: DistortionReport,
}

impl TrainOutcome {
    pub fn final_loss(&self) -> Option<EpochLoss> {
        self.history.last().copied()
    }
}

/// Trains a fresh network on `t` and reports the distortion of the node
/// embedding it induces.
pub fn train_embedding(t: &WeightedTree, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let inputs = NodeInputs::from_tree(t)?;
    let metric = tree_metric(t);
    let net = init_network(cfg, inputs.dim())?;
    train_network(net, t, &inputs, &metric, cfg)
}

/// Training loop starting from `net`.
pub fn train_network(
    mut net: Network,
    t: &WeightedTree,
    inputs: &NodeInputs,
    metric: &TreeMetric,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if t.len() < 2 {
        return Err(Error::InvalidArgument("training needs at least two nodes".into()));
    }
    let (train, test) = sample_pairs(t, metric, cfg);
    let mut order = train.pairs.clone();
    let mut rng = seed::stream_rng(cfg.seed, seed::BATCH);
    let mut opt = Optimizer::new(cfg.optimizer, cfg.learning_rate);
    let mut history = Vec::with_capacity(cfg.epochs);
    let bn = cfg.batch_norm;
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut weighted = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch = PairBatch {
                pairs: chunk.to_vec(),
            };
            let (loss, g) = grad_with(&net, inputs, &batch, bn, cfg.train_hyperbolic_biases).map_err(|e| Error::Divergence {
                epoch,
                reason: e.to_string(),
            })?;
            weighted += loss * chunk.len() as f64;
            opt.step(&mut net, &g, cfg.train_hyperbolic_biases);
        }
        let train_mse = weighted / order.len() as f64;
        let out = chart_nodes(&net, inputs, bn).map_err(|e| Error::Divergence {
            epoch,
            reason: e.to_string(),
        })?;
        let test_mse = mse_on(&net, inputs, &out, &test.pairs)?;
        if !train_mse.is_finite() || test_mse.is_infinite() {
            return Err(Error::Divergence {
                epoch,
                reason: "non-finite loss".into(),
            });
        }
        history.push(EpochLoss {
            epoch,
            train_mse,
            test_mse,
        });
    }
    let out = chart_nodes(&net, inputs, bn)?;
    let rows: Vec<_> = out.outer_iter().collect();
    let report = distortion(&rows, metric, |a, b| {
        chart_distance(&net, a.as_slice().unwrap(), b.as_slice().unwrap())
    });
    Ok(TrainOutcome {
        network: net,
        batch_norm: bn,
        history,
        report,
    })
}

/// Writes `epoch,train_mse,test_mse` rows with a header.
pub fn write_loss_csv<W: Write>(history: &[EpochLoss], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["epoch", "train_mse", "test_mse"])
        .map_err(csv_err)?;
    for h in history {
        out.write_record([
            h.epoch.to_string(),
            format_float(h.train_mse),
            format_float(h.test_mse),
        ])
        .map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

/// Shortest round-trip representation; `nan` and `inf` spelled out.
pub fn format_float(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:?}")
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}
