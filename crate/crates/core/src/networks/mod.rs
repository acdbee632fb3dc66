//! ReLU multilayer perceptrons and hyperbolic neural networks.
//!
//! An HNN maps `R^n` into `H^d`. The input is sent to the tangent space at
//! the basepoint, transported to the entry bias `c0` and pushed onto `H^n`
//! with `Exp_{c0}`. Every layer then reads its input in coordinates
//! (`Log` at the previous hyperbolic bias, transport back to the basepoint,
//! drop the last coordinate), applies `A x + b` (plus ReLU on all but the
//! last layer) and writes the result back onto the hyperboloid at its own
//! hyperbolic bias. Consecutive layers share the bias between them.

mod io;
mod memorize;

use ndarray::{Array1, Array2};

use crate::error::{check_len, Error, Result};
use crate::hypgeom::{self, kernel, HPoint};

pub use io::Network;
pub use memorize::{memorize_hnn, memorize_relu, MEMORIZER_PARAM_CONSTANT};

/// One affine map `x -> A x + b` with `A` of shape `rows x cols`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub a: Array2<f64>,
    pub b: Array1<f64>,
}

impl DenseLayer {
    pub fn new(a: Array2<f64>, b: Array1<f64>) -> Result<Self> {
        check_len(a.nrows(), b.len())?;
        if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("layer parameters".into()));
        }
        Ok(Self { a, b })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            a: Array2::zeros((rows, cols)),
            b: Array1::zeros(rows),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            a: Array2::eye(n),
            b: Array1::zeros(n),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.a.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.a.nrows()
    }

    /// `A x + b`, summed left to right in each row.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.a
            .outer_iter()
            .zip(self.b.iter())
            .map(|(row, bias)| row.iter().zip(x).fold(*bias, |acc, (w, v)| acc + w * v))
            .collect()
    }

    fn nonzeros(&self) -> usize {
        nnz(self.a.iter()) + nnz(self.b.iter())
    }
}

fn nnz<'a>(it: impl Iterator<Item = &'a f64>) -> usize {
    it.filter(|v| **v != 0.0).count()
}

fn relu_in_place(v: &mut [f64]) {
    v.iter_mut().for_each(|x| *x = x.max(0.0));
}

fn check_chain(layers: &[DenseLayer]) -> Result<()> {
    if layers.is_empty() {
        return Err(Error::InvalidArgument("network needs at least one layer".into()));
    }
    for pair in layers.windows(2) {
        check_len(pair[0].output_dim(), pair[1].input_dim())?;
    }
    Ok(())
}

/// ReLU network: affine maps with ReLU between them and none after the last.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    layers: Vec<DenseLayer>,
}

impl MlpParams {
    pub fn new(layers: Vec<DenseLayer>) -> Result<Self> {
        check_chain(&layers)?;
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [DenseLayer] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().output_dim()
    }
}

pub fn mlp_forward(p: &MlpParams, x: &[f64]) -> Result<Vec<f64>> {
    check_len(p.input_dim(), x.len())?;
    let last = p.layers.len() - 1;
    let mut h = x.to_vec();
    for (i, layer) in p.layers.iter().enumerate() {
        h = layer.apply(&h);
        if i < last {
            relu_in_place(&mut h);
        }
    }
    Ok(h)
}

/// Hyperbolic network parameters: dense layers plus one hyperbolic bias per
/// layer output and an entry bias on `H^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct HnnParams {
    c0: HPoint,
    layers: Vec<DenseLayer>,
    biases: Vec<HPoint>,
}

impl HnnParams {
    pub fn new(c0: HPoint, layers: Vec<DenseLayer>, biases: Vec<HPoint>) -> Result<Self> {
        check_chain(&layers)?;
        check_len(layers.len(), biases.len())?;
        check_len(c0.dim(), layers[0].input_dim())?;
        for (layer, c) in layers.iter().zip(&biases) {
            check_len(layer.output_dim(), c.dim())?;
        }
        Ok(Self { c0, layers, biases })
    }

    /// Wraps an MLP with every hyperbolic bias at the basepoint; the result
    /// computes `Exp_1 o lift o mlp`.
    pub fn from_mlp(mlp: MlpParams) -> Self {
        let c0 = hypgeom::basepoint(mlp.input_dim()).expect("positive input dimension");
        let biases = mlp
            .layers
            .iter()
            .map(|l| hypgeom::basepoint(l.output_dim()).expect("positive layer width"))
            .collect();
        Self {
            c0,
            layers: mlp.layers,
            biases,
        }
    }

    pub fn c0(&self) -> &HPoint {
        &self.c0
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    /// `biases()[i]` is the hyperbolic bias at the output of layer `i`.
    pub fn biases(&self) -> &[HPoint] {
        &self.biases
    }

    pub(crate) fn parts_mut(&mut self) -> (&mut HPoint, &mut [DenseLayer], &mut [HPoint]) {
        (&mut self.c0, &mut self.layers, &mut self.biases)
    }

    pub fn input_dim(&self) -> usize {
        self.c0.dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().output_dim()
    }

    /// The Euclidean part of the network as an MLP.
    pub fn mlp(&self) -> MlpParams {
        MlpParams {
            layers: self.layers.clone(),
        }
    }
}

/// Sends `v in R^m` to `T_c(H^m)` by lifting at the basepoint and
/// transporting to `c`.
pub(crate) fn push_to(c: &[f64], v: &[f64]) -> Vec<f64> {
    let mut lifted = v.to_vec();
    lifted.push(0.0);
    if is_unit(c) {
        return lifted;
    }
    kernel::transport(&unit(c.len()), c, &lifted)
}

/// Reads `u in T_a(H^m)` in basepoint coordinates.
pub(crate) fn pull_from(a: &[f64], u: &[f64]) -> Vec<f64> {
    let mut t = if is_unit(a) {
        u.to_vec()
    } else {
        kernel::transport(a, &unit(a.len()), u)
    };
    t.pop();
    t
}

/// Whether `c` is exactly the basepoint, where transport to and from the
/// basepoint is the identity.
pub(crate) fn is_unit(c: &[f64]) -> bool {
    let (last, rest) = c.split_last().expect("non-empty point");
    *last == 1.0 && rest.iter().all(|v| *v == 0.0)
}

pub(crate) fn unit(len: usize) -> Vec<f64> {
    let mut b = vec![0.0; len];
    b[len - 1] = 1.0;
    b
}

fn layer_step(
    a: &[f64],
    layer: &DenseLayer,
    c: &[f64],
    x: &[f64],
    activate: bool,
) -> Result<Vec<f64>> {
    let coords = pull_from(a, &kernel::log(a, x)?);
    let mut z = layer.apply(&coords);
    if activate {
        relu_in_place(&mut z);
    }
    let out = kernel::exp(c, &push_to(c, &z))?;
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("hyperbolic layer output".into()));
    }
    Ok(out)
}

/// Elementary hyperbolic layer `H^n -> H^m`:
/// `Exp_c(P_{1->c}(lift(ReLU(A drop(P_{a->1}(Log_a x)) + b))))`.
pub fn hyperbolic_layer(
    a: &HPoint,
    b: &[f64],
    c: &HPoint,
    weight: &Array2<f64>,
    x: &HPoint,
) -> Result<HPoint> {
    check_len(a.dim(), x.dim())?;
    check_len(weight.ncols(), a.dim())?;
    check_len(weight.nrows(), c.dim())?;
    let layer = DenseLayer::new(weight.clone(), Array1::from(b.to_vec()))?;
    let out = layer_step(a.coords(), &layer, c.coords(), x.coords(), true)?;
    Ok(HPoint::from_coords_unchecked(out))
}

pub fn hnn_forward(p: &HnnParams, x: &[f64]) -> Result<HPoint> {
    check_len(p.input_dim(), x.len())?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("network input".into()));
    }
    let c0 = p.c0.coords();
    let mut point = kernel::exp(c0, &push_to(c0, x))?;
    let mut prev = c0;
    let last = p.layers.len() - 1;
    for (i, (layer, c)) in p.layers.iter().zip(&p.biases).enumerate() {
        point = layer_step(prev, layer, c.coords(), &point, i < last)?;
        prev = c.coords();
    }
    Ok(HPoint::from_coords_unchecked(point))
}

/// Depth (number of affine layers), width (largest layer dimension,
/// input included) and number of non-zero trainable entries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ParamCount {
    pub depth: usize,
    pub width: usize,
    pub par: usize,
}

pub trait CountParams {
    fn par_count(&self) -> ParamCount;
}

fn shape_of(layers: &[DenseLayer]) -> (usize, usize) {
    let width = layers
        .iter()
        .map(DenseLayer::output_dim)
        .chain(std::iter::once(layers[0].input_dim()))
        .max()
        .unwrap_or(0);
    (layers.len(), width)
}

impl CountParams for MlpParams {
    fn par_count(&self) -> ParamCount {
        let (depth, width) = shape_of(&self.layers);
        let par = self.layers.iter().map(DenseLayer::nonzeros).sum();
        ParamCount { depth, width, par }
    }
}

impl CountParams for HnnParams {
    /// Shared hyperbolic biases are counted once.
    fn par_count(&self) -> ParamCount {
        let (depth, width) = shape_of(&self.layers);
        let par = nnz(self.c0.coords().iter())
            + self
                .layers
                .iter()
                .zip(&self.biases)
                .map(|(l, c)| l.nonzeros() + nnz(c.coords().iter()))
                .sum::<usize>();
        ParamCount { depth, width, par }
    }
}

pub fn par_count<P: CountParams>(p: &P) -> ParamCount {
    p.par_count()
}

/// Width bound `n(N-1) + max(d, 12)` of the reference memorization network.
pub fn reference_memorizer_width(n: usize, num_points: usize, d: usize) -> usize {
    n * num_points.saturating_sub(1) + d.max(12)
}
