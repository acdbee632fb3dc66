//! Batched forward and reverse passes for distance-supervised losses.
//!
//! A batch of pairs touches a set of distinct nodes. Those nodes are pushed
//! through the network once as the rows of a matrix; the dense parts use
//! matrix products and the hyperboloid maps run row by row on the slice
//! kernels. The pair losses then scatter gradients back onto the rows.

use ndarray::{Array1, Array2, ArrayView1, Axis};

use crate::error::{Error, Result};
use crate::hypgeom::kernel;
use crate::networks::{is_unit, pull_from, push_to, unit, DenseLayer, HnnParams, MlpParams, Network};

const BN_EPS: f64 = 1e-5;

/// Gradient shaped like the network parameters. `c0` and `biases` hold
/// Riemannian gradients of the hyperbolic biases and are empty for MLPs.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub layers: Vec<DenseLayer>,
    pub c0: Vec<f64>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradient {
    pub fn max_abs(&self) -> f64 {
        self.layers
            .iter()
            .flat_map(|l| l.a.iter().chain(l.b.iter()))
            .chain(self.c0.iter())
            .chain(self.biases.iter().flatten())
            .fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Batch-norm state of one hidden layer: normalized activations and the
/// reciprocal standard deviation per unit.
struct BnCache {
    xhat: Array2<f64>,
    inv_std: Array1<f64>,
}

struct LayerCache {
    /// Euclidean input to the affine map.
    input: Array2<f64>,
    /// Pre-activation after optional normalization.
    pre: Array2<f64>,
    bn: Option<BnCache>,
    /// Output activation (equal to `pre` on the last layer).
    out: Array2<f64>,
    /// HNN only: the tangent vectors at the previous bias fed to the
    /// transport back to the basepoint.
    logs: Option<Array2<f64>>,
    /// HNN only: tangent vectors at this layer's bias fed to `Exp`.
    tangents: Option<Array2<f64>>,
}

pub(crate) struct Tape {
    layers: Vec<LayerCache>,
    /// HNN only: lifted input and the entry point tangent at `c0`.
    entry: Option<(Array2<f64>, Array2<f64>)>,
    /// Points on the hyperboloid before each layer (HNN only).
    points: Vec<Array2<f64>>,
    pub(crate) output: Array2<f64>,
    /// Euclidean output of the last dense layer. For an HNN the outputs are
    /// the images of these vectors under one fixed isometry, so pair
    /// distances only depend on this chart.
    pub(crate) chart: Array2<f64>,
}

fn batch_norm(z: &Array2<f64>) -> BnCache {
    let rows = z.nrows() as f64;
    let mean = z.sum_axis(Axis(0)) / rows;
    let centered = z - &mean;
    let var = centered.mapv(|v| v * v).sum_axis(Axis(0)) / rows;
    let inv_std = var.mapv(|v| 1.0 / (v + BN_EPS).sqrt());
    let xhat = centered * &inv_std;
    BnCache { xhat, inv_std }
}

fn batch_norm_backward(cache: &BnCache, grad: &Array2<f64>) -> Array2<f64> {
    let rows = grad.nrows() as f64;
    let mean_g = grad.sum_axis(Axis(0)) / rows;
    let mean_gx = (grad * &cache.xhat).sum_axis(Axis(0)) / rows;
    let mut out = grad - &mean_g;
    out -= &(&cache.xhat * &mean_gx);
    out * &cache.inv_std
}

fn affine(layer: &DenseLayer, input: &Array2<f64>) -> Array2<f64> {
    input.dot(&layer.a.t()) + &layer.b
}

fn activate(z: Array2<f64>, hidden: bool, bn: bool) -> (Array2<f64>, Option<BnCache>, Array2<f64>) {
    if !hidden {
        return (z.clone(), None, z);
    }
    if bn && z.nrows() > 1 {
        let cache = batch_norm(&z);
        let pre = cache.xhat.clone();
        let out = pre.mapv(|v| v.max(0.0));
        (pre, Some(cache), out)
    } else {
        let out = z.mapv(|v| v.max(0.0));
        (z, None, out)
    }
}

fn rows_map(
    m: &Array2<f64>,
    width: usize,
    mut f: impl FnMut(usize, &[f64]) -> Result<Vec<f64>>,
) -> Result<Array2<f64>> {
    let mut out = Array2::zeros((m.nrows(), width));
    for (i, row) in m.outer_iter().enumerate() {
        let v = f(i, row.as_slice().expect("standard layout"))?;
        out.row_mut(i).assign(&Array1::from(v));
    }
    Ok(out)
}

fn mlp_forward_batch(p: &MlpParams, x: &Array2<f64>, bn: bool) -> Tape {
    let last = p.layers().len() - 1;
    let mut h = x.clone();
    let mut layers = Vec::with_capacity(last + 1);
    for (i, layer) in p.layers().iter().enumerate() {
        let z = affine(layer, &h);
        let (pre, bn_cache, out) = activate(z, i < last, bn);
        let input = std::mem::replace(&mut h, out.clone());
        layers.push(LayerCache {
            input,
            pre,
            bn: bn_cache,
            out,
            logs: None,
            tangents: None,
        });
    }
    Tape {
        layers,
        entry: None,
        points: Vec::new(),
        chart: h.clone(),
        output: h,
    }
}

fn hnn_forward_batch(p: &HnnParams, x: &Array2<f64>, bn: bool) -> Result<Tape> {
    let c0 = p.c0().coords();
    let n = c0.len();
    let lifted = rows_map(x, n, |_, r| {
        let mut v = r.to_vec();
        v.push(0.0);
        Ok(v)
    })?;
    let v0 = rows_map(x, n, |_, r| Ok(push_to(c0, r)))?;
    let mut point = rows_map(&v0, n, |_, v| kernel::exp(c0, v))?;
    let mut points = Vec::with_capacity(p.layers().len() + 1);
    let mut layers = Vec::with_capacity(p.layers().len());
    let last = p.layers().len() - 1;
    let mut prev = c0;
    for (i, (layer, c)) in p.layers().iter().zip(p.biases()).enumerate() {
        let c = c.coords();
        let logs = rows_map(&point, prev.len(), |_, y| kernel::log(prev, y))?;
        let input = rows_map(&logs, prev.len() - 1, |_, u| Ok(pull_from(prev, u)))?;
        let z = affine(layer, &input);
        let (pre, bn_cache, out) = activate(z, i < last, bn);
        let tangents = rows_map(&out, c.len(), |_, h| Ok(push_to(c, h)))?;
        let next = rows_map(&tangents, c.len(), |_, v| kernel::exp(c, v))?;
        points.push(std::mem::replace(&mut point, next));
        layers.push(LayerCache {
            input,
            pre,
            bn: bn_cache,
            out,
            logs: Some(logs),
            tangents: Some(tangents),
        });
        prev = c;
    }
    if point.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("network output".into()));
    }
    points.push(point.clone());
    let chart = layers.last().map(|l: &LayerCache| l.out.clone()).unwrap();
    Ok(Tape {
        chart,
        layers,
        entry: Some((lifted, v0)),
        points,
        output: point,
    })
}

pub(crate) fn forward_batch(net: &Network, x: &Array2<f64>, bn: bool) -> Result<Tape> {
    let tape = match net {
        Network::Mlp(p) => mlp_forward_batch(p, x, bn),
        Network::Hnn(p) => hnn_forward_batch(p, x, bn)?,
    };
    if tape.output.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("network output".into()));
    }
    Ok(tape)
}

/// Reverse pass through the dense part of layer `l`, given the gradient on
/// its output activation. Returns the gradient on its Euclidean input.
fn dense_backward(
    layer: &DenseLayer,
    cache: &LayerCache,
    hidden: bool,
    grad_out: Array2<f64>,
    slot: &mut DenseLayer,
) -> Array2<f64> {
    let mut dz = grad_out;
    if hidden {
        dz.zip_mut_with(&cache.pre, |g, z| {
            if *z <= 0.0 {
                *g = 0.0;
            }
        });
        if let Some(bn) = &cache.bn {
            dz = batch_norm_backward(bn, &dz);
        }
    }
    slot.a = dz.t().dot(&cache.input);
    slot.b = dz.sum_axis(Axis(0));
    dz.dot(&layer.a)
}

fn zero_grad(net: &Network) -> Gradient {
    let layers = |ls: &[DenseLayer]| {
        ls.iter()
            .map(|l| DenseLayer::zeros(l.output_dim(), l.input_dim()))
            .collect::<Vec<_>>()
    };
    match net {
        Network::Mlp(p) => Gradient {
            layers: layers(p.layers()),
            c0: Vec::new(),
            biases: Vec::new(),
        },
        Network::Hnn(p) => Gradient {
            layers: layers(p.layers()),
            c0: vec![0.0; p.c0().coords().len()],
            biases: p.biases().iter().map(|c| vec![0.0; c.coords().len()]).collect(),
        },
    }
}

fn add_into(acc: &mut [f64], v: &[f64]) {
    acc.iter_mut().zip(v).for_each(|(a, b)| *a += b);
}

/// Reverse pass from a gradient on [`Tape::chart`]. The last hyperbolic
/// bias of an HNN gets a zero gradient since distances between outputs do
/// not depend on it.
///
/// With `bias_grads` false the hyperbolic bias gradients are left at zero
/// and the work that only feeds them is skipped.
pub(crate) fn backward(net: &Network, tape: &Tape, grad_chart: Array2<f64>, bias_grads: bool) -> Gradient {
    let mut g = zero_grad(net);
    match net {
        Network::Mlp(p) => {
            let last = p.layers().len() - 1;
            let mut grad = grad_chart;
            for l in (0..=last).rev() {
                grad = dense_backward(&p.layers()[l], &tape.layers[l], l < last, grad, &mut g.layers[l]);
            }
        }
        Network::Hnn(p) => {
            let last = p.layers().len() - 1;
            // Ambient (unprojected) gradients on c0, c1, ..
            let mut cbar: Vec<Vec<f64>> = std::iter::once(vec![0.0; p.c0().coords().len()])
                .chain(p.biases().iter().map(|c| vec![0.0; c.coords().len()]))
                .collect();
            let mut dpoint = Array2::zeros((0, 0));
            for l in (0..=last).rev() {
                let c = p.biases()[l].coords();
                let prev = if l == 0 { p.c0().coords() } else { p.biases()[l - 1].coords() };
                let cache = &tape.layers[l];
                let tangents = cache.tangents.as_ref().unwrap();
                let logs = cache.logs.as_ref().unwrap();
                let m = c.len() - 1;
                let base_c = unit(c.len());
                let base_prev = unit(prev.len());
                let rows = if l == last { 0 } else { dpoint.nrows() };
                let mut dout = if l == last { grad_chart.clone() } else { Array2::zeros((rows, m)) };
                let c_unit = !bias_grads && is_unit(c);
                let prev_unit = !bias_grads && is_unit(prev);
                for r in 0..rows {
                    let v = tangents.row(r);
                    let v = v.as_slice().unwrap();
                    let (xb, vb) = kernel::exp_vjp(c, v, dpoint.row(r).as_slice().unwrap());
                    if c_unit {
                        dout.row_mut(r).assign(&ArrayView1::from(&vb[..m]));
                        continue;
                    }
                    add_into(&mut cbar[l + 1], &xb);
                    let mut h = cache.out.row(r).to_vec();
                    h.push(0.0);
                    let (_, bb, ub) = kernel::transport_vjp(&base_c, c, &h, &vb);
                    add_into(&mut cbar[l + 1], &bb);
                    dout.row_mut(r).assign(&ArrayView1::from(&ub[..m]));
                }
                let din = dense_backward(&p.layers()[l], cache, l < last, dout, &mut g.layers[l]);
                if l == 0 && !bias_grads {
                    return g;
                }
                let mut dprev = Array2::zeros((din.nrows(), prev.len()));
                for r in 0..din.nrows() {
                    let mut gin = din.row(r).to_vec();
                    gin.push(0.0);
                    let ub = if prev_unit {
                        gin
                    } else {
                        let u = logs.row(r);
                        let (xb, _, ub) = kernel::transport_vjp(prev, &base_prev, u.as_slice().unwrap(), &gin);
                        add_into(&mut cbar[l], &xb);
                        ub
                    };
                    let y = tape.points[l].row(r);
                    let (ab, yb) = kernel::log_vjp(prev, y.as_slice().unwrap(), &ub);
                    if !prev_unit {
                        add_into(&mut cbar[l], &ab);
                    }
                    dprev.row_mut(r).assign(&Array1::from(yb));
                }
                dpoint = dprev;
            }
            let c0 = p.c0().coords();
            let base = unit(c0.len());
            let (lifted, v0) = tape.entry.as_ref().unwrap();
            for r in 0..dpoint.nrows() {
                let (xb, vb) = kernel::exp_vjp(c0, v0.row(r).as_slice().unwrap(), dpoint.row(r).as_slice().unwrap());
                add_into(&mut cbar[0], &xb);
                let (_, bb, _) = kernel::transport_vjp(&base, c0, lifted.row(r).as_slice().unwrap(), &vb);
                add_into(&mut cbar[0], &bb);
            }
            g.c0 = kernel::riemannian_grad(c0, &cbar[0]);
            for (i, c) in p.biases().iter().enumerate() {
                g.biases[i] = kernel::riemannian_grad(c.coords(), &cbar[i + 1]);
            }
        }
    }
    g
}

/// Distance between two chart rows and its gradient with respect to each.
pub(crate) fn pair_distance(net: &Network, a: &[f64], b: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
    match net {
        Network::Mlp(_) => {
            let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
            let d = diff.iter().map(|v| v * v).sum::<f64>().sqrt();
            if d == 0.0 {
                return (0.0, vec![0.0; a.len()], vec![0.0; b.len()]);
            }
            let ga: Vec<f64> = diff.iter().map(|v| v / d).collect();
            let gb = ga.iter().map(|v| -v).collect();
            (d, ga, gb)
        }
        Network::Hnn(_) => {
            let d = kernel::chart_dist(a, b);
            let (ga, gb) = kernel::chart_dist_grad(a, b, d);
            (d, ga, gb)
        }
    }
}
