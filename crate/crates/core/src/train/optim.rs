use super::{Gradient, OptimizerKind};
use crate::hypgeom::kernel;
use crate::networks::Network;

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPS: f64 = 1e-8;

/// Adam or plain gradient descent over the flattened parameter list.
///
/// Hyperbolic biases take the same update applied to their Riemannian
/// gradient in ambient coordinates and are then put back on the
/// hyperboloid.
#[derive(Debug, Clone)]
pub struct Optimizer {
    kind: OptimizerKind,
    lr: f64,
    step: i32,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

fn param_slices(net: &mut Network, hyperbolic: bool) -> (Vec<&mut [f64]>, usize) {
    match net {
        Network::Mlp(p) => {
            let v = p
                .layers_mut()
                .iter_mut()
                .flat_map(|l| [l.a.as_slice_mut().unwrap(), l.b.as_slice_mut().unwrap()])
                .collect();
            (v, 0)
        }
        Network::Hnn(p) => {
            let (c0, layers, biases) = p.parts_mut();
            let mut v: Vec<&mut [f64]> = layers
                .iter_mut()
                .flat_map(|l| [l.a.as_slice_mut().unwrap(), l.b.as_slice_mut().unwrap()])
                .collect();
            let mut k = 0;
            if hyperbolic {
                k = 1 + biases.len();
                v.push(c0.coords_mut());
                v.extend(biases.iter_mut().map(|c| c.coords_mut()));
            }
            (v, k)
        }
    }
}

fn grad_slices(g: &Gradient, hyperbolic: bool) -> Vec<&[f64]> {
    let mut v: Vec<&[f64]> = g
        .layers
        .iter()
        .flat_map(|l| [l.a.as_slice().unwrap(), l.b.as_slice().unwrap()])
        .collect();
    if hyperbolic && !g.c0.is_empty() {
        v.push(&g.c0);
        v.extend(g.biases.iter().map(Vec::as_slice));
    }
    v
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, lr: f64) -> Self {
        Self {
            kind,
            lr,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn step(&mut self, net: &mut Network, g: &Gradient, train_hyperbolic: bool) {
        let (params, n_hyp) = param_slices(net, train_hyperbolic);
        let grads = grad_slices(g, train_hyperbolic);
        debug_assert_eq!(params.len(), grads.len());
        if self.m.is_empty() {
            self.m = grads.iter().map(|s| vec![0.0; s.len()]).collect();
            self.v = self.m.clone();
        }
        self.step += 1;
        let bc1 = 1.0 - BETA1.powi(self.step);
        let bc2 = 1.0 - BETA2.powi(self.step);
        let first_hyp = params.len() - n_hyp;
        for (k, (p, gk)) in params.into_iter().zip(grads).enumerate() {
            match self.kind {
                OptimizerKind::Sgd => {
                    p.iter_mut().zip(gk).for_each(|(x, d)| *x -= self.lr * d);
                }
                OptimizerKind::Adam => {
                    let (m, v) = (&mut self.m[k], &mut self.v[k]);
                    for i in 0..p.len() {
                        m[i] = BETA1 * m[i] + (1.0 - BETA1) * gk[i];
                        v[i] = BETA2 * v[i] + (1.0 - BETA2) * gk[i] * gk[i];
                        let mhat = m[i] / bc1;
                        let vhat = v[i] / bc2;
                        p[i] -= self.lr * mhat / (vhat.sqrt() + EPS);
                    }
                }
            }
            if k >= first_hyp {
                kernel::reproject(p);
            }
        }
    }
}
