//! Fruchterman–Reingold spring layout.
//!
//! Edges pull their endpoints together with force `w d^2 / k`, every pair of
//! nodes repels with force `k^2 / d`, and each node moves at most the current
//! temperature per iteration. The temperature decays linearly from `0.1`
//! (a tenth of the unit initialization square) to zero, `k = sqrt(1/n)`, and
//! the final layout is centred and scaled into `[-1, 1]^dim`.

use rand::Rng;

use super::WeightedTree;
use crate::error::{Error, Result};
use crate::seed;

const MIN_SEPARATION: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayoutParams {
    pub dim: usize,
    pub iterations: usize,
}

impl Default for LayoutParams {
    fn default() -> Self {
        Self {
            dim: 2,
            iterations: 50,
        }
    }
}

/// Lays out `t` from the `layout` stream of `seed`, stores the coordinates
/// on the tree and returns them.
pub fn spring_layout(t: &mut WeightedTree, params: &LayoutParams, seed: u64) -> Result<Vec<Vec<f64>>> {
    if params.dim == 0 || params.iterations == 0 {
        return Err(Error::InvalidArgument(
            "layout needs a positive dimension and iteration count".into(),
        ));
    }
    let n = t.len();
    let dim = params.dim;
    let mut rng = seed::stream_rng(seed, seed::LAYOUT);
    let mut pos: Vec<f64> = (0..n * dim).map(|_| rng.random::<f64>()).collect();

    let k = (1.0 / n as f64).sqrt();
    let t0 = 0.1;
    let mut disp = vec![0.0; n * dim];
    let mut delta = vec![0.0; dim];
    for it in 0..params.iterations {
        let temp = t0 * (1.0 - it as f64 / params.iterations as f64);
        disp.iter_mut().for_each(|d| *d = 0.0);
        for i in 0..n {
            for j in i + 1..n {
                let mut sq = 0.0;
                for a in 0..dim {
                    delta[a] = pos[i * dim + a] - pos[j * dim + a];
                    sq += delta[a] * delta[a];
                }
                let d = sq.sqrt().max(MIN_SEPARATION);
                let f = k * k / (d * d);
                for a in 0..dim {
                    disp[i * dim + a] += delta[a] * f;
                    disp[j * dim + a] -= delta[a] * f;
                }
            }
        }
        for e in t.edges() {
            let (i, j) = (t.index_of(e.u).unwrap(), t.index_of(e.v).unwrap());
            let mut sq = 0.0;
            for a in 0..dim {
                delta[a] = pos[i * dim + a] - pos[j * dim + a];
                sq += delta[a] * delta[a];
            }
            let d = sq.sqrt().max(MIN_SEPARATION);
            let f = e.w * d / k;
            for a in 0..dim {
                disp[i * dim + a] -= delta[a] * f;
                disp[j * dim + a] += delta[a] * f;
            }
        }
        for i in 0..n {
            let row = &mut disp[i * dim..(i + 1) * dim];
            let len = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            if len > 0.0 {
                let step = len.min(temp) / len;
                for a in 0..dim {
                    pos[i * dim + a] += row[a] * step;
                }
            }
        }
    }

    rescale(&mut pos, n, dim);
    let coords: Vec<Vec<f64>> = pos.chunks(dim).map(<[f64]>::to_vec).collect();
    t.set_coords(coords.clone())?;
    Ok(coords)
}

fn rescale(pos: &mut [f64], n: usize, dim: usize) {
    for a in 0..dim {
        let mean = (0..n).map(|i| pos[i * dim + a]).sum::<f64>() / n as f64;
        for i in 0..n {
            pos[i * dim + a] -= mean;
        }
    }
    let lim = pos.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if lim > 0.0 {
        pos.iter_mut().for_each(|v| *v /= lim);
    }
}
