//! Exact interpolation of finitely many labelled points by a ReLU network
//! with two hidden layers.
//!
//! The points are projected onto a random direction on which they are
//! pairwise distinct. Along that line each point gets a piecewise-linear
//! bump `ReLU(1 - |t - t_k| / h)` that is close to 1 at its own knot and
//! exactly 0 at every other knot, so the output at a data point is its
//! target times a single factor close to 1. Targets far from the origin
//! therefore keep their direction to within rounding of each coordinate.

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::StandardNormal;

use super::{DenseLayer, HnnParams, MlpParams};
use crate::error::{check_len, Error, Result};
use crate::hypgeom::{self, HPoint};
use crate::seed;

/// Memorizers use at most `C * N * (n + d)` non-zero parameters with this `C`.
pub const MEMORIZER_PARAM_CONSTANT: usize = 3;

const CANDIDATE_DIRECTIONS: usize = 16;
const MAX_ATTEMPTS: usize = 64;

fn check_inputs(points: &[Vec<f64>], target_dims: impl Iterator<Item = usize>) -> Result<usize> {
    let n = points
        .first()
        .map(Vec::len)
        .ok_or_else(|| Error::InvalidArgument("no points to memorize".into()))?;
    if n == 0 {
        return Err(Error::InvalidArgument("points must have positive dimension".into()));
    }
    for p in points {
        check_len(n, p.len())?;
        if p.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("memorization input".into()));
        }
    }
    let mut dims = target_dims;
    let d = dims.next().unwrap_or(0);
    if d == 0 {
        return Err(Error::InvalidArgument("targets must have positive dimension".into()));
    }
    for found in dims {
        check_len(d, found)?;
    }
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&i, &j| lex_cmp(&points[i], &points[j]));
    for w in order.windows(2) {
        if points[w[0]] == points[w[1]] {
            return Err(Error::DuplicatePoints(w[0].min(w[1]), w[0].max(w[1])));
        }
    }
    Ok(d)
}

fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(std::cmp::Ordering::Equal)
}

/// Picks the direction with the largest ratio of minimum gap to range among
/// random candidates and returns it scaled so the projections span `[.., ..+1]`.
fn separating_direction(points: &[Vec<f64>], n: usize, seed: u64) -> Result<Vec<f64>> {
    let mut rng = seed::stream_rng(seed, seed::MEMORIZE);
    let mut best: Option<(f64, Vec<f64>)> = None;
    for attempt in 1..=MAX_ATTEMPTS {
        let mut theta: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let norm = theta.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        theta.iter_mut().for_each(|v| *v /= norm);
        let mut t: Vec<f64> = points.iter().map(|p| project(&theta, p)).collect();
        t.sort_by(f64::total_cmp);
        let range = t[t.len() - 1] - t[0];
        let gap = t.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
        if range > 0.0 && gap > 0.0 {
            let quality = gap / range;
            if best.as_ref().is_none_or(|(q, _)| quality > *q) {
                theta.iter_mut().for_each(|v| *v /= range);
                best = Some((quality, theta));
            }
        }
        if best.is_some() && attempt >= CANDIDATE_DIRECTIONS {
            break;
        }
    }
    best.map(|(_, theta)| theta).ok_or(Error::NoSeparatingDirection(MAX_ATTEMPTS))
}

fn project(theta: &[f64], p: &[f64]) -> f64 {
    theta.iter().zip(p).fold(0.0, |acc, (a, b)| acc + a * b)
}

/// ReLU network with two hidden layers of `N` units that maps `points[i]` to
/// `targets[i]` up to rounding. A single point yields the constant network.
pub fn memorize_relu(points: &[Vec<f64>], targets: &[Vec<f64>], seed: u64) -> Result<MlpParams> {
    check_len(points.len(), targets.len())?;
    let d = check_inputs(points, targets.iter().map(Vec::len))?;
    if targets.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("memorization target".into()));
    }
    let n = points[0].len();
    let num = points.len();
    if num == 1 {
        let layer = DenseLayer {
            a: Array2::zeros((d, n)),
            b: Array1::from(targets[0].clone()),
        };
        return MlpParams::new(vec![layer]);
    }

    let theta = separating_direction(points, n, seed)?;
    let proj: Vec<f64> = points.iter().map(|p| project(&theta, p)).collect();
    let mut order: Vec<usize> = (0..num).collect();
    order.sort_by(|&i, &j| proj[i].total_cmp(&proj[j]));
    let knots: Vec<f64> = order.iter().map(|&i| proj[i]).collect();
    let gap = knots.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    if !(gap > 0.0) {
        return Err(Error::NoSeparatingDirection(MAX_ATTEMPTS));
    }
    let h = gap / 2.0;

    // Hinges v_k = ReLU(t - t_k); v_0 = t - t_0 on the data.
    let mut a1 = Array2::zeros((num, n));
    for mut row in a1.outer_iter_mut() {
        row.assign(&Array1::from(theta.clone()));
    }
    let b1 = Array1::from_iter(knots.iter().map(|k| -k));

    // Bumps 1 - |t - t_k| / h with |t - t_k| = 2 v_k - v_0 - (t_0 - t_k).
    let mut a2 = Array2::zeros((num, num));
    let mut b2 = Array1::zeros(num);
    for k in 0..num {
        a2[[k, k]] -= 2.0 / h;
        a2[[k, 0]] += 1.0 / h;
        b2[k] = 1.0 + (knots[0] - knots[k]) / h;
    }

    let mut a3 = Array2::zeros((d, num));
    for (k, &i) in order.iter().enumerate() {
        for c in 0..d {
            a3[[c, k]] = targets[i][c];
        }
    }

    MlpParams::new(vec![
        DenseLayer::new(a1, b1)?,
        DenseLayer::new(a2, b2)?,
        DenseLayer::new(a3, Array1::zeros(d))?,
    ])
}

/// HNN memorizer: an MLP fitted to `drop(Log_1(target))`, wrapped with all
/// hyperbolic biases at the basepoint.
pub fn memorize_hnn(points: &[Vec<f64>], targets: &[HPoint], seed: u64) -> Result<HnnParams> {
    check_len(points.len(), targets.len())?;
    let first = targets
        .first()
        .ok_or_else(|| Error::InvalidArgument("no points to memorize".into()))?;
    let origin = hypgeom::basepoint(first.dim())?;
    let coords = targets
        .iter()
        .map(|y| {
            check_len(first.dim(), y.dim())?;
            let v = hypgeom::log_map(&origin, y)?;
            hypgeom::unlift(&v)
        })
        .collect::<Result<Vec<_>>>()?;
    let mlp = memorize_relu(points, &coords, seed)?;
    Ok(HnnParams::from_mlp(mlp))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypgeom::{distance, exp_map, lift, Curvature};
    use crate::networks::{hnn_forward, mlp_forward, CountParams};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_points(num: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..num)
            .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect()
    }

    #[test]
    fn memorizes_fifty_points() {
        let x = random_points(50, 3, 1);
        let y = random_points(50, 2, 2);
        let p = memorize_relu(&x, &y, 0).unwrap();
        for (xi, yi) in x.iter().zip(&y) {
            let out = mlp_forward(&p, xi).unwrap();
            let err = out.iter().zip(yi).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(err <= 1e-9, "error {err}");
        }
        let pc = p.par_count();
        assert_eq!(pc.depth, 3);
        assert_eq!(pc.width, 50);
        assert!(pc.par <= MEMORIZER_PARAM_CONSTANT * 50 * (3 + 2));
    }

    #[test]
    fn single_point_is_constant() {
        let p = memorize_relu(&[vec![0.3, 0.4]], &[vec![5.0]], 0).unwrap();
        assert_eq!(p.layers().len(), 1);
        assert_eq!(mlp_forward(&p, &[0.3, 0.4]).unwrap(), vec![5.0]);
    }

    #[test]
    fn duplicates_are_rejected() {
        let x = vec![vec![1.0, 2.0], vec![0.0, 0.0], vec![1.0, 2.0]];
        let y = vec![vec![0.0]; 3];
        assert!(matches!(memorize_relu(&x, &y, 0), Err(Error::DuplicatePoints(0, 2))));
    }

    #[test]
    fn mismatched_lengths_are_rejected() {
        assert!(memorize_relu(&[vec![1.0], vec![2.0]], &[vec![0.0]], 0).is_err());
        assert!(memorize_relu(&[], &[], 0).is_err());
    }

    #[test]
    fn hnn_memorizes_fifty_points() {
        let x = random_points(50, 2, 3);
        let o = hypgeom::basepoint(3).unwrap();
        let y: Vec<HPoint> = random_points(50, 3, 4)
            .into_iter()
            .map(|v| exp_map(&o, &lift(&v).unwrap()).unwrap())
            .collect();
        let p = memorize_hnn(&x, &y, 5).unwrap();
        for (xi, yi) in x.iter().zip(&y) {
            let out = hnn_forward(&p, xi).unwrap();
            assert!(distance(&out, yi, Curvature::UNIT).unwrap() <= 1e-6);
        }
        assert!(p.par_count().par <= MEMORIZER_PARAM_CONSTANT * 50 * (2 + 3));
    }

    #[test]
    fn far_targets_on_one_ray_stay_on_it() {
        let x = random_points(40, 2, 8);
        let dir = [0.6, -0.8];
        let y: Vec<HPoint> = (0..40)
            .map(|i| {
                let r = 0.5 * i as f64;
                exp_map(&hypgeom::basepoint(2).unwrap(), &lift(&[r * dir[0], r * dir[1]]).unwrap()).unwrap()
            })
            .collect();
        let p = memorize_hnn(&x, &y, 1).unwrap();
        let out: Vec<HPoint> = x.iter().map(|xi| hnn_forward(&p, xi).unwrap()).collect();
        for i in 0..40 {
            assert!(distance(&out[i], &y[i], Curvature::UNIT).unwrap() <= 1e-6);
            for j in i + 1..40 {
                let d = distance(&out[i], &out[j], Curvature::UNIT).unwrap();
                let expect = distance(&y[i], &y[j], Curvature::UNIT).unwrap();
                assert!((d - expect).abs() <= 1e-6, "({i}, {j}): {d} vs {expect}");
            }
        }
    }

    #[test]
    fn memorizer_is_seed_deterministic() {
        let x = random_points(10, 2, 6);
        let y = random_points(10, 1, 7);
        assert_eq!(memorize_relu(&x, &y, 3).unwrap(), memorize_relu(&x, &y, 3).unwrap());
    }
}
