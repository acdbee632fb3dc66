//! Tree embeddings into the hyperbolic plane and distortion measurement.
//!
//! `sarkar_embed` places a tree in `H^2` so that every edge becomes a
//! geodesic segment of length `tau * w`. Each node carries an orthonormal
//! tangent frame whose first vector points away from its parent; the
//! children of a degree-`k` node leave at angles `pi + 2 pi j / k` from that
//! vector, so the parent direction and the child directions split the full
//! angle evenly. Large `tau` pushes branches apart, and under the curvature
//! `-tau^2` distances shrink back to tree units.
//!
//! Frames are carried along each edge by the closed-form transport of the
//! geodesic velocity; the perpendicular vector is unchanged. No Minkowski
//! products are taken, since far from the basepoint they cancel badly.

mod study;

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypgeom::{self, kernel, Curvature, HPoint};
use crate::networks::{self, HnnParams};
use crate::trees::{TreeMetric, WeightedTree};

pub use study::{fit_exponent, mlp_distortion_study, study_row, study_tree, StudyRow};

/// Default scale grid `1, 2, 4, .., 256`.
pub fn default_tau_grid() -> Vec<f64> {
    (0..=8).map(|k| f64::from(1u32 << k)).collect()
}

/// Geometric grid from `lo` to `hi` with `steps_per_doubling` points per
/// factor of two.
pub fn geometric_tau_grid(lo: f64, hi: f64, steps_per_doubling: u32) -> Vec<f64> {
    let ratio = 2f64.powf(1.0 / f64::from(steps_per_doubling.max(1)));
    let mut grid = Vec::new();
    let mut k = 0;
    loop {
        let tau = lo * ratio.powi(k);
        if tau > hi * (1.0 + 1e-12) {
            break;
        }
        grid.push(tau);
        k += 1;
    }
    grid
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistortionReport {
    /// Smallest ratio `d_space / d_tree` over distinct pairs.
    pub alpha: f64,
    /// Largest ratio.
    pub beta: f64,
    /// `beta / alpha`, or infinity when two nodes share an image.
    pub dist: f64,
    pub injective: bool,
}

impl DistortionReport {
    /// `d_tree / lambda <= d_space <= lambda d_tree` on every pair.
    pub fn within(&self, lambda: f64) -> bool {
        self.injective && self.alpha * lambda >= 1.0 && self.beta <= lambda
    }
}

/// Distortion of `points[i]` (the image of tree node `i`) with respect to
/// `metric`, measuring image distances with `d_space`.
pub fn distortion<P>(
    points: &[P],
    metric: &TreeMetric,
    d_space: impl Fn(&P, &P) -> f64,
) -> DistortionReport {
    let n = points.len().min(metric.len());
    let mut alpha = f64::INFINITY;
    let mut beta = 0.0f64;
    let mut injective = true;
    for i in 0..n {
        for j in i + 1..n {
            let ds = d_space(&points[i], &points[j]);
            if !(ds > 0.0) {
                injective = false;
            }
            let ratio = ds / metric.get(i, j);
            alpha = alpha.min(ratio);
            beta = beta.max(ratio);
        }
    }
    if n < 2 {
        return DistortionReport {
            alpha: 1.0,
            beta: 1.0,
            dist: 1.0,
            injective: true,
        };
    }
    let dist = if injective { beta / alpha } else { f64::INFINITY };
    DistortionReport {
        alpha,
        beta,
        dist,
        injective,
    }
}

/// Points of a tree in `H^d`, listed in tree node order, and the curvature
/// under which their distances are read.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperbolicEmbedding {
    pub ids: Vec<i64>,
    pub points: Vec<HPoint>,
    pub kappa: Curvature,
    /// Construction scale; `kappa = -tau^2`.
    pub tau: f64,
}

#[derive(Serialize, Deserialize)]
struct EmbeddingFile {
    kappa: f64,
    points: BTreeMap<i64, HPoint>,
}

impl HyperbolicEmbedding {
    pub fn dim(&self) -> usize {
        self.points.first().map_or(0, HPoint::dim)
    }

    pub fn point(&self, id: i64) -> Option<&HPoint> {
        self.ids.iter().position(|&v| v == id).map(|i| &self.points[i])
    }

    /// Same embedding with zero-padded points in `H^dim`.
    pub fn pad_to(&self, dim: usize) -> Result<Self> {
        let points = self.points.iter().map(|p| p.pad_to(dim)).collect::<Result<_>>()?;
        Ok(Self {
            points,
            ..self.clone()
        })
    }

    /// Distortion under `d_kappa` against `metric`.
    pub fn report(&self, metric: &TreeMetric) -> DistortionReport {
        let scale = self.kappa.sqrt_abs();
        distortion(&self.points, metric, |a, b| {
            kernel::dist(a.coords(), b.coords()) / scale
        })
    }

    pub fn to_json(&self) -> Result<String> {
        let file = EmbeddingFile {
            kappa: self.kappa.kappa(),
            points: self.ids.iter().copied().zip(self.points.iter().cloned()).collect(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let file: EmbeddingFile = serde_json::from_str(s)?;
        let kappa = Curvature::new(file.kappa)?;
        let (ids, points): (Vec<_>, Vec<_>) = file.points.into_iter().unzip();
        let points: Vec<HPoint> = points;
        if let Some(first) = points.first() {
            for p in &points {
                crate::error::check_len(first.dim(), p.dim())?;
            }
        }
        Ok(Self {
            ids,
            points,
            kappa,
            tau: kappa.sqrt_abs(),
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

fn rotate(e1: &[f64], e2: &[f64], phi: f64) -> (Vec<f64>, Vec<f64>) {
    let (s, c) = phi.sin_cos();
    let dir = e1.iter().zip(e2).map(|(a, b)| c * a + s * b).collect();
    let perp = e1.iter().zip(e2).map(|(a, b)| -s * a + c * b).collect();
    (dir, perp)
}

/// Embeds `t` into `H^2` at scale `tau` (curvature `-tau^2`), rooted at a
/// centroid placed on the basepoint.
pub fn sarkar_embed(t: &WeightedTree, tau: f64) -> Result<HyperbolicEmbedding> {
    let kappa = Curvature::from_scale(tau)?;
    let n = t.len();
    let root = t.centroid();
    let (order, parent) = t.dfs_order(root);

    let mut points: Vec<Option<HPoint>> = vec![None; n];
    let mut frames: Vec<(Vec<f64>, Vec<f64>)> = vec![(Vec::new(), Vec::new()); n];
    points[root] = Some(hypgeom::basepoint(2)?);
    frames[root] = (vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]);

    for &v in &order {
        let x = points[v].clone().expect("parents are placed before children");
        let (e1, e2) = frames[v].clone();
        let deg = t.node_degree(v) as f64;
        let children = t.neighbors(v).iter().filter(|(c, _)| Some(*c) != parent[v]);
        for (k, &(c, w)) in children.enumerate() {
            let phi = if parent[v].is_some() {
                std::f64::consts::PI * (1.0 + 2.0 * (k + 1) as f64 / deg)
            } else {
                2.0 * std::f64::consts::PI * k as f64 / deg
            };
            let step = tau * w;
            if step > kernel::MAX_HYPERBOLIC_ARG {
                return Err(Error::Overflow(step));
            }
            let (dir, perp) = rotate(&e1, &e2, phi);
            let (y, velocity) = hypgeom::geodesic_step(&x, &dir, step)?;
            frames[c] = (velocity, perp);
            points[c] = Some(y);
        }
    }

    let points = points
        .into_iter()
        .map(|p| p.expect("tree is connected"))
        .collect();
    Ok(HyperbolicEmbedding {
        ids: t.ids(),
        points,
        kappa,
        tau,
    })
}

/// Scans `tau_grid` in ascending order and returns the first Sarkar
/// embedding whose distances under `kappa = -tau^2` lie within a factor
/// `lambda` of the tree distances on every pair.
pub fn choose_curvature(
    t: &WeightedTree,
    lambda: f64,
    tau_grid: &[f64],
) -> Result<(HyperbolicEmbedding, Curvature, DistortionReport)> {
    if !(lambda > 1.0) || !lambda.is_finite() {
        return Err(Error::InvalidArgument(format!("lambda must exceed 1, got {lambda}")));
    }
    let mut grid = tau_grid.to_vec();
    grid.sort_by(f64::total_cmp);
    let metric = crate::trees::tree_metric(t);
    let mut best = f64::INFINITY;
    for tau in grid {
        let e = match sarkar_embed(t, tau) {
            Ok(e) => e,
            Err(Error::Overflow(_)) => break,
            Err(err) => return Err(err),
        };
        let report = e.report(&metric);
        if report.within(lambda) {
            let kappa = e.kappa;
            return Ok((e, kappa, report));
        }
        best = best.min(report.dist);
    }
    Err(Error::TargetUnreachable {
        lambda,
        best_dist: best,
    })
}

/// HNN taking each node's layout coordinates to its embedded point.
pub fn hnn_realize(e: &HyperbolicEmbedding, t: &WeightedTree, seed: u64) -> Result<HnnParams> {
    if !t.has_layout() {
        return Err(Error::InvalidArgument("tree has no layout coordinates".into()));
    }
    if e.ids != t.ids() {
        return Err(Error::InvalidArgument("embedding and tree list different nodes".into()));
    }
    let inputs: Vec<Vec<f64>> = (0..t.len()).map(|i| t.coords(i).to_vec()).collect();
    networks::memorize_hnn(&inputs, &e.points, seed)
}

/// Largest unit-curvature distance between the network output at a node's
/// coordinates and that node's embedded point.
pub fn realization_error(p: &HnnParams, e: &HyperbolicEmbedding, t: &WeightedTree) -> Result<f64> {
    let mut worst = 0.0f64;
    for (i, target) in e.points.iter().enumerate() {
        let out = networks::hnn_forward(p, t.coords(i))?;
        worst = worst.max(kernel::dist(out.coords(), target.coords()));
    }
    Ok(worst)
}

/// Distortion under `d_kappa` of the embedding the network induces on the
/// tree's layout coordinates.
pub fn realized_report(
    p: &HnnParams,
    kappa: Curvature,
    t: &WeightedTree,
    metric: &TreeMetric,
) -> Result<DistortionReport> {
    let outputs = (0..t.len())
        .map(|i| networks::hnn_forward(p, t.coords(i)))
        .collect::<Result<Vec<_>>>()?;
    let scale = kappa.sqrt_abs();
    Ok(distortion(&outputs, metric, |a, b| {
        kernel::dist(a.coords(), b.coords()) / scale
    }))
}
