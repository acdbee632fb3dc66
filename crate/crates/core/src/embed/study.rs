//! Distortion of trained MLP embedders on spiders with a growing number of
//! legs.

use serde::{Deserialize, Serialize};

use super::DistortionReport;
use crate::error::Result;
use crate::train::{train_embedding, ModelKind, TrainConfig};
use crate::trees::{spider, spring_layout, LayoutParams, WeightedTree};

/// Spider with `leaves` legs of length 2, laid out in the plane.
pub fn study_tree(leaves: usize, seed: u64) -> Result<WeightedTree> {
    let mut t = spider(leaves, 2);
    spring_layout(&mut t, &LayoutParams::default(), seed)?;
    Ok(t)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub leaves: usize,
    pub dim: usize,
    /// Best report over restarts; absent when every restart diverged.
    pub report: Option<DistortionReport>,
    pub status: String,
}

impl StudyRow {
    pub fn dist(&self) -> f64 {
        self.report.map_or(f64::INFINITY, |r| r.dist)
    }
}

/// Trains `restarts` MLPs (seeds `cfg.seed`, `cfg.seed + 1`, ..) into
/// `R^dim` on the `leaves`-leg spider and keeps the lowest distortion.
pub fn study_row(leaves: usize, dim: usize, cfg: &TrainConfig, restarts: usize) -> Result<StudyRow> {
    let t = study_tree(leaves, cfg.seed)?;
    let mut best: Option<DistortionReport> = None;
    let mut failure = None;
    for r in 0..restarts.max(1) as u64 {
        let run = TrainConfig {
            model_kind: ModelKind::Mlp,
            embed_dim: dim,
            seed: cfg.seed.wrapping_add(r),
            ..cfg.clone()
        };
        match train_embedding(&t, &run) {
            Ok(out) => {
                if best.is_none_or(|b| out.report.dist < b.dist) {
                    best = Some(out.report);
                }
            }
            Err(e) => failure = Some(e.to_string()),
        }
    }
    let status = match (&best, failure) {
        (Some(_), _) => "ok".to_string(),
        (None, Some(reason)) => format!("diverged: {reason}"),
        (None, None) => "diverged".to_string(),
    };
    Ok(StudyRow {
        leaves,
        dim,
        report: best,
        status,
    })
}

/// Least-squares slope of `ln dist` against `ln L` over rows with finite
/// distortion and more than `2^dim` leaves (all finite rows if fewer than
/// two qualify).
pub fn fit_exponent(rows: &[StudyRow]) -> Option<f64> {
    let finite: Vec<&StudyRow> = rows.iter().filter(|r| r.dist().is_finite()).collect();
    let above: Vec<&StudyRow> = finite
        .iter()
        .copied()
        .filter(|r| (r.leaves as f64) > 2f64.powi(r.dim as i32))
        .collect();
    let pts = if above.len() >= 2 { above } else { finite };
    if pts.len() < 2 {
        return None;
    }
    let xs: Vec<f64> = pts.iter().map(|r| (r.leaves as f64).ln()).collect();
    let ys: Vec<f64> = pts.iter().map(|r| r.dist().ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// One row per leaf count plus the fitted log-log exponent.
pub fn mlp_distortion_study(
    leaf_counts: &[usize],
    dim: usize,
    cfg: &TrainConfig,
    restarts: usize,
) -> Result<(Vec<StudyRow>, Option<f64>)> {
    let rows = leaf_counts
        .iter()
        .map(|&l| study_row(l, dim, cfg, restarts))
        .collect::<Result<Vec<_>>>()?;
    let slope = fit_exponent(&rows);
    Ok((rows, slope))
}
