use std::io::Write;

use hyptree::embed::{choose_curvature, fit_exponent, geometric_tau_grid, hnn_realize, realized_report, study_row, study_tree, DistortionReport, StudyRow};
use hyptree::train::{format_float, TrainConfig};
use hyptree::trees::tree_metric;
use rayon::prelude::*;
use serde_json::json;

use super::write_manifest;
use crate::args::LowerboundArgs;
use crate::{Cli, CliError, CliResult};

pub const LOWERBOUND_HEADER: [&str; 10] = [
    "L", "d", "mlp_dist", "mlp_alpha", "mlp_beta", "hnn_dist", "hnn_alpha", "hnn_beta", "hnn_kappa", "status",
];

/// Label of the footer row carrying the fitted exponent in `mlp_dist`.
pub const EXPONENT_ROW: &str = "fitted_exponent";

#[derive(Debug, Clone, PartialEq)]
pub struct LowerboundRow {
    pub mlp: StudyRow,
    /// Distortion of the realized HNN and its curvature.
    pub hnn: Option<(DistortionReport, f64)>,
    pub status: String,
}

impl LowerboundRow {
    fn record(&self, d: usize) -> Vec<String> {
        let r = |v: Option<f64>| v.map_or(String::new(), format_float);
        let m = self.mlp.report;
        let h = self.hnn;
        vec![
            self.mlp.leaves.to_string(),
            d.to_string(),
            r(m.map(|m| m.dist)),
            r(m.map(|m| m.alpha)),
            r(m.map(|m| m.beta)),
            r(h.map(|h| h.0.dist)),
            r(h.map(|h| h.0.alpha)),
            r(h.map(|h| h.0.beta)),
            r(h.map(|h| h.1)),
            self.status.clone(),
        ]
    }
}

/// Trains the MLP rows and realizes the hyperbolic construction on the same
/// spider for one leaf count.
fn row(leaves: usize, a: &LowerboundArgs, cfg: &TrainConfig, grid: &[f64]) -> CliResult<LowerboundRow> {
    let mlp = study_row(leaves, a.dim, cfg, a.restarts)?;
    let mut status = Vec::new();
    if mlp.status != "ok" {
        status.push(format!("mlp {}", mlp.status));
    }
    let t = study_tree(leaves, cfg.seed)?;
    let hnn = match choose_curvature(&t, a.lambda, grid) {
        Ok((e, kappa, _)) => {
            let p = hnn_realize(&e, &t, cfg.seed)?;
            let report = realized_report(&p, kappa, &t, &tree_metric(&t))?;
            Some((report, kappa.kappa()))
        }
        Err(hyptree::Error::TargetUnreachable { best_dist, .. }) => {
            status.push(format!("hnn unreachable (best {best_dist})"));
            None
        }
        Err(e) => return Err(e.into()),
    };
    Ok(LowerboundRow {
        mlp,
        hnn,
        status: if status.is_empty() { "ok".into() } else { status.join("; ") },
    })
}

/// All rows (in the order of `a.leaves`) and the fitted MLP exponent.
pub fn run_study(a: &LowerboundArgs, seed: u64) -> CliResult<(Vec<LowerboundRow>, Option<f64>)> {
    if a.dim == 0 || a.restarts == 0 || a.leaves.is_empty() || a.leaves.contains(&0) {
        return Err(CliError::Usage("--dim, --restarts and --leaves must be positive".into()));
    }
    if !(a.lambda > 1.0) || !(a.tau_max >= 1.0) || a.tau_steps == 0 {
        return Err(CliError::Usage("need --lambda > 1, --tau-max >= 1 and --tau-steps >= 1".into()));
    }
    let cfg = TrainConfig {
        epochs: a.epochs,
        batch_size: a.batch_size,
        learning_rate: a.lr,
        seed,
        embed_dim: a.dim,
        ..TrainConfig::default()
    };
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let grid = geometric_tau_grid(1.0, a.tau_max, a.tau_steps);
    let rows: Vec<LowerboundRow> = a
        .leaves
        .par_iter()
        .map(|&l| row(l, a, &cfg, &grid))
        .collect::<CliResult<_>>()?;
    let study: Vec<StudyRow> = rows.iter().map(|r| r.mlp.clone()).collect();
    Ok((rows, fit_exponent(&study)))
}

pub fn run(cli: &Cli, a: &LowerboundArgs, pool: &rayon::ThreadPool, out: &mut dyn Write) -> CliResult<()> {
    let path = cli.out_dir.join("lowerbound.csv");
    let config = json!({
        "dim": a.dim,
        "leaves": a.leaves,
        "lambda": a.lambda,
        "restarts": a.restarts,
        "epochs": a.epochs,
        "batch_size": a.batch_size,
        "lr": a.lr,
        "tau_max": a.tau_max,
        "tau_steps": a.tau_steps,
    });
    write_manifest(&cli.out_dir, "lowerbound", "lowerbound", cli.seed, config, std::slice::from_ref(&path))?;
    let (rows, slope) = pool.install(|| run_study(a, cli.seed))?;
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(LOWERBOUND_HEADER)?;
    for r in &rows {
        w.write_record(r.record(a.dim))?;
        writeln!(
            out,
            "L={} mlp dist {} hnn dist {} ({})",
            r.mlp.leaves,
            r.mlp.dist(),
            r.hnn.map_or(f64::NAN, |h| h.0.dist),
            r.status
        )?;
    }
    let mut footer = vec![String::new(); LOWERBOUND_HEADER.len()];
    footer[0] = EXPONENT_ROW.into();
    footer[1] = a.dim.to_string();
    footer[2] = slope.map_or(String::new(), format_float);
    footer[9] = if slope.is_some() { "ok" } else { "insufficient rows" }.into();
    w.write_record(&footer)?;
    w.flush()?;
    writeln!(out, "fitted exponent {}", slope.map_or("none".into(), format_float))?;
    Ok(())
}
