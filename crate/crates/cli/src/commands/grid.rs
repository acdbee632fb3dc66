use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use hyptree::train::{format_float, train_embedding, write_loss_csv, ModelKind, TrainConfig};
use hyptree::trees::{LayoutParams, WeightedTree};
use rayon::prelude::*;

use super::write_manifest;
use crate::args::{GridArgs, TreeKind};
use crate::config::{laid_out_tree, ExperimentConfig, TreeSpec};
use crate::svg::Heatmap;
use crate::{Cli, CliError, CliResult};

pub const GRID_HEADER: [&str; 9] = [
    "kind", "n_nodes", "dim", "model", "seed", "train_mse", "test_mse", "dist", "status",
];

#[derive(Debug, Clone, PartialEq)]
pub struct GridRow {
    pub kind: TreeKind,
    pub n_nodes: usize,
    pub dim: usize,
    pub model: ModelKind,
    pub seed: u64,
    pub train_mse: f64,
    pub test_mse: f64,
    pub dist: f64,
    pub status: String,
}

impl GridRow {
    pub fn ok(&self) -> bool {
        self.status == "ok"
    }

    fn record(&self) -> Vec<String> {
        vec![
            self.kind.name().to_string(),
            self.n_nodes.to_string(),
            self.dim.to_string(),
            self.model.to_string(),
            self.seed.to_string(),
            format_float(self.train_mse),
            format_float(self.test_mse),
            format_float(self.dist),
            self.status.clone(),
        ]
    }
}

struct Job {
    tree: usize,
    kind: TreeKind,
    n_nodes: usize,
    dim: usize,
    model: ModelKind,
    seed: u64,
}

impl Job {
    fn run_file(&self) -> String {
        format!(
            "runs/{}_n{}_d{}_{}_s{}.csv",
            self.kind.name(),
            self.n_nodes,
            self.dim,
            self.model,
            self.seed
        )
    }
}

fn node_count(kind: TreeKind, spec: TreeSpec) -> usize {
    match (kind, spec) {
        (_, TreeSpec::Size(n)) => n,
        (TreeKind::Binary, TreeSpec::Depth(d)) => (1usize << (d + 1)) - 1,
        (_, TreeSpec::Depth(d)) => (3usize.pow(d + 1) - 1) / 2,
    }
}

/// Trees (kind, spec, seed) and rows of `cfg` in the order kind, size, dim,
/// model, seed.
fn plan(cfg: &ExperimentConfig) -> (Vec<(TreeKind, TreeSpec, u64)>, Vec<Job>) {
    let mut keys = Vec::new();
    let mut jobs = Vec::new();
    for &kind in &cfg.tree_kind {
        for spec in cfg.tree_specs() {
            let first = keys.len();
            keys.extend(cfg.seeds.iter().map(|&s| (kind, spec, s)));
            for &dim in &cfg.dims {
                for &model in &cfg.models {
                    for (k, &seed) in cfg.seeds.iter().enumerate() {
                        jobs.push(Job {
                            tree: first + k,
                            kind,
                            n_nodes: node_count(kind, spec),
                            dim,
                            model,
                            seed,
                        });
                    }
                }
            }
        }
    }
    (keys, jobs)
}

/// Runs every row of `cfg` on the current rayon pool and writes the aggregate
/// CSV, one loss CSV per row and optionally the heatmaps into `dir`. Rows are
/// returned in the deterministic enumeration order kind, size, dim, model,
/// seed.
pub fn run_grid(cfg: &ExperimentConfig, dir: &Path, svg: bool) -> CliResult<Vec<GridRow>> {
    let layout = LayoutParams {
        dim: 2,
        iterations: cfg.layout_iterations,
    };
    let (keys, jobs) = plan(cfg);
    let trees: Vec<WeightedTree> = keys
        .par_iter()
        .map(|&(kind, spec, seed)| laid_out_tree(kind, spec, seed, &layout))
        .collect::<CliResult<_>>()?;

    std::fs::create_dir_all(dir.join("runs"))?;
    let rows: Vec<GridRow> = jobs
        .par_iter()
        .map(|job| run_row(cfg, &trees[job.tree], job, dir))
        .collect::<CliResult<_>>()?;

    let mut w = csv::Writer::from_path(dir.join("grid.csv"))?;
    w.write_record(GRID_HEADER)?;
    for row in &rows {
        w.write_record(row.record())?;
    }
    w.flush()?;
    if svg {
        write_heatmaps(cfg, &rows, dir)?;
    }
    Ok(rows)
}

fn run_row(cfg: &ExperimentConfig, t: &WeightedTree, job: &Job, dir: &Path) -> CliResult<GridRow> {
    let train = TrainConfig {
        embed_dim: job.dim,
        model_kind: job.model,
        seed: job.seed,
        ..cfg.train.clone()
    };
    let mut row = GridRow {
        kind: job.kind,
        n_nodes: t.len(),
        dim: job.dim,
        model: job.model,
        seed: job.seed,
        train_mse: f64::NAN,
        test_mse: f64::NAN,
        dist: f64::NAN,
        status: "ok".into(),
    };
    debug_assert_eq!(row.n_nodes, job.n_nodes);
    let file = std::fs::File::create(dir.join(job.run_file()))?;
    match train_embedding(t, &train) {
        Ok(outcome) => {
            write_loss_csv(&outcome.history, file)?;
            let last = outcome.final_loss().expect("at least one epoch");
            row.train_mse = last.train_mse;
            row.test_mse = last.test_mse;
            row.dist = outcome.report.dist;
        }
        Err(e) => {
            write_loss_csv(&[], file)?;
            row.status = match e {
                hyptree::Error::Divergence { .. } => format!("diverged: {e}"),
                other => format!("error: {other}"),
            };
        }
    }
    Ok(row)
}

/// Mean test MSE of successful rows per (kind, n_nodes, dim, model).
pub fn cell_means(rows: &[GridRow]) -> BTreeMap<(TreeKind, usize, usize, ModelKind), f64> {
    let mut acc: BTreeMap<(TreeKind, usize, usize, ModelKind), (f64, usize)> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.ok() && r.test_mse.is_finite()) {
        let e = acc.entry((r.kind, r.n_nodes, r.dim, r.model)).or_insert((0.0, 0));
        e.0 += r.test_mse;
        e.1 += 1;
    }
    acc.into_iter().map(|(k, (s, c))| (k, s / c as f64)).collect()
}

fn write_heatmaps(cfg: &ExperimentConfig, rows: &[GridRow], dir: &Path) -> CliResult<()> {
    let means = cell_means(rows);
    let mut trees: Vec<(TreeKind, usize)> = rows.iter().map(|r| (r.kind, r.n_nodes)).collect();
    trees.dedup();
    let lo = means.values().cloned().fold(f64::INFINITY, f64::min);
    let hi = means.values().cloned().fold(f64::NEG_INFINITY, f64::max);
    for &model in &cfg.models {
        let h = Heatmap {
            title: format!("{model} mean test MSE"),
            row_labels: trees.iter().map(|(k, n)| format!("{} {n}", k.name())).collect(),
            col_labels: cfg.dims.iter().map(|d| format!("dim {d}")).collect(),
            values: trees
                .iter()
                .map(|&(k, n)| {
                    cfg.dims
                        .iter()
                        .map(|&d| means.get(&(k, n, d, model)).copied().unwrap_or(f64::NAN))
                        .collect()
                })
                .collect(),
        };
        let path = dir.join(format!("grid_{model}.svg"));
        std::fs::write(&path, h.render(lo, hi))?;
    }
    Ok(())
}

/// Planned output files of a grid, listed in its manifest.
fn planned_outputs(cfg: &ExperimentConfig, dir: &Path, svg: bool) -> Vec<PathBuf> {
    let mut v = vec![dir.join("grid.csv")];
    if svg {
        v.extend(cfg.models.iter().map(|m| dir.join(format!("grid_{m}.svg"))));
    }
    v.extend(plan(cfg).1.iter().map(|j| dir.join(j.run_file())));
    v
}

pub fn run(cli: &Cli, a: &GridArgs, pool: &rayon::ThreadPool, out: &mut dyn Write) -> CliResult<()> {
    let cfg = ExperimentConfig::read(&a.config)?;
    let dir = cfg.output_dir.clone().unwrap_or_else(|| cli.out_dir.clone());
    std::fs::create_dir_all(&dir)?;
    let config = serde_json::to_value(&cfg)?;
    write_manifest(&dir, "grid", "grid", cli.seed, config, &planned_outputs(&cfg, &dir, a.svg))?;
    let rows = pool.install(|| run_grid(&cfg, &dir, a.svg))?;

    let means = cell_means(&rows);
    let (mut cells, mut hnn_better) = (0, 0);
    for (&(kind, n, dim, model), &mlp) in &means {
        if model != ModelKind::Mlp {
            continue;
        }
        if let Some(&hnn) = means.get(&(kind, n, dim, ModelKind::Hnn)) {
            cells += 1;
            if hnn < mlp {
                hnn_better += 1;
            }
            writeln!(out, "{} n={n} dim={dim}: mlp {mlp:.4} hnn {hnn:.4}", kind.name())?;
        }
    }
    let ok = rows.iter().filter(|r| r.ok()).count();
    writeln!(out, "rows {} ok {ok}; hnn below mlp in {hnn_better}/{cells} cells", rows.len())?;
    if ok == 0 {
        return Err(CliError::Core(hyptree::Error::Divergence {
            epoch: 0,
            reason: "every grid row failed".into(),
        }));
    }
    Ok(())
}
