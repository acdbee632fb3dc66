use std::io::Write;

use hyptree::embed::DistortionReport;
use hyptree::train::{train_embedding, write_loss_csv, ModelKind};
use hyptree::trees::WeightedTree;
use serde::Serialize;

use super::{write_json, write_manifest};
use crate::args::TrainArgs;
use crate::config::train_config;
use crate::{Cli, CliError, CliResult};

#[derive(Debug, Serialize)]
struct TrainReport {
    manifest: String,
    model: ModelKind,
    embed_dim: usize,
    epochs: usize,
    train_mse: f64,
    test_mse: Option<f64>,
    #[serde(flatten)]
    report: DistortionReport,
}

pub fn run(cli: &Cli, a: &TrainArgs, out: &mut dyn Write) -> CliResult<()> {
    let cfg = train_config(&a.flags, cli.seed)?;
    let t = WeightedTree::read(&a.tree)?;
    if !t.has_layout() {
        return Err(CliError::Usage("tree has no layout coordinates".into()));
    }
    let stem = format!("train_{}_d{}", cfg.model_kind, cfg.embed_dim);
    let loss_path = cli.out_dir.join(format!("{stem}_loss.csv"));
    let report_path = cli.out_dir.join(format!("{stem}_report.json"));
    let model_path = cli.out_dir.join(format!("{stem}_model.json"));
    let mut config = serde_json::to_value(&cfg)?;
    config["tree"] = a.tree.to_string_lossy().into();
    let manifest = write_manifest(
        &cli.out_dir,
        &stem,
        "train",
        cli.seed,
        config,
        &[loss_path.clone(), report_path.clone(), model_path.clone()],
    )?;

    let outcome = train_embedding(&t, &cfg)?;
    write_loss_csv(&outcome.history, std::fs::File::create(&loss_path)?)?;
    outcome.network.write(&model_path, outcome.batch_norm)?;
    let last = outcome.final_loss().expect("at least one epoch");
    let test_mse = last.test_mse.is_finite().then_some(last.test_mse);
    writeln!(
        out,
        "{} dim {}: train_mse {} test_mse {} dist {}",
        cfg.model_kind,
        cfg.embed_dim,
        last.train_mse,
        last.test_mse,
        outcome.report.dist
    )?;
    write_json(
        &report_path,
        &TrainReport {
            manifest,
            model: cfg.model_kind,
            embed_dim: cfg.embed_dim,
            epochs: cfg.epochs,
            train_mse: last.train_mse,
            test_mse,
            report: outcome.report,
        },
    )
}
