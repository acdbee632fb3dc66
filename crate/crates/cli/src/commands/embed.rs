use std::io::Write;

use hyptree::embed::{choose_curvature, default_tau_grid, hnn_realize, realization_error, realized_report, DistortionReport};
use hyptree::networks::{par_count, Network, ParamCount};
use hyptree::trees::{tree_metric, WeightedTree};
use serde::Serialize;
use serde_json::json;

use super::{output_path, write_json, write_manifest};
use crate::args::EmbedArgs;
use crate::manifest::display_path;
use crate::{Cli, CliError, CliResult};

#[derive(Debug, Serialize)]
struct HnnSummary {
    file: String,
    #[serde(flatten)]
    count: ParamCount,
    /// Largest unit-curvature distance between network outputs and the
    /// embedded points.
    realization_error: f64,
    realized: DistortionReport,
}

#[derive(Debug, Serialize)]
struct EmbedReport {
    manifest: String,
    kappa: f64,
    tau: f64,
    #[serde(flatten)]
    report: DistortionReport,
    hnn: Option<HnnSummary>,
}

pub fn run(cli: &Cli, a: &EmbedArgs, out: &mut dyn Write) -> CliResult<()> {
    if !(a.lambda > 1.0) || !a.lambda.is_finite() {
        return Err(CliError::Usage(format!("--lambda must exceed 1, got {}", a.lambda)));
    }
    let grid = a.tau_grid.clone().unwrap_or_else(default_tau_grid);
    if grid.is_empty() || grid.iter().any(|t| !(*t > 0.0) || !t.is_finite()) {
        return Err(CliError::Usage("--tau-grid needs positive scales".into()));
    }
    let t = WeightedTree::read(&a.tree)?;
    if a.realize_hnn && !t.has_layout() {
        return Err(CliError::Usage("--realize-hnn needs a tree with layout coordinates".into()));
    }
    let emb_path = output_path(&cli.out_dir, &a.output, "embedding.json");
    let report_path = cli.out_dir.join("embed_report.json");
    let hnn_path = cli.out_dir.join("embed_hnn.json");
    let mut outputs = vec![emb_path.clone(), report_path.clone()];
    if a.realize_hnn {
        outputs.push(hnn_path.clone());
    }
    let config = json!({
        "tree": a.tree.to_string_lossy(),
        "lambda": a.lambda,
        "tau_grid": grid,
        "realize_hnn": a.realize_hnn,
    });
    let manifest = write_manifest(&cli.out_dir, "embed", "embed", cli.seed, config, &outputs)?;

    let (e, kappa, report) = choose_curvature(&t, a.lambda, &grid)?;
    e.write(&emb_path)?;
    writeln!(
        out,
        "kappa {} alpha {} beta {} dist {}",
        kappa.kappa(),
        report.alpha,
        report.beta,
        report.dist
    )?;
    let hnn = if a.realize_hnn {
        let p = hnn_realize(&e, &t, cli.seed)?;
        let count = par_count(&p);
        let err = realization_error(&p, &e, &t)?;
        let realized = realized_report(&p, kappa, &t, &tree_metric(&t))?;
        Network::Hnn(p).write(&hnn_path, false)?;
        writeln!(
            out,
            "hnn depth {} width {} par {} realized dist {}",
            count.depth, count.width, count.par, realized.dist
        )?;
        Some(HnnSummary {
            file: display_path(&cli.out_dir, &hnn_path),
            count,
            realization_error: err,
            realized,
        })
    } else {
        None
    };
    write_json(
        &report_path,
        &EmbedReport {
            manifest,
            kappa: kappa.kappa(),
            tau: e.tau,
            report,
            hnn,
        },
    )
}
