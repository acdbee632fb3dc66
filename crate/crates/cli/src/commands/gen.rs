use std::io::Write;

use hyptree::trees::{leaves, LayoutParams};
use serde_json::json;

use super::{output_path, write_manifest};
use crate::args::{GenArgs, TreeKind};
use crate::config::{laid_out_tree, TreeSpec};
use crate::{Cli, CliError, CliResult};

pub fn run(cli: &Cli, a: &GenArgs, out: &mut dyn Write) -> CliResult<()> {
    let spec = match (a.kind, a.depth, a.n) {
        (TreeKind::Random, _, Some(n)) if n >= 1 => TreeSpec::Size(n),
        (TreeKind::Random, _, _) => return Err(CliError::Usage("random trees need --n >= 1".into())),
        (_, Some(d), None) => TreeSpec::Depth(d),
        (_, None, Some(n)) if n >= 1 => TreeSpec::Size(n),
        _ => return Err(CliError::Usage("give --depth or --n >= 1".into())),
    };
    if a.layout_dim == 0 || a.iterations == 0 {
        return Err(CliError::Usage("--layout-dim and --iterations must be positive".into()));
    }
    let path = output_path(&cli.out_dir, &a.output, "tree.json");
    let stem = path.file_stem().map_or("tree".into(), |s| s.to_string_lossy().into_owned());
    let config = json!({
        "kind": a.kind.name(),
        "depth": a.depth,
        "n": a.n,
        "layout_dim": a.layout_dim,
        "iterations": a.iterations,
    });
    write_manifest(&cli.out_dir, &stem, "gen", cli.seed, config, std::slice::from_ref(&path))?;
    let layout = LayoutParams {
        dim: a.layout_dim,
        iterations: a.iterations,
    };
    let t = laid_out_tree(a.kind, spec, cli.seed, &layout)?;
    t.write(&path)?;
    writeln!(
        out,
        "nodes {} edges {} leaves {}",
        t.len(),
        t.edges().len(),
        leaves(&t).len()
    )?;
    Ok(())
}
