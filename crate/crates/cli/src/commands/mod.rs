pub mod embed;
pub mod gen;
pub mod grid;
pub mod lowerbound;
pub mod train;

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::manifest::RunManifest;
use crate::CliResult;

/// Output path: `explicit` if given, otherwise `name` inside `out_dir`.
pub(crate) fn output_path(out_dir: &Path, explicit: &Option<PathBuf>, name: &str) -> PathBuf {
    explicit.clone().unwrap_or_else(|| out_dir.join(name))
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, s)?;
    Ok(())
}

/// Writes the manifest for `outputs` as `<stem>_manifest.json` in `out_dir`
/// and returns its file name.
pub(crate) fn write_manifest(
    out_dir: &Path,
    stem: &str,
    command: &str,
    seed: u64,
    config: serde_json::Value,
    outputs: &[PathBuf],
) -> CliResult<String> {
    let name = format!("{stem}_manifest.json");
    RunManifest::new(command, seed, config)
        .with_outputs(out_dir, outputs)
        .write(&out_dir.join(&name))?;
    Ok(name)
}
