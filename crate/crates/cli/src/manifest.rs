//! Run manifests, written before any result file of a command.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::CliResult;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub seed: u64,
    /// Seconds since the epoch from `SOURCE_DATE_EPOCH`; absent when the
    /// variable is unset so that repeated runs stay byte-identical.
    pub timestamp: Option<u64>,
    pub config: serde_json::Value,
    /// Result files, relative to the manifest's directory when inside it.
    pub outputs: Vec<String>,
}

pub fn source_date_epoch() -> Option<u64> {
    std::env::var("SOURCE_DATE_EPOCH").ok()?.trim().parse().ok()
}

/// `path` relative to `dir` when it lies inside, as given otherwise.
pub fn display_path(dir: &Path, path: &Path) -> String {
    path.strip_prefix(dir)
        .unwrap_or(path)
        .to_string_lossy()
        .replace('\\', "/")
}

impl RunManifest {
    pub fn new(command: &str, seed: u64, config: serde_json::Value) -> Self {
        Self {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            timestamp: source_date_epoch(),
            config,
            outputs: Vec::new(),
        }
    }

    pub fn with_outputs(mut self, dir: &Path, outputs: &[PathBuf]) -> Self {
        self.outputs = outputs.iter().map(|p| display_path(dir, p)).collect();
        self
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        std::fs::write(path, s)?;
        Ok(())
    }

    pub fn read(path: &Path) -> CliResult<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}
