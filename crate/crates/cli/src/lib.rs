//! Command-line harness: tree generation, hyperbolic embedding, training,
//! experiment grids and the MLP distortion study.

pub mod args;
mod commands;
pub mod config;
pub mod manifest;
pub mod svg;

use std::ffi::OsString;
use std::fmt;
use std::io::Write;

use clap::Parser;

pub use args::{Cli, Command, TreeKind};
pub use commands::grid::{cell_means, run_grid, GridRow, GRID_HEADER};
pub use commands::lowerbound::{run_study, LowerboundRow, EXPONENT_ROW, LOWERBOUND_HEADER};
pub use config::ExperimentConfig;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_UNREACHABLE: i32 = 3;
pub const EXIT_DIVERGENCE: i32 = 4;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(hyptree::Error),
    Io(std::io::Error),
    Other(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => f.write_str(m),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
            CliError::Other(m) => f.write_str(m),
        }
    }
}

impl std::error::Error for CliError {}

impl From<hyptree::Error> for CliError {
    fn from(e: hyptree::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Core(e.into())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Other(format!("csv error: {e}"))
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Core(hyptree::Error::TargetUnreachable { .. }) => EXIT_UNREACHABLE,
            CliError::Core(hyptree::Error::Divergence { .. }) => EXIT_DIVERGENCE,
            _ => EXIT_FAILURE,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Worker count: `HYPTREE_THREADS` if set and valid, otherwise the flag.
pub fn thread_count(flag: usize) -> usize {
    std::env::var("HYPTREE_THREADS")
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(flag)
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code. Results go to `out`, diagnostics to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = if code == 0 {
                write!(out, "{}", e.render())
            } else {
                write!(err, "{}", e.render())
            };
            return code;
        }
    };
    match execute(&cli, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: &Cli, out: &mut dyn Write) -> CliResult<()> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(thread_count(cli.threads))
        .build()
        .map_err(|e| CliError::Other(format!("thread pool: {e}")))?;
    std::fs::create_dir_all(&cli.out_dir)?;
    match &cli.command {
        Command::Gen(a) => commands::gen::run(cli, a, out),
        Command::Embed(a) => commands::embed::run(cli, a, out),
        Command::Train(a) => commands::train::run(cli, a, out),
        Command::Grid(a) => commands::grid::run(cli, a, &pool, out),
        Command::Lowerbound(a) => commands::lowerbound::run(cli, a, &pool, out),
    }
}
