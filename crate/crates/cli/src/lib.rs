//! Command-line front end for `lebdyn-core`: builds systems from specs or
//! files, tabulates Lebesgue numbers and rate estimates, and checks the
//! inequalities between entropy, dimension, Lipschitz and Lebesgue rates.
//!
//! Exit codes: 0 success, 1 an inequality failed, 2 usage error, 3 numeric
//! or budget failure.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub mod commands;
pub mod config;
pub mod io;
pub mod report;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VIOLATION: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] lebdyn_core::Error),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Io { .. } => EXIT_USAGE,
            CliError::Core(e) if e.is_usage() => EXIT_USAGE,
            CliError::Core(_) => EXIT_NUMERIC,
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "lebdyn",
    version,
    about = "Lebesgue numbers, entropy and Lipschitz rates of finite dynamical systems"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// List the built-in system families and their parameters.
    List(ListArgs),
    /// Lebesgue numbers δ_n of each cover under iteration.
    DeltaTable(RunArgs),
    /// Lower/upper Lebesgue rates, iterate Lipschitz rates and preimage bounds.
    Rates(RunArgs),
    /// Entropy from separated sets and from minimal subcovers.
    Entropy(RunArgs),
    /// Box-counting dimension.
    Dims(RunArgs),
    /// Check the inequalities between the measured invariants.
    Verify(RunArgs),
    /// Every table plus the inequality check.
    Report(RunArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    #[default]
    Auto,
    Exact,
    Greedy,
}

#[derive(Args, Debug)]
pub struct ListArgs {
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Same as `--format json`.
    #[arg(long, conflicts_with = "format")]
    pub json: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct RunArgs {
    /// System spec file (JSON).
    #[arg(long, conflicts_with_all = ["family", "space"])]
    pub spec: Option<PathBuf>,
    /// Built-in family; see `lebdyn list`.
    #[arg(long, conflicts_with = "space")]
    pub family: Option<String>,
    /// Family parameter `key=value`; values are numbers or inline JSON specs.
    #[arg(long = "param", value_name = "KEY=VALUE")]
    pub params: Vec<String>,
    /// Space file (JSON) for a custom system; needs `--map`.
    #[arg(long, requires = "map")]
    pub space: Option<PathBuf>,
    /// Map file (JSON) for a custom system.
    #[arg(long, requires = "space")]
    pub map: Option<PathBuf>,
    /// Extra cover file (JSON) for a custom system; repeatable.
    #[arg(long = "cover", requires = "space")]
    pub covers: Vec<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Same as `--format json`.
    #[arg(long, conflicts_with = "format")]
    pub json: bool,
    /// Output file; a directory for `report --format csv`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub horizon: Option<usize>,
    /// Mesh cover radii, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub mesh: Option<Vec<f64>>,
    /// Solve exactly up to this many points or members, greedily above.
    #[arg(long, value_name = "P")]
    pub exact_limit: Option<usize>,
    /// Slack allowed on inequality rows with measured inputs.
    #[arg(long)]
    pub tolerance: Option<f64>,
    /// Rate window `a:b` (inclusive iterate range).
    #[arg(long, value_name = "A:B")]
    pub window: Option<String>,
    #[arg(long, value_enum, default_value = "auto")]
    pub mode: ModeArg,
    /// Override a known invariant, `name=value` (h, dimb, dimh, h_l_lower,
    /// h_l_upper, l, lipschitz).
    #[arg(long = "known", value_name = "NAME=VALUE")]
    pub known: Vec<String>,
    /// Record wall time in the report (makes output non-reproducible).
    #[arg(long)]
    pub timing: bool,
}

/// Parses arguments, runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match commands::execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
