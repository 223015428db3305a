//! Command-line driver: `solve`, `estimate`, `sweep`, `asymptotic` and
//! `validate`, each reading one JSON config.

pub mod commands;
pub mod config;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::error::Error;
pub use config::RunConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Success = 0,
    Config = 1,
    Solver = 2,
    Validation = 3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub status: ExitStatus,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        Self { status: ExitStatus::Config, message: message.into() }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::Bracket { .. } | Error::Convergence { .. } => ExitStatus::Solver,
            _ => ExitStatus::Config,
        };
        Self { status, message: e.to_string() }
    }
}

#[derive(Debug, Parser)]
#[command(name = "riskalloc", version, about = "Optimal capital allocation on the simplex")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Report (JSON) or sweep table (CSV) destination.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides the config sample count.
    #[arg(long, global = true)]
    pub samples: Option<usize>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Optimal allocation by closed form, mirror descent, or both.
    Solve,
    /// Monte Carlo indicators and condition probabilities at an allocation.
    Estimate,
    /// Closed-form roots over a parameter grid, as CSV.
    Sweep,
    /// Large-capital limit of the optimal allocation.
    Asymptotic,
    /// Cross-checks closed forms against simulation and identities.
    Validate,
}

fn execute(cli: &Cli) -> Result<commands::CommandOutput, CliError> {
    let path = cli.config.as_ref().ok_or_else(|| CliError::config("--config <path> is required"))?;
    let mut cfg = RunConfig::load(path)?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(n) = cli.samples {
        cfg.samples = n;
    }
    cfg.check()?;
    let out = cli.out.as_deref().or(cfg.output.as_deref());
    match cli.command {
        Command::Solve => commands::solve(&cfg, out),
        Command::Estimate => commands::estimate(&cfg, out),
        Command::Sweep => commands::sweep(&cfg, out),
        Command::Asymptotic => commands::asymptotic(&cfg, out),
        Command::Validate => commands::validate(&cfg, out),
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{}", e.render());
                    0
                }
                _ => {
                    let _ = write!(stderr, "{}", e.render());
                    ExitStatus::Config as i32
                }
            };
        }
    };
    match execute(&cli) {
        Ok(o) => {
            let _ = stdout.write_all(o.stdout.as_bytes());
            o.status as i32
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {}", e.message);
            e.status as i32
        }
    }
}
