//! The `noether-paths` command line.
//!
//! Every subcommand reads a TOML [`config::RunConfig`] and writes its
//! artifacts under the output directory. Exit codes: 0 on success, 1 for
//! configuration or usage errors, 2 when a computation did not converge
//! (output files are still written where possible).

mod commands;
pub mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::error::Error;
use commands::Context;
use config::{ConfigError, LoadedConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_NOT_CONVERGED: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "noether-paths",
    version,
    about = "Most-likely transition paths and their conserved charges"
)]
pub struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; overrides `out` in the config (default `out`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Random seed; overrides any seed in the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Minimize the action between the configured endpoints.
    Mlp,
    /// Simulate an ensemble of sample paths.
    Simulate,
    /// Recompute charges for an existing path CSV.
    Charges {
        /// Path CSV to read (default `<out>/path.csv`).
        #[arg(long)]
        path: Option<PathBuf>,
    },
    /// Transition time as a function of energy for a 1D system.
    Ttime {
        /// Comma-separated energies; overrides `[ttime] energies`.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        energies: Option<Vec<f64>>,
    },
    /// Score field of the ring density on a grid.
    Scorefield {
        /// Diffusion time; overrides `[scorefield] t`.
        #[arg(long, allow_hyphen_values = true)]
        t: Option<f64>,
    },
    /// Fixed points of the deterministic drift.
    Fixedpoints,
}

/// How a command finished when it did not fail outright.
#[derive(Debug, Clone, PartialEq)]
pub enum Status {
    Done,
    NotConverged(String),
}

/// A failed command, classified by exit code.
#[derive(Debug, Clone, PartialEq)]
pub enum Failure {
    Config(String),
    Numerical(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Config(_) => EXIT_CONFIG,
            Failure::Numerical(_) => EXIT_NOT_CONVERGED,
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Configuration(_)
            | Error::Dimension { .. }
            | Error::Argument(_)
            | Error::SymmetryNotApplicable { .. } => Failure::Config(e.to_string()),
            _ => Failure::Numerical(e.to_string()),
        }
    }
}

/// Parse `args` (including the program name), run the command and return the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(Status::Done) => EXIT_OK,
        Ok(Status::NotConverged(msg)) => {
            eprintln!("not converged: {msg}");
            EXIT_NOT_CONVERGED
        }
        Err(f) => {
            match &f {
                Failure::Config(msg) => eprintln!("error: {msg}"),
                Failure::Numerical(msg) => eprintln!("numerical failure: {msg}"),
            }
            f.exit_code()
        }
    }
}

pub fn execute(cli: &Cli) -> Result<Status, Failure> {
    let config_path = cli
        .config
        .as_ref()
        .ok_or_else(|| Failure::Config("--config <file> is required".into()))?;
    let loaded = LoadedConfig::from_file(config_path)?;
    let out = cli
        .out
        .clone()
        .or_else(|| loaded.config.out.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    let ctx = Context {
        loaded,
        out,
        seed_override: cli.seed,
    };
    match &cli.command {
        Command::Mlp => commands::mlp(&ctx),
        Command::Simulate => commands::simulate(&ctx),
        Command::Charges { path } => commands::charges(&ctx, path.as_deref()),
        Command::Ttime { energies } => commands::ttime(&ctx, energies.as_deref()),
        Command::Scorefield { t } => commands::scorefield(&ctx, *t),
        Command::Fixedpoints => commands::fixedpoints(&ctx),
    }
}
