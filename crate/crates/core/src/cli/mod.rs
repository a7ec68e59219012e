//! Experiment runner behind the `memvol` binary.
//!
//! Subcommands `simulate`, `rates`, `kernel-check` and `bench` read an optional TOML config
//! (see [`config::ExperimentConfig`]), write CSV tables into the output directory together
//! with a verbatim copy of the config, and map failures to exit codes: 1 for invalid input,
//! 2 for a tolerance breach, 3 for I/O errors.

pub mod commands;
pub mod config;
pub mod csv;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use thiserror::Error;

use config::ExperimentConfig;

#[derive(Debug, Parser)]
#[command(name = "memvol", version, about = "Memory-process simulation and strong-rate experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML experiment config; every section is optional.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the config seed (default 0).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads; affects speed only.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Write sample paths to `<out>/<process>/paths.csv`.
    Simulate,
    /// Write `rates.csv` and `slopes.csv`.
    Rates,
    /// Check the kernel/co-kernel identities; exits with 2 above tolerance.
    KernelCheck,
    /// Write `timings.csv` for endpoint-only and whole-path simulation.
    Bench,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("tolerance exceeded: {0}")]
    Tolerance(String),
    #[error("I/O error at {}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Tolerance(_) => 2,
            CliError::Io { .. } => 3,
        }
    }
}

impl From<crate::Error> for CliError {
    fn from(e: crate::Error) -> Self {
        CliError::Validation(e.to_string())
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    let text = match &cli.config {
        Some(path) => std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?,
        None => String::new(),
    };
    let cfg = ExperimentConfig::parse(&text)?;
    let seed = cli.seed.or(cfg.seed).unwrap_or(0);
    let pool = match cli.threads {
        Some(0) => return Err(CliError::Validation("--threads must be positive".into())),
        Some(k) => rayon::ThreadPoolBuilder::new().num_threads(k).build(),
        None => rayon::ThreadPoolBuilder::new().build(),
    }
    .map_err(|e| CliError::Validation(format!("thread pool: {e}")))?;
    commands::validate(cli.command, &cfg)?;
    std::fs::create_dir_all(&cli.out).map_err(|e| CliError::io(&cli.out, e))?;
    let echo = cli.out.join("config.toml");
    std::fs::write(&echo, &text).map_err(|e| CliError::io(&echo, e))?;
    pool.install(|| match cli.command {
        Command::Simulate => commands::run_simulate(&cfg, seed, &cli.out).map(|_| ()),
        Command::Rates => commands::run_rates(&cfg, seed, &cli.out).map(|_| ()),
        Command::KernelCheck => commands::run_kernel_check(&cfg, &cli.out).map(|_| ()),
        Command::Bench => commands::run_bench(&cfg, seed, &cli.out).map(|_| ()),
    })
}
