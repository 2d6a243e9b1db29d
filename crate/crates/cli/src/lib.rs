//! Command-line front end for `cyclefv`.
//!
//! Every command takes its parameters from flags, optionally layered over a
//! JSON file given with `--config`. Tables go to `--output` (stdout when
//! absent) as CSV, and the JSON summary goes to `--summary` (stderr when
//! absent). `verify` writes its JSON report to `--output` or stdout.

pub mod commands;
pub mod config;
pub mod output;
pub mod verify;

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use config::{ExperimentConfig, FileConfig};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Parser)]
#[command(name = "cyclefv", version, about = "Fleming-Viot particles on the cycle with uniform killing")]
pub struct Cli {
    /// JSON file with default parameter values; flags override it.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Eigenvalues of the walk generator and its spectral constants.
    Spectrum(SpectrumArgs),
    /// Stationary two-point correlations and covariances.
    Covariance(CovarianceArgs),
    /// Simulate replicas of the particle system.
    Simulate(SimulateArgs),
    /// Mean, covariance field and bound curves on a time grid.
    Dynamics(DynamicsArgs),
    /// Run the verification checks and emit a JSON report.
    Verify(VerifyArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Spectrum(_) => "spectrum",
            Command::Covariance(_) => "covariance",
            Command::Simulate(_) => "simulate",
            Command::Dynamics(_) => "dynamics",
            Command::Verify(_) => "verify",
        }
    }
}

/// Usage line of one subcommand.
pub fn usage(subcommand: &str) -> String {
    let mut cmd = <Cli as clap::CommandFactory>::command();
    cmd.build();
    match cmd.find_subcommand_mut(subcommand) {
        Some(sub) => sub.render_usage().to_string(),
        None => cmd.render_usage().to_string(),
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct ModelArgs {
    /// Number of sites.
    #[arg(long = "K")]
    pub k: Option<usize>,
    /// Backward jump rate.
    #[arg(long)]
    pub theta: Option<f64>,
    /// Killing rate.
    #[arg(long)]
    pub p: Option<f64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct OutputArgs {
    /// CSV destination (stdout when absent).
    #[arg(long, value_name = "PATH")]
    pub output: Option<PathBuf>,
    /// JSON summary destination (stderr when absent).
    #[arg(long, value_name = "PATH")]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SpectrumArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct CovarianceArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Number of particles.
    #[arg(long = "N")]
    pub n: Option<u64>,
    /// Exit with status 1 if the available methods disagree by more than 1e-10.
    #[arg(long)]
    pub checked: bool,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long = "N")]
    pub n: Option<u64>,
    /// Final time (relative to the burn-in with --stationary).
    #[arg(long)]
    pub t_end: Option<f64>,
    /// Number of equal steps of the sampling grid.
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub replicas: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Initial occupation numbers, comma separated (default: all particles on site 0).
    #[arg(long, value_delimiter = ',')]
    pub init: Option<Vec<u64>>,
    /// Sample after a burn-in and compare covariances with the closed form.
    #[arg(long)]
    pub stationary: bool,
    /// Burn-in time for --stationary (default 50 / rho_K).
    #[arg(long)]
    pub burn_in: Option<f64>,
    /// Exit with status 1 if the stationary comparison fails.
    #[arg(long)]
    pub checked: bool,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct DynamicsArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long = "N")]
    pub n: Option<u64>,
    #[arg(long)]
    pub t_end: Option<f64>,
    #[arg(long)]
    pub steps: Option<usize>,
    /// Initial occupation numbers, comma separated (default: all particles on site 0).
    #[arg(long, value_delimiter = ',')]
    pub init: Option<Vec<u64>>,
    /// Reference law for the distance bounds, comma separated (default: point mass at 0).
    #[arg(long, value_delimiter = ',')]
    pub mu: Option<Vec<f64>>,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long = "N")]
    pub n: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Replicas for the Monte Carlo checks.
    #[arg(long)]
    pub replicas: Option<usize>,
    /// Run only these checks (comma separated ids).
    #[arg(long, value_delimiter = ',')]
    pub only: Option<Vec<String>>,
    /// Shift theta by this amount in the second module of every cross-check.
    #[arg(long, hide = true, value_name = "DELTA")]
    pub inject_theta_mismatch: Option<f64>,
    /// Report destination (stdout when absent).
    #[arg(long, value_name = "PATH")]
    pub output: Option<PathBuf>,
}

#[derive(Debug)]
pub enum CliError {
    /// Bad or missing arguments; exit status 2.
    Usage(String),
    /// A check did not pass; exit status 1.
    Failed(String),
    /// The computation itself failed; exit status 1.
    Runtime(cyclefv::Error),
    Io(std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Failed(m) => write!(f, "check failed: {m}"),
            CliError::Runtime(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl From<cyclefv::Error> for CliError {
    fn from(e: cyclefv::Error) -> Self {
        match e {
            cyclefv::Error::InvalidParams(_)
            | cyclefv::Error::InvalidConfiguration(_)
            | cyclefv::Error::NotProbability(_)
            | cyclefv::Error::EmptySite { .. } => CliError::Usage(e.to_string()),
            other => CliError::Runtime(other),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.into())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(e.into())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Runs one parsed command. `stdout` and `stderr` receive whatever is not
/// redirected to a file.
pub fn run(cli: Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> CliResult<()> {
    let file = match &cli.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    match cli.command {
        Command::Spectrum(a) => commands::spectrum(&ExperimentConfig::for_spectrum(&a, &file)?, stdout, stderr),
        Command::Covariance(a) => commands::covariance(&ExperimentConfig::for_covariance(&a, &file)?, stdout, stderr),
        Command::Simulate(a) => commands::simulate(&ExperimentConfig::for_simulate(&a, &file)?, stdout, stderr),
        Command::Dynamics(a) => commands::dynamics(&ExperimentConfig::for_dynamics(&a, &file)?, stdout, stderr),
        Command::Verify(a) => verify::run(&ExperimentConfig::for_verify(&a, &file)?, stdout),
    }
}

/// Reads `CYCLEFV_THREADS` and sizes the global worker pool.
pub fn configure_threads() -> CliResult<()> {
    let Ok(raw) = std::env::var("CYCLEFV_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| CliError::Usage(format!("CYCLEFV_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new().num_threads(threads).build_global().map_err(|e| CliError::Usage(e.to_string()))
}
