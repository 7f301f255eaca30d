//! Scenario runner behind the `satnet` binary: reads a TOML config, runs a
//! sweep or planning task and writes CSV.

pub mod commands;
pub mod config;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use satnet::keyrate::KeyRateError;
use satnet::netplan::PlanError;

pub use config::{ModeName, ScenarioConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("infeasible scenario: {0}")]
    Infeasible(String),
    #[error("model error: {0}")]
    Model(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Infeasible(_) => 3,
            CliError::Model(_) | CliError::Io(_) => 1,
        }
    }
}

impl From<PlanError> for CliError {
    fn from(e: PlanError) -> Self {
        match e {
            PlanError::InsufficientChannels { .. } | PlanError::TooFewUsers { .. } | PlanError::NoChannels => {
                CliError::Infeasible(e.to_string())
            }
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<KeyRateError> for CliError {
    fn from(e: KeyRateError) -> Self {
        match e {
            KeyRateError::CapacityExceeded { .. } | KeyRateError::NoChannels => CliError::Infeasible(e.to_string()),
            KeyRateError::Plan(p) => p.into(),
            KeyRateError::InvalidSettings(_) | KeyRateError::Detect(_) => CliError::Config(e.to_string()),
            _ => CliError::Model(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "satnet", version, about = "Entanglement-based QKD network simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Scenario configuration (TOML).
    #[arg(long, value_name = "PATH")]
    pub config: PathBuf,
    /// Output CSV path; overrides `[output] path`. Without either, CSV goes to stdout.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Worker threads for sweeps (default: number of cores).
    #[arg(long, value_name = "N")]
    pub jobs: Option<usize>,
    /// Minimum Fock cutoff per mode.
    #[arg(long, value_name = "N")]
    pub dim: Option<usize>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeName>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Optimized key rate over a range of link losses.
    SweepLoss(CommonArgs),
    /// Optimized key rate over a range of channel counts.
    SweepChannels(CommonArgs),
    /// Bucket against photon-number-resolving ground detectors.
    CompareDetectors(CommonArgs),
    /// Wavelength and user plan of the network.
    PlanNetwork(CommonArgs),
    /// Monthly key for a ground pair and a satellite user.
    MonthlyBudget(CommonArgs),
    /// Optimal squeezing at the configured loss.
    OptimizeChi(CommonArgs),
    /// Resolve and check the configuration without running.
    Validate(CommonArgs),
}

impl Command {
    pub fn common(&self) -> &CommonArgs {
        match self {
            Command::SweepLoss(c)
            | Command::SweepChannels(c)
            | Command::CompareDetectors(c)
            | Command::PlanNetwork(c)
            | Command::MonthlyBudget(c)
            | Command::OptimizeChi(c)
            | Command::Validate(c) => c,
        }
    }
}

/// Result of a subcommand: CSV body (if any) and a human-readable summary.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub csv: Option<String>,
    pub summary: String,
}

/// Applies command-line overrides to a loaded config.
pub fn apply_overrides(mut cfg: ScenarioConfig, args: &CommonArgs) -> ScenarioConfig {
    if let Some(dim) = args.dim {
        cfg.source.dim = dim;
    }
    if let Some(mode) = args.mode {
        cfg.scenario.mode = mode;
    }
    if let Some(out) = &args.out {
        cfg.output.path = Some(out.clone());
    }
    cfg
}

/// Runs `command` on an already resolved config.
pub fn execute(command: &Command, cfg: &ScenarioConfig) -> Result<Report, CliError> {
    if let Command::Validate(_) = command {
        return Ok(Report { csv: None, summary: commands::validate(cfg) });
    }
    cfg.check()?;
    match command {
        Command::SweepLoss(_) => commands::sweep_loss(cfg),
        Command::SweepChannels(_) => commands::sweep_channels(cfg),
        Command::CompareDetectors(_) => commands::compare_detectors(cfg),
        Command::PlanNetwork(_) => commands::plan_network(cfg),
        Command::MonthlyBudget(_) => commands::monthly_budget(cfg),
        Command::OptimizeChi(_) => commands::optimize_chi(cfg),
        Command::Validate(_) => unreachable!("handled above"),
    }
}

/// Loads the config, runs the command on a worker pool and writes outputs.
pub fn run(cli: &Cli) -> Result<(), CliError> {
    let args = cli.command.common();
    let cfg = apply_overrides(ScenarioConfig::load(&args.config)?, args);
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(jobs) = args.jobs {
        if jobs == 0 {
            return Err(CliError::Config("--jobs must be at least 1".into()));
        }
        pool = pool.num_threads(jobs);
    }
    let pool = pool.build().map_err(|e| CliError::Model(e.to_string()))?;
    let report = pool.install(|| execute(&cli.command, &cfg))?;
    match (&report.csv, &cfg.output.path) {
        (Some(csv), Some(path)) => {
            std::fs::write(path, csv)?;
            print!("{}", report.summary);
            println!("wrote {}", path.display());
        }
        (Some(csv), None) => {
            print!("{csv}");
            eprint!("{}", report.summary);
        }
        (None, _) => print!("{}", report.summary),
    }
    Ok(())
}
