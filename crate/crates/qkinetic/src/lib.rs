//! Command-line driver for `qkinetic-core`: configuration, output files and
//! run bookkeeping. The binary is a thin wrapper around [`execute`].

pub mod config;
pub mod error;
pub mod output;
pub mod run;

use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, Subcommand};

use config::{Command, Overrides, Plan, RunConfig};
pub use error::CliError;
use output::{Manifest, OutputDir};

#[derive(Debug, Parser)]
#[command(
    name = "qkinetic",
    version,
    about = "Quantum kinetics of a Bose gas in a box"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Sub,
}

#[derive(Debug, clap::Args)]
pub struct RunArgs {
    /// TOML configuration file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Subcommand)]
pub enum Sub {
    /// Kinetic Monte Carlo of the master equation on a mode lattice.
    Kmc(RunArgs),
    /// Mean-occupation (Uehling-Uhlenbeck) kinetics on the same lattice.
    Uu(RunArgs),
    /// Condensate band against a thermal bath.
    Condensate(RunArgs),
    /// Length scales and validity conditions.
    Regime(RunArgs),
    /// Wavelet orthonormality and smearing-weight checks.
    BasisCheck(RunArgs),
}

impl Sub {
    pub fn split(&self) -> (Command, &RunArgs) {
        match self {
            Sub::Kmc(a) => (Command::Kmc, a),
            Sub::Uu(a) => (Command::Uu, a),
            Sub::Condensate(a) => (Command::Condensate, a),
            Sub::Regime(a) => (Command::Regime, a),
            Sub::BasisCheck(a) => (Command::BasisCheck, a),
        }
    }
}

pub const DEFAULT_OUT: &str = "qkinetic-out";

/// File config with flags applied, before validation. The file's `command`
/// key, if any, must agree with the subcommand.
pub fn effective_config(command: Command, args: &RunArgs) -> Result<RunConfig, CliError> {
    let mut config = match &args.config {
        Some(path) => config::load_config(path)?,
        None => RunConfig::default(),
    };
    if let Some(c) = config.command {
        if c != command {
            return Err(config::ConfigError::Invalid {
                key: "command",
                symbol: "command",
                value: c.to_string(),
                requirement: "equal to the subcommand",
            }
            .into());
        }
    }
    config.command = Some(command);
    args.overrides.apply(&mut config);
    Ok(config)
}

#[derive(Debug)]
pub struct Summary {
    pub command: Command,
    pub seed: u64,
    pub seed_generated: bool,
    pub out: PathBuf,
}

/// Validates, runs and writes artifacts plus `manifest.json` and the resolved
/// `config.toml`. `on_seed` sees the seed before any work starts.
pub fn execute(
    command: Command,
    args: &RunArgs,
    on_seed: impl FnOnce(u64, bool),
) -> Result<Summary, CliError> {
    let started = Instant::now();
    let mut config = effective_config(command, args)?;
    let plan = config::resolve(&config, command)?;
    let seed_generated = config.seed.is_none();
    let seed = *config.seed.get_or_insert_with(rand::random);
    on_seed(seed, seed_generated);
    let out_path = config
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Output(format!("thread pool: {e}")))?;

    let mut out = OutputDir::create(&out_path)?;
    let outcome = match &plan {
        Plan::Kmc(p) => run::kmc(p, seed, &pool, &mut out)?,
        Plan::Uu(p) => run::uu(p, &mut out)?,
        Plan::Condensate(p) => run::condensate(p, &mut out)?,
        Plan::Regime(p) => run::regime(p, &mut out)?,
        Plan::BasisCheck(p) => run::basis_check(p, &pool, &mut out)?,
    };
    out.write("config.toml", config::to_toml(&config).as_bytes())?;

    let manifest = Manifest {
        tool: "qkinetic",
        version: env!("CARGO_PKG_VERSION"),
        core_version: qkinetic_core::VERSION,
        command: command.name(),
        seed,
        seed_source: if seed_generated { "generated" } else { "given" },
        threads: pool.current_num_threads(),
        config: &config,
        wall_time_seconds: started.elapsed().as_secs_f64(),
        outputs: out.artifacts(),
        diagnostics: outcome.diagnostics,
    };
    let bytes =
        serde_json::to_vec_pretty(&manifest).map_err(|e| CliError::Output(e.to_string()))?;
    let path = out.root().join("manifest.json");
    std::fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;

    if let Some(message) = outcome.failure {
        return Err(CliError::Check {
            module: command.name(),
            message,
        });
    }
    Ok(Summary {
        command,
        seed,
        seed_generated,
        out: out_path,
    })
}
