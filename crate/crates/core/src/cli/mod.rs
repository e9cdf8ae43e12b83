//! Configuration ingestion and the `ibflow` subcommands.

mod commands;
mod config;

use std::path::PathBuf;

use clap::Parser;

pub use commands::{fmt_f64, identity_resolution, log_log_slope, run_command, Outcome};
pub use config::{
    parse_config, CheckConditionParams, Command, CovarianceParams, LengthDecayConfig,
    LyapunovConfig, ModelSpec, OutputSpec, Params, RunConfig, SqueezeConfig, TrackControlConfig,
    VerifyIdentityParams,
};

use crate::error::{Error, Result};

/// Exit status for a successful run.
pub const EXIT_OK: u8 = 0;
/// Exit status for rejected input (bad config, bad flags).
pub const EXIT_VALIDATION: u8 = 2;
/// Exit status for numerical failures during a run.
pub const EXIT_NUMERIC: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "ibflow", version, about = "Isotropic Brownian flow experiments")]
pub struct Cli {
    /// covariance | check-condition | verify-identity | lyapunov | squeeze |
    /// expand | track-control | length-decay
    pub command: String,
    /// JSON run configuration
    #[arg(long)]
    pub config: PathBuf,
    /// Worker threads (default: all cores)
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Output directory
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Suppress the summary line
    #[arg(long)]
    pub quiet: bool,
}

/// Parse the config named on the command line and run it.
pub fn execute(cli: &Cli) -> Result<Outcome> {
    let command: Command = cli.command.parse()?;
    let text = std::fs::read_to_string(&cli.config)
        .map_err(|e| Error::config("--config", format!("{}: {e}", cli.config.display())))?;
    let cfg = parse_config(&text)?;
    if cfg.command != command {
        return Err(Error::config(
            "command",
            format!("config is for `{}` but `{command}` was requested", cfg.command),
        ));
    }
    if cli.jobs == Some(0) {
        return Err(Error::config("--jobs", "must be at least 1"));
    }
    in_pool(cli.jobs, || run_command(&cfg, &cli.out))
}

#[cfg(feature = "parallel")]
fn in_pool<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    match jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::config("--jobs", e.to_string()))?
            .install(f),
        None => f(),
    }
}

#[cfg(not(feature = "parallel"))]
fn in_pool<T: Send>(_jobs: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    f()
}

/// Map an error to the process exit status.
pub fn exit_status(e: &Error) -> u8 {
    if e.is_validation() {
        EXIT_VALIDATION
    } else {
        EXIT_NUMERIC
    }
}
