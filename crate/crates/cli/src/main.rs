//! `spme-lab`: simulations and estimate checks for stochastic porous medium
//! equations.
//!
//! Exit codes: 0 success, 1 failed assumption or check, 2 usage or
//! configuration error.

mod commands;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "spme-lab", version, about = "Stochastic porous medium laboratory")]
pub struct Cli {
    /// Overrides `noise.seed` of the configuration.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Worker threads for path-parallel runs (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Root directory for run directories.
    #[arg(long, global = true, env = "SPME_LAB_OUT", default_value = "runs")]
    pub out: PathBuf,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug)]
pub struct ConfigArg {
    /// TOML configuration file.
    pub config: PathBuf,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Check the structural assumptions of a configuration.
    Validate(ConfigArg),
    /// Simulate paths and estimate the configured statistic.
    Simulate {
        #[command(flatten)]
        cfg: ConfigArg,
        /// Number of paths (default: `experiment.paths`).
        #[arg(long)]
        paths: Option<usize>,
    },
    /// `E‖u^ε‖²_{L∞(Q_T)}` across `experiment.eps_list`.
    SweepEpsilon {
        #[command(flatten)]
        cfg: ConfigArg,
        #[arg(long)]
        paths: Option<usize>,
        /// Largest accepted max/min ratio of the estimates.
        #[arg(long, default_value_t = 1.5)]
        max_ratio: f64,
    },
    /// Window sup-norm estimates across `experiment.rho_list` and the log-log slope.
    Smoothing {
        #[command(flatten)]
        cfg: ConfigArg,
        #[arg(long)]
        paths: Option<usize>,
    },
    /// Exponent ladder of the Moser iteration.
    MoserLadder {
        #[arg(long)]
        d: usize,
        /// `m̃`, integer or fraction such as `1/2`.
        #[arg(long)]
        mtilde: String,
        /// `μ`, `inf` or a rational.
        #[arg(long, default_value = "inf")]
        mu: String,
        #[arg(long, default_value = "2")]
        alpha: String,
        /// Free constant `N` for the `c_n` column (omitted when not given).
        #[arg(long)]
        n_free: Option<f64>,
        #[arg(long, default_value_t = 6)]
        n_max: usize,
    },
    /// Space-time embedding inequality on the configured fields.
    GnCheck(ConfigArg),
    /// Discrete Itô formula residual at `dt` and `dt/2`.
    ItoCheck {
        #[command(flatten)]
        cfg: ConfigArg,
        #[arg(long)]
        paths: Option<usize>,
    },
    /// Monotonicity inequality on random field pairs at two resolutions.
    MonotonicityCheck(ConfigArg),
}

/// Outcome of a subcommand.
pub enum Outcome {
    Pass,
    Fail,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::Fail) => ExitCode::from(1),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(commands::exit_code(&err))
        }
    }
}
