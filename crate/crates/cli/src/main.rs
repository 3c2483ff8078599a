//! `ostrovsky`: solves, sweeps and probes driven by TOML configs.
//!
//! Exit codes: 0 success, 1 configuration or input error, 2 blowup or divergence,
//! 3 a conservation check failed.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct ConfigError(pub String);

#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct CheckFailed(pub String);

#[derive(Parser)]
#[command(name = "ostrovsky", version, about = "Generalized Ostrovsky solver and estimate probes")]
struct Cli {
    /// TOML config, or a previous run's manifest.json.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Seed for randomized probes; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve initial data and write traces and snapshots.
    Solve,
    /// Sweep the rotation parameter and fit the convergence rate.
    SweepGamma,
    /// Sample the dyadic kernel against its region bounds.
    ProbeKernel,
    /// Monte-Carlo ratios for the linear and multilinear estimates.
    ProbeEstimates {
        /// Estimate tag, repeatable; all tags when absent.
        #[arg(long)]
        which: Vec<String>,
        #[arg(long)]
        draws: Option<usize>,
    },
    /// Duhamel-Picard iteration cross-checked against the stepper.
    PicardCheck,
    /// Conservation suite started from a snapshot file.
    Invariants {
        #[arg(long)]
        snapshot: Option<PathBuf>,
    },
}

fn exit_code(err: &anyhow::Error) -> u8 {
    use ostrovsky::Error as E;
    for cause in err.chain() {
        if cause.downcast_ref::<CheckFailed>().is_some() {
            return 3;
        }
        if let Some(e) = cause.downcast_ref::<E>() {
            return match e {
                E::Blowup { .. } | E::NonFinite(_) | E::ContractionFailure { .. } => 2,
                _ => 1,
            };
        }
    }
    1
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("OSTROVSKY_LOG", "warn"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    if let Some(j) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(j.max(1)).build_global() {
            log::warn!("cannot size the worker pool: {e}");
        }
    }
    let cfg = cli.config.as_deref();
    let out = cli.out.as_path();
    let result = match &cli.command {
        Command::Solve => commands::solve(cfg, out),
        Command::SweepGamma => commands::sweep_gamma(cfg, out),
        Command::ProbeKernel => commands::probe_kernel(cfg, out, cli.seed),
        Command::ProbeEstimates { which, draws } => commands::probe_estimates(cfg, out, cli.seed, which, *draws),
        Command::PicardCheck => commands::picard_check(cfg, out),
        Command::Invariants { snapshot } => commands::invariants(cfg, out, snapshot.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
