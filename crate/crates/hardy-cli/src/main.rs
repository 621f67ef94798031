//! `hardy-bvp`: boundary value solves and identity diagnostics for
//! divergence-form elliptic systems on the half space.
//!
//! All outputs are deterministic functions of (config, seed): reports embed
//! the seed and runs never consult wall-clock time or unordered iteration.

mod commands;
mod config;
mod output;
mod selftest;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Result};
use clap::{Parser, Subcommand};
use hardy_core::error::CoreError;

#[derive(Parser)]
#[command(name = "hardy-bvp", about = "Half-space elliptic boundary value solver and verifier")]
struct Cli {
    /// Structured JSON configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Seed for randomized probes (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory (overrides the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Problem selector: neu|reg|dir|neuperp (vector), tan|nor (forms).
    #[arg(long, global = true)]
    which: Option<String>,

    /// Suppress per-file notes.
    #[arg(long, global = true, default_value_t = false)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Accretivity constants, classification flags, and identity residuals.
    Check,
    /// Solve a boundary value problem and dump trace/field/potential data.
    Solve,
    /// Sup of boundary-map conditioning over unit directions for a family.
    #[command(name = "scan-wp")]
    ScanWp,
    /// Finite-difference Lipschitz probes around the configured field.
    Perturb,
    /// Rellich/reverse-Rellich identity diagnostics and block checks.
    Rellich,
    /// Exterior-algebra identities and constant-coefficient k-form solves.
    Forms,
    /// Full invariant suite at small sizes.
    Selftest,
}

fn apply_thread_env() {
    let threads = std::env::var("HARDY_BVP_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .unwrap_or(1);
    if threads > 1 {
        faer::set_global_parallelism(faer::Parallelism::Rayon(threads));
    } else {
        faer::set_global_parallelism(faer::Parallelism::None);
    }
}

fn run(cli: &Cli) -> Result<()> {
    let (cfg, base) = match &cli.config {
        Some(path) => {
            let cfg = config::load(path)?;
            let base = path.parent().map(PathBuf::from).unwrap_or_default();
            (Some(cfg), base)
        }
        None => (None, PathBuf::new()),
    };
    let need_cfg = || -> Result<&config::RunConfig> {
        cfg.as_ref().ok_or_else(|| anyhow!("--config is required for this command"))
    };
    let seed = cli
        .seed
        .or_else(|| cfg.as_ref().and_then(|c| c.seed))
        .unwrap_or(0);
    let out_dir = cli
        .out
        .clone()
        .or_else(|| cfg.as_ref().and_then(|c| c.out_dir.clone()))
        .unwrap_or_else(|| PathBuf::from("out"));
    let out = output::OutDir::create(&out_dir, cli.quiet)?;
    let which_str = cli
        .which
        .clone()
        .or_else(|| cfg.as_ref().and_then(|c| c.which.clone()));

    match cli.command {
        Command::Check => commands::check(need_cfg()?, seed, &out, &base),
        Command::Solve => {
            let which = commands::parse_which(
                which_str
                    .as_deref()
                    .ok_or_else(|| anyhow!("--which is required for solve"))?,
            )?;
            commands::solve(need_cfg()?, which, seed, &out, &base)
        }
        Command::ScanWp => {
            let which = commands::parse_which(which_str.as_deref().unwrap_or("neu"))?;
            commands::scan_wp(need_cfg()?, which, seed, &out)
        }
        Command::Perturb => commands::perturb(need_cfg()?, seed, &out),
        Command::Rellich => commands::rellich(need_cfg()?, seed, &out),
        Command::Forms => commands::forms_cmd(need_cfg()?, which_str.as_deref(), seed, &out),
        Command::Selftest => {
            let ok = selftest::run(seed, &out, cli.quiet)?;
            if ok {
                Ok(())
            } else {
                Err(anyhow!("selftest reported failures"))
            }
        }
    }
}

fn exit_code_for(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<CoreError>() {
        Some(CoreError::WellPosednessFailure { .. }) => 2,
        Some(CoreError::NotAccretive { .. }) => 3,
        // malformed shapes/inputs are configuration problems
        Some(CoreError::InvalidInput(_)) | Some(CoreError::DimensionMismatch(_)) => 1,
        Some(_) => 4,
        None => 1,
    }
}

fn main() -> ExitCode {
    apply_thread_env();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
