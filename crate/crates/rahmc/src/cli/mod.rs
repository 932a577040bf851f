//! Command-line experiment harness: `sample`, `tune`, `compare`, and
//! `verify` subcommands over TOML configs. Exit codes: 0 on success, 2 for
//! configuration or usage problems, 3 for runtime or tuner failures;
//! `verify` exits 1 when a check fails.

mod commands;
mod config;

pub use commands::{cmd_compare, cmd_sample, cmd_tune, cmd_verify};
pub use config::ExperimentConfig;

use crate::Error;
use clap::{Parser, Subcommand};
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(name = "rahmc", version, about = "Repelling-attracting Hamiltonian Monte Carlo")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct CommonArgs {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Override the config's master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the config's output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (falls back to RAHMC_THREADS, then all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run chains and write per-chain CSVs plus run metadata.
    Sample(CommonArgs),
    /// Tune (epsilon, gamma, L) by dual averaging and emit them as JSON.
    Tune(CommonArgs),
    /// Run every configured sampler and emit consolidated metrics.
    Compare(CommonArgs),
    /// Run numerical verification checks.
    Verify {
        /// Comma-separated check names; all checks when omitted.
        #[arg(long, value_delimiter = ',')]
        checks: Vec<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write the report JSON into this directory.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        threads: Option<usize>,
    },
}

fn thread_count(cli_threads: Option<usize>) -> Option<usize> {
    cli_threads.or_else(|| {
        std::env::var("RAHMC_THREADS")
            .ok()
            .and_then(|s| s.parse().ok())
    })
}

fn install_pool<F: FnOnce() -> R + Send, R: Send>(threads: Option<usize>, f: F) -> R {
    match threads {
        Some(n) if n > 0 => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .expect("thread pool")
            .install(f),
        _ => f(),
    }
}

fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::Config(_)
        | Error::Parse { .. }
        | Error::InvalidTarget(_)
        | Error::DimensionMismatch { .. } => 2,
        Error::BlowUp { .. }
        | Error::Tuner(_)
        | Error::Diagnostic(_)
        | Error::ExactSamplingUnsupported(_)
        | Error::Io(_) => 3,
    }
}

/// Entry point for the binary; returns the process exit code.
pub fn run() -> i32 {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Sample(args) => run_config_command(args, cmd_sample),
        Command::Tune(args) => run_config_command(args, cmd_tune),
        Command::Compare(args) => run_config_command(args, cmd_compare),
        Command::Verify {
            checks,
            seed,
            out,
            threads,
        } => install_pool(thread_count(threads), || {
            cmd_verify(&checks, seed, out.as_deref())
        })
        .map(|failed| if failed > 0 { 1 } else { 0 }),
    };
    match outcome {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            exit_code_for(&err)
        }
    }
}

fn run_config_command(
    args: CommonArgs,
    f: fn(&ExperimentConfig, u64, &std::path::Path) -> crate::Result<()>,
) -> crate::Result<i32> {
    let config = ExperimentConfig::from_file(&args.config)?;
    let seed = args.seed.unwrap_or(config.run.seed);
    let out_dir = args.out.clone().unwrap_or_else(|| config.output.directory.clone());
    install_pool(thread_count(args.threads), || f(&config, seed, &out_dir))?;
    Ok(0)
}
