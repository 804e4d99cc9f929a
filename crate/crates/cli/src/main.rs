//! balloon-ro: simulate, preprocess, retrieve, invert and summarise
//! balloon-borne GNSS radio occultations.
//!
//! Exit status is 0 on success (including partial success with warnings),
//! 1 on a usage or configuration error and 2 when every input failed.

mod config;
mod run;
mod setup;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::RunConfig;
use run::{Ctx, Failure};

#[derive(Parser)]
#[command(
    name = "balloon-ro",
    version,
    about = "Balloon-borne GNSS radio occultation processing"
)]
struct Cli {
    /// Flat `section.key = value` configuration; defaults apply to every key left out.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads. Output does not depend on this.
    #[arg(long, global = true, default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..))]
    jobs: u16,
    /// Print the machine-readable summary instead of the text report.
    #[arg(long, global = true)]
    emit_json: bool,
    /// Seed for injected noise; runs without noise ignore it.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the configured occultation and write observables, orbits and truth profiles.
    Simulate,
    /// Turn observation directories into smoothed excess-phase profiles.
    Preprocess {
        /// Directories holding platform.csv, .sp3 orbits and RINEX or CSV observations.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
    /// Convert excess-phase profiles (phase_* / profile_*) to bending angles.
    Retrieve {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
    /// Abel-invert bending profiles (bending_*) to refractivity.
    Invert {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
    /// Quality ledger and sounding density from .counts files.
    Stats {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
    /// Print a configuration file listing every key at its default.
    Defaults,
}

fn execute(cli: &Cli) -> Result<run::Report, Failure> {
    let cfg = RunConfig::load(cli.config.as_deref(), cli.seed).map_err(Failure::Usage)?;
    std::fs::create_dir_all(&cli.out)
        .map_err(|e| Failure::Usage(anyhow::anyhow!("cannot create {}: {e}", cli.out.display())))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs as usize)
        .build()
        .map_err(|e| Failure::Usage(e.into()))?;
    let ctx = Ctx {
        cfg: &cfg,
        out: &cli.out,
        pool: &pool,
    };
    log::info!("config {}", cfg.hash);
    match &cli.command {
        Command::Simulate => run::simulate(&ctx),
        Command::Preprocess { inputs } => run::preprocess(&ctx, inputs),
        Command::Retrieve { inputs } => run::retrieve(&ctx, inputs),
        Command::Invert { inputs } => run::invert(&ctx, inputs),
        Command::Stats { inputs } => run::stats(&ctx, inputs),
        Command::Defaults => unreachable!("handled before configuration"),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Command::Defaults = cli.command {
        print!("{}", config::default_text());
        return ExitCode::SUCCESS;
    }
    match execute(&cli) {
        Ok(report) => {
            if cli.emit_json {
                println!(
                    "{}",
                    serde_json::to_string_pretty(&report.summary).expect("json value")
                );
            } else {
                print!("{}", report.text);
            }
            ExitCode::SUCCESS
        }
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Processing(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
