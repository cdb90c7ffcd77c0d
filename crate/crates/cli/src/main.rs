//! `stie`: sequential detection of two interacting faults with a one-bit
//! exchange between detectors.
//!
//! Three subcommands share one TOML experiment file: `theory` prints the
//! closed-form quantities, `simulate` writes per-trial and aggregate CSV
//! tables, `sweep` repeats the experiment over a parameter grid and writes
//! plot-ready files next to the main table.
//!
//! Exit codes: 0 on success, 2 for configuration problems (including
//! command-line usage errors), 3 for runtime failures such as IO.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use stie_cli::commands;
use stie_cli::config::{CliError, ExperimentConfig};

#[derive(Parser)]
#[command(name = "stie", version, about = "Quickest detection with a one-bit exchange")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print closed-form delay constants, coupling rate, and the
    /// strong-interaction verdict for the configured scenario
    Theory(RunArgs),
    /// Run Monte Carlo trials; writes trials.csv and metrics.csv
    Simulate(RunArgs),
    /// Repeat the experiment over a parameter grid; writes sweep.csv
    /// and plot files
    Sweep(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Path to the TOML experiment configuration
    #[arg(long)]
    config: PathBuf,
    /// Directory for output files (created if missing)
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Override the master seed from the configuration
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for the trial loop (default: all cores)
    #[arg(long)]
    threads: Option<usize>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let args = match &cli.command {
        Command::Theory(a) | Command::Simulate(a) | Command::Sweep(a) => a,
    };
    if let Some(threads) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Runtime(format!("cannot configure thread pool: {e}")))?;
    }
    let config = ExperimentConfig::load(&args.config)?;
    match &cli.command {
        Command::Theory(_) => {
            let config = config.resolve(args.seed, false)?;
            print!("{}", commands::theory_report(&config)?);
            Ok(())
        }
        Command::Simulate(args) => {
            let config = config.resolve(args.seed, true)?;
            commands::simulate(&config, &args.out)
        }
        Command::Sweep(args) => {
            let config = config.resolve(args.seed, false)?;
            commands::sweep(&config, &args.out)
        }
    }
}

fn main() -> ExitCode {
    // clap exits with code 2 on usage errors, matching the configuration
    // exit code below.
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
