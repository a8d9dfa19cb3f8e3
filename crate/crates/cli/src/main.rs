//! Command line driver for the clustering and prediction pipeline.
//!
//! Exit codes: 0 success, 2 usage, 3 data or configuration problem,
//! 4 network failure.

mod commands;
mod config;
mod manifest;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "herovec",
    version,
    about = "Ability clustering and kill prediction for patch-versioned match data",
    after_help = "Every subcommand accepts --config <file> holding `key = value` lines \
                  (long flag names without dashes); explicit flags take precedence."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a standardized ability feature table from patch constants
    Ingest(commands::IngestArgs),
    /// Fit ability clusters, optionally scanning a K range first
    Cluster(commands::ClusterArgs),
    /// Assign a feature table to saved clusters, emit character count vectors
    Encode(commands::EncodeArgs),
    /// Download professional matches from the explorer API
    Fetch(commands::FetchArgs),
    /// Generate a synthetic dataset with a planted lineup signal
    Synth(commands::SynthArgs),
    /// Train a kill predictor on a match CSV
    Train(commands::TrainArgs),
    /// Evaluate trained predictors on the test and holdout splits
    Eval(commands::EvalArgs),
    /// Compare cluster usage between two character tables
    Drift(commands::DriftArgs),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let argv = match config::expand_args(std::env::args().collect()) {
        Ok(argv) => argv,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests also land here; they are not errors.
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(cli.command, &argv[1..]) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
