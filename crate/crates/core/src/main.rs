use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use fmeasure::cli::{parse_config, run, RunOptions};

/// Perturbed Cauchy problem solvers driven by a TOML run configuration.
///
/// Exit codes: 0 success, 1 config error, 2 numeric failure,
/// 3 verification failure.
#[derive(Debug, Parser)]
#[command(name = "fmeasure", version)]
struct Args {
    /// Run configuration (TOML).
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Suppresses progress messages.
    #[arg(long)]
    quiet: bool,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let text = match std::fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("fmeasure: cannot read {}: {e}", args.config.display());
            return ExitCode::from(1);
        }
    };
    let mut spec = match parse_config(&text) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("fmeasure: {e}");
            return ExitCode::from(1);
        }
    };
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    if let Some(out) = args.out {
        spec.output.dir = out;
    }
    match run(&spec, &RunOptions { quiet: args.quiet }) {
        Ok(outcome) => {
            for f in &outcome.failures {
                eprintln!("fmeasure: verification failed: {f}");
            }
            ExitCode::from(outcome.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("fmeasure: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
