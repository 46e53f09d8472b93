use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use spinfade_cli::{load_config, run, ExperimentKind, RunOptions};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Command {
    Curve,
    DisorderAverage,
    VarianceScan,
    Covariance,
    DecayClassify,
    Ratio,
    FreeEnergy,
    Verify,
}

impl From<Command> for ExperimentKind {
    fn from(c: Command) -> Self {
        match c {
            Command::Curve => Self::Curve,
            Command::DisorderAverage => Self::DisorderAverage,
            Command::VarianceScan => Self::VarianceScan,
            Command::Covariance => Self::Covariance,
            Command::DecayClassify => Self::DecayClassify,
            Command::Ratio => Self::Ratio,
            Command::FreeEnergy => Self::FreeEnergy,
            Command::Verify => Self::Verify,
        }
    }
}

/// Transverse-spin decay experiments for the Emch-Radin chain.
#[derive(Debug, Parser)]
#[command(name = "spinfade", version)]
struct Args {
    #[arg(value_enum)]
    command: Command,
    /// TOML experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Master seed; overrides `seed` in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides `[output] dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long)]
    workers: Option<usize>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let result = load_config(&args.config).and_then(|config| {
        run(
            args.command.into(),
            &config,
            &RunOptions {
                seed: args.seed,
                out_dir: args.out,
                workers: args.workers,
            },
        )
    });
    match result {
        Ok(report) => {
            for line in &report.summary {
                println!("{line}");
            }
            println!("manifest: {}", report.manifest.display());
            if report.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
