//! Experiment runner for `spinfade`: reads a TOML config, runs one experiment
//! and writes CSV artifacts plus a JSON manifest describing the run.

pub mod config;
pub mod error;
mod experiments;
pub mod output;
mod verify;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

pub use config::{ExperimentConfig, ExperimentKind};
pub use error::{CliError, Result};

use output::Artifacts;

/// Command-line overrides applied on top of the config file.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    /// Worker threads; `None` uses the global pool.
    pub workers: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub kind: ExperimentKind,
    pub manifest: PathBuf,
    pub outputs: Vec<PathBuf>,
    pub summary: Vec<String>,
    pub passed: bool,
}

#[derive(Serialize)]
struct Manifest<'a> {
    experiment: &'static str,
    config_version: u32,
    seed: u64,
    workers: usize,
    wall_time_seconds: f64,
    versions: BTreeMap<&'static str, &'static str>,
    outputs: &'a [String],
    summary: &'a [String],
    passed: bool,
    config: &'a ExperimentConfig,
}

fn versions() -> BTreeMap<&'static str, &'static str> {
    let core = spinfade_core::VERSION;
    [
        ("potential", core),
        ("disorder", core),
        ("dynamics", core),
        ("averaging", core),
        ("decay", core),
        ("thermo", core),
        ("cli", env!("CARGO_PKG_VERSION")),
    ]
    .into_iter()
    .collect()
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    ExperimentConfig::from_toml(&text)
}

/// Run one experiment. Output files depend only on the config and seed,
/// never on the worker count.
pub fn run(
    kind: ExperimentKind,
    config: &ExperimentConfig,
    options: &RunOptions,
) -> Result<RunReport> {
    let mut config = config.clone();
    if let Some(seed) = options.seed {
        config.seed = seed;
    }
    if let Some(dir) = &options.out_dir {
        config.output.dir = dir.clone();
    }
    config.check_for(kind)?;

    let started = Instant::now();
    let mut artifacts = Artifacts::create(&config.output.dir)?;
    let (outcome, workers) = match options.workers {
        Some(n) => {
            if n == 0 {
                return Err(CliError::config("workers", "must be >= 1"));
            }
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Pool(e.to_string()))?;
            (
                pool.install(|| experiments::execute(kind, &config, &mut artifacts))?,
                n,
            )
        }
        None => (
            experiments::execute(kind, &config, &mut artifacts)?,
            rayon::current_num_threads(),
        ),
    };

    let manifest = Manifest {
        experiment: kind.name(),
        config_version: config::CONFIG_VERSION,
        seed: config.seed,
        workers,
        wall_time_seconds: started.elapsed().as_secs_f64(),
        versions: versions(),
        outputs: artifacts.files(),
        summary: &outcome.summary,
        passed: outcome.passed,
        config: &config,
    };
    let manifest_path = artifacts.manifest(&format!("{}.manifest.json", kind.stem()), &manifest)?;
    Ok(RunReport {
        kind,
        manifest: manifest_path,
        outputs: artifacts
            .files()
            .iter()
            .map(|f| artifacts.dir().join(f))
            .collect(),
        summary: outcome.summary,
        passed: outcome.passed,
    })
}
