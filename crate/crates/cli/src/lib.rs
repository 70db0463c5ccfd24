//! Runs one configured experiment and writes CSV traces plus `summary.json`.

pub mod config;
pub mod experiments;
pub mod output;

use std::path::{Path, PathBuf};
use std::time::Instant;

use thiserror::Error;

pub use config::{Experiment, RunConfig};
pub use output::{Check, Summary};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Schema(String),

    #[error("{module}: {source}")]
    Model {
        module: &'static str,
        #[source]
        source: seqmeas::Error,
    },

    #[error("{module}: invariant violated at step {step}: {message}")]
    Invariant {
        module: &'static str,
        step: usize,
        message: String,
    },

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("thread pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub config: PathBuf,
    pub out: PathBuf,
    pub overrides: Vec<String>,
    /// Worker threads; `None` uses the rayon default.
    pub threads: Option<usize>,
    /// Enables cross-checks (quadrature against closed form, kernel against direct
    /// iteration).
    pub verify: bool,
}

/// Reads the config file, applies overrides and runs the experiment.
pub fn run(opts: &RunOptions) -> Result<Summary, CliError> {
    let text = std::fs::read_to_string(&opts.config)?;
    let cfg = RunConfig::parse(&text)?.with_overrides(&opts.overrides)?;
    run_config(&cfg, &opts.out, opts.threads, opts.verify)
}

/// Runs an already validated configuration.
pub fn run_config(cfg: &RunConfig, out: &Path, threads: Option<usize>, verify: bool) -> Result<Summary, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()?;
    let start = Instant::now();
    let mut outs = output::Outputs::new(out)?;
    pool.install(|| match cfg.experiment {
        Experiment::BoxHeatVision => experiments::box_heat_vision(&cfg.box_heat_vision, verify, &mut outs),
        Experiment::Tomography => experiments::tomography(&cfg.tomography, cfg.seed, verify, &mut outs),
        Experiment::FinitedimSaturation => experiments::finitedim(&cfg.finitedim_saturation, cfg.seed, &mut outs),
        Experiment::Ladder => experiments::ladder(&cfg.ladder, verify, &mut outs),
        Experiment::FreegroupNorm => experiments::freegroup_norm(&cfg.freegroup_norm, cfg.seed, &mut outs),
        Experiment::FreegroupPurity => experiments::freegroup_purity(&cfg.freegroup_purity, cfg.seed, &mut outs),
    })?;
    let summary = Summary {
        experiment: cfg.experiment.name().to_string(),
        seed: cfg.seed,
        version: env!("CARGO_PKG_VERSION").to_string(),
        threads: pool.current_num_threads(),
        verify,
        config: serde_json::to_value(cfg)?,
        wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
        checks: outs.checks,
        results: outs.results,
        warnings: outs.warnings,
        artifacts: outs.artifacts,
    };
    let f = std::fs::File::create(out.join("summary.json"))?;
    serde_json::to_writer_pretty(std::io::BufWriter::new(f), &summary)?;
    Ok(summary)
}
