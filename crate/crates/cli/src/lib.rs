//! Configuration-driven scenarios for the `afcsim` binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod output;
pub mod pipeline;
pub mod scenarios;

use std::path::{Path, PathBuf};
use std::time::Instant;

pub use afc_core;
pub use config::ScenarioConfig;
pub use output::{Format, Outputs, RunReport};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] afc_core::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 2 for bad input, 3 for numerical failures.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Core(e) if e.is_input_error() => 2,
            CliError::Core(_) => 3,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self.exit_code() {
            2 => "input",
            _ => "numerical",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Figure {
    Fig1b,
    Fig3,
    Fig4a,
    Fig5b,
    Fig5c,
    Table1,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Scenario {
    Budget,
    Echoes,
    Nutation,
    Source,
    Analyze { input: PathBuf },
    Storage,
    Reproduce(Figure),
}

impl Scenario {
    pub fn id(&self) -> String {
        match self {
            Scenario::Budget => "budget".into(),
            Scenario::Echoes => "echoes".into(),
            Scenario::Nutation => "nutation".into(),
            Scenario::Source => "source".into(),
            Scenario::Analyze { .. } => "analyze".into(),
            Scenario::Storage => "storage".into(),
            Scenario::Reproduce(f) => format!("reproduce-{}", format!("{f:?}").to_lowercase()),
        }
    }
}

/// Computes a scenario's outputs without touching the filesystem, except
/// for reading the `analyze` input.
pub fn compute(
    scenario: &Scenario,
    cfg: &ScenarioConfig,
    seed: u64,
    format: Format,
) -> Result<Outputs, CliError> {
    let hash = cfg.hash();
    match scenario {
        Scenario::Budget => scenarios::budget(),
        Scenario::Echoes => scenarios::echoes(cfg),
        Scenario::Nutation => scenarios::nutation(cfg, seed),
        Scenario::Source => scenarios::source(cfg, seed, format, &hash),
        Scenario::Analyze { input } => scenarios::analyze(cfg, input),
        Scenario::Storage => scenarios::storage(cfg, seed),
        Scenario::Reproduce(f) => scenarios::reproduce(*f, cfg, seed),
    }
}

pub struct RunOptions<'a> {
    pub seed: Option<u64>,
    pub out_dir: &'a Path,
    pub format: Format,
    pub threads: Option<usize>,
}

/// Runs a scenario in its own worker pool and writes outputs plus
/// `report.json` into `out_dir`.
pub fn run(
    scenario: &Scenario,
    cfg: &ScenarioConfig,
    opts: &RunOptions,
) -> Result<RunReport, CliError> {
    let start = Instant::now();
    let seed = opts.seed.unwrap_or(cfg.seed);
    let cfg = ScenarioConfig {
        seed,
        scenario: Some(cfg.scenario.clone().unwrap_or_else(|| scenario.id())),
        ..cfg.clone()
    };
    cfg.validate()?;
    let hash = cfg.hash();
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = opts.threads {
        pool = pool.num_threads(n);
    }
    let pool = pool
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    let out = pool.install(|| compute(scenario, &cfg, seed, opts.format))?;
    let outputs = output::write_outputs(opts.out_dir, &out, opts.format, &hash, seed)?;
    let report = RunReport {
        scenario: scenario.id(),
        config_hash: hash,
        seed,
        outputs,
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    output::write_report(opts.out_dir, &report)?;
    Ok(report)
}
