//! Scenario runner: configuration, deterministic parallel execution,
//! calibration of envelope multipliers, scaling fits and file outputs.
//!
//! ```no_run
//! use orlicz_lab::harness::{self, ExperimentConfig};
//! let cfg = ExperimentConfig::load("configs/phase2.toml".as_ref())?;
//! let out = harness::run(&cfg, Some(1))?;
//! harness::write_outputs("out".as_ref(), &cfg, &out)?;
//! # Ok::<(), orlicz_lab::Error>(())
//! ```

pub mod config;
pub mod records;
mod report;
pub mod scenarios;

use std::path::Path;

use rayon::prelude::*;

pub use config::{ExperimentConfig, Scenario, Settings, SEED_ENV};
pub use records::{
    calibrate_constants, evaluate_held_out, fit_loglog, read_records, scaling_fit, split_by_trial, write_records, Fit, HeldOut, Record,
};
pub use report::{Calibration, GroupQuantile, NamedFit, PassRate, Summary, MIN_CALIBRATION_TRIALS};

use crate::error::{Error, Result};
use scenarios::DimContext;

/// Records in `(n, k, trial)` order plus the derived summary.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub records: Vec<Record>,
    pub summary: Summary,
}

/// Run a validated configuration on a pool of `threads` workers (all cores
/// when `None`). Output does not depend on the thread count.
pub fn run(config: &ExperimentConfig, threads: Option<usize>) -> Result<RunOutput> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| {
        let contexts = config.dims.iter().map(|&n| DimContext::prepare(config, n, config.seed)).collect::<Result<Vec<_>>>()?;
        let items: Vec<(usize, usize)> = (0..contexts.len()).flat_map(|c| (0..config.trials).map(move |t| (c, t))).collect();
        let chunks: Vec<Result<Vec<Record>>> = items.par_iter().map(|&(c, t)| scenarios::run_item(config, &contexts[c], t)).collect();
        let mut records = Vec::new();
        for chunk in chunks {
            records.extend(chunk?);
        }
        records.sort_by_key(|r| (r.n, r.k, r.trial));
        let summary = report::summarize(config, &contexts, &records);
        Ok(RunOutput { records, summary })
    })
}

/// Write `records.csv`, `summary.json`, `config.toml` and `plots/` under `dir`.
pub fn write_outputs(dir: &Path, config: &ExperimentConfig, out: &RunOutput) -> Result<()> {
    std::fs::create_dir_all(dir.join("plots"))?;
    write_records(std::fs::File::create(dir.join("records.csv"))?, &out.records)?;
    std::fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&out.summary)?)?;
    std::fs::write(dir.join("config.toml"), config.to_toml()?)?;
    report::write_plots(&dir.join("plots"), config, &out.summary)
}
