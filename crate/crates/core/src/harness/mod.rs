//! Config-driven Monte Carlo runs.
//!
//! A run lays out its output directory as
//!
//! ```text
//! out_dir/config.json
//! out_dir/trials/trial_{k}.csv    spectrum (or Dyson sweep) of trial k
//! out_dir/trials/trial_{k}.json   outcome or error of trial k
//! out_dir/summary.json
//! out_dir/plots/                  written by `export`
//! ```
//!
//! Trials whose JSON file already exists are not run again. The summary is
//! built from the JSON files read back in index order, so it does not depend
//! on the worker count or on interruptions. Wall time is logged, never stored.

mod config;
mod export;
mod summary;
mod trial;

pub use config::{Assertion, ExperimentConfig, ExperimentKind, GridSpec, Prepared, Tolerances};
pub use export::{
    export, read_spectrum_csv, render_svg, ExportFiles, BOUNDARY_POINTS, SUMMARY_SCHEMA,
    SUMMARY_SCHEMA_FILE,
};
pub use summary::{
    summarize, wilson_interval, AssertionOutcome, ExperimentSummary, Rate, TrialFailure,
};
pub use trial::{isotropic_grid, probe_pair, run_trial, TrialData, TrialOutcome, TrialRecord};

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::dyson::write_sweep_csv;
use crate::{Error, Result};

pub const CONFIG_FILE: &str = "config.json";
pub const SUMMARY_FILE: &str = "summary.json";
/// Overrides the worker count when no explicit count is given.
pub const WORKERS_ENV: &str = "EOLAB_WORKERS";

pub fn trial_csv_path(out_dir: &Path, trial: u64) -> PathBuf {
    out_dir.join("trials").join(format!("trial_{trial}.csv"))
}

pub fn trial_json_path(out_dir: &Path, trial: u64) -> PathBuf {
    out_dir.join("trials").join(format!("trial_{trial}.json"))
}

/// Explicit count, else `EOLAB_WORKERS`, else the number of CPUs.
pub fn resolve_workers(explicit: Option<usize>) -> Result<usize> {
    if let Some(w) = explicit {
        return if w == 0 {
            Err(Error::InvalidConfig("workers must be at least 1".into()))
        } else {
            Ok(w)
        };
    }
    if let Ok(v) = std::env::var(WORKERS_ENV) {
        return match v.trim().parse::<usize>() {
            Ok(w) if w > 0 => Ok(w),
            _ => Err(Error::InvalidConfig(format!(
                "{WORKERS_ENV} must be a positive integer, got {v:?}"
            ))),
        };
    }
    Ok(std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Sizes the global rayon pool (first call wins) and keeps the dense
/// backend sequential, for callers outside [`run`].
pub fn configure_global_pool(workers: usize) -> Result<()> {
    faer::set_global_parallelism(faer::Par::Seq);
    if let Err(e) = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build_global()
    {
        log::debug!("global pool already configured: {e}");
    }
    Ok(())
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub workers: Option<usize>,
    /// Takes precedence over the directory named in the config.
    pub out_dir: Option<PathBuf>,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub summary: ExperimentSummary,
    pub out_dir: PathBuf,
    /// Trials executed by this call; the rest were already on disk.
    pub executed: Vec<u64>,
    pub wall_time: Duration,
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn persist_trial(out_dir: &Path, data: &TrialData) -> Result<()> {
    let t = data.record.trial_index;
    let mut csv = Vec::new();
    if !data.sweep.is_empty() {
        write_sweep_csv(&mut csv, &data.sweep)?;
    } else {
        let mut w = BufWriter::new(&mut csv);
        writeln!(w, "trial,re,im")?;
        for z in &data.spectrum {
            writeln!(w, "{t},{},{}", z.re, z.im)?;
        }
        w.flush()?;
    }
    write_atomic(&trial_csv_path(out_dir, t), &csv)?;
    // the JSON file marks the trial as complete, so it goes last
    let json = serde_json::to_string_pretty(&data.record)? + "\n";
    write_atomic(&trial_json_path(out_dir, t), json.as_bytes())
}

fn load_record(out_dir: &Path, trial: u64) -> Option<TrialRecord> {
    if !trial_csv_path(out_dir, trial).exists() {
        return None;
    }
    let text = fs::read_to_string(trial_json_path(out_dir, trial)).ok()?;
    let record: TrialRecord = serde_json::from_str(&text).ok()?;
    (record.trial_index == trial).then_some(record)
}

/// Runs every missing trial, then writes `summary.json`.
///
/// Configuration problems are reported before anything is sampled; a trial
/// that fails numerically is recorded and the batch continues.
pub fn run(config: &ExperimentConfig, opts: &RunOptions) -> Result<RunOutput> {
    let start = Instant::now();
    let prepared = config.prepare()?;
    let out_dir = opts
        .out_dir
        .clone()
        .or_else(|| config.out_dir.clone())
        .ok_or_else(|| Error::InvalidConfig("no output directory given".into()))?;
    let workers = resolve_workers(opts.workers)?;
    faer::set_global_parallelism(faer::Par::Seq);

    fs::create_dir_all(out_dir.join("trials"))?;
    let mut stored = config.clone();
    stored.out_dir = None;
    let config_json = stored.to_json()?;
    let config_path = out_dir.join(CONFIG_FILE);
    if config_path.exists() {
        let existing = ExperimentConfig::from_path(&config_path)?;
        if existing != stored {
            return Err(Error::InvalidConfig(format!(
                "{} holds a different experiment",
                out_dir.display()
            )));
        }
    } else {
        write_atomic(&config_path, config_json.as_bytes())?;
    }

    let total = config.trial_count();
    let missing: Vec<u64> = (0..total)
        .filter(|&t| load_record(&out_dir, t).is_none())
        .collect();
    log::info!(
        "{}: {} of {total} trials to run on {workers} workers",
        config.kind.name(),
        missing.len()
    );
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    pool.install(|| {
        missing.par_iter().try_for_each(|&t| {
            let data = run_trial(&prepared, t);
            persist_trial(&out_dir, &data)
        })
    })?;

    let records = (0..total)
        .map(|t| {
            load_record(&out_dir, t)
                .ok_or_else(|| Error::InvalidConfig(format!("trial {t} missing after the run")))
        })
        .collect::<Result<Vec<_>>>()?;
    let summary = summarize(&prepared, &records);
    write_atomic(&out_dir.join(SUMMARY_FILE), summary.to_json()?.as_bytes())?;
    let wall_time = start.elapsed();
    log::info!("{} finished in {:.1?}", config.kind.name(), wall_time);
    Ok(RunOutput {
        summary,
        out_dir,
        executed: missing,
        wall_time,
    })
}
