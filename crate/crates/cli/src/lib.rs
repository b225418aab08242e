//! `vwlab`: runs the numerical experiments of `vw-core` from a config file and
//! records every output with its SHA-256 digest in `manifest.json`.

pub mod config;
pub mod experiments;
pub mod output;

use rayon::prelude::*;
use serde::Serialize;
use std::path::PathBuf;

use config::{Experiment, RunConfig};
use output::{Outputs, RunManifest, Status, Table};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// `line` is 0 for errors that involve several keys.
    #[error("config line {line}: {message}")]
    ConfigParse { line: usize, message: String },
    #[error("{}: {source}", path.display())]
    IoFailure { path: PathBuf, source: std::io::Error },
    #[error("{} sweep point(s) failed: {}", failed.len(), failed.join("; "))]
    PartialFailure { failed: Vec<String> },
    #[error("{context}: {message}")]
    Solver { context: String, message: String },
}

/// Runs the configured experiment and writes its outputs.
pub fn run(cfg: &RunConfig) -> Result<RunManifest, CliError> {
    let out = experiments::run_experiment(cfg, cfg.experiment)?;
    output::persist(cfg, "run", out, Vec::new())
}

#[derive(Serialize)]
struct SweepPoint {
    value: f64,
    directory: String,
    error: Option<String>,
    failed_checks: usize,
}

#[derive(Serialize)]
struct SweepSummary {
    experiment: Experiment,
    key: String,
    points: Vec<SweepPoint>,
}

/// Name of the directory holding one sweep point.
pub fn point_dir(key: &str, value: f64) -> String {
    format!("{key}-{value}")
}

/// Runs the experiment once per value of `sweep_key` on `jobs` threads.
///
/// Points are sorted by value, so the merged outputs do not depend on the
/// order of `sweep_values` or on scheduling. When some points fail, the others
/// are still written and the result is [`CliError::PartialFailure`].
pub fn sweep(cfg: &RunConfig, jobs: usize) -> Result<RunManifest, CliError> {
    let key = cfg.text("sweep_key").to_string();
    if key.is_empty() {
        return Err(CliError::ConfigParse { line: 0, message: "sweep needs sweep_key and sweep_values".into() });
    }
    let mut values = cfg.reals("sweep_values").to_vec();
    values.sort_by(f64::total_cmp);
    values.dedup();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| CliError::Solver { context: "thread pool".into(), message: e.to_string() })?;
    let results: Vec<Result<Outputs, CliError>> =
        pool.install(|| values.par_iter().map(|&v| run_point(cfg, &key, v)).collect());

    let mut merged = Outputs::default();
    let mut table: Option<Table> = None;
    let mut failed = Vec::new();
    let mut summary = Vec::new();
    let mut disk_sup = Vec::new();
    for (&v, result) in values.iter().zip(results) {
        let dir = point_dir(&key, v);
        match result {
            Ok(mut out) => {
                if let Some(t) = out.table.take() {
                    let merged_table = table.get_or_insert_with(|| {
                        let mut h = vec![key.clone()];
                        h.extend(t.header.iter().cloned());
                        Table { header: h, rows: Vec::new() }
                    });
                    for row in t.rows {
                        if cfg.experiment == Experiment::Disk {
                            disk_sup.extend(row.get(1).and_then(|c| c.parse::<f64>().ok()));
                        }
                        let mut r = vec![vw_core::report::fmt_f64(v)];
                        r.extend(row);
                        merged_table.rows.push(r);
                    }
                }
                summary.push(SweepPoint { value: v, directory: dir.clone(), error: None, failed_checks: out.failed() });
                merged.absorb(&dir, out);
            }
            Err(e) => {
                summary.push(SweepPoint {
                    value: v,
                    directory: dir.clone(),
                    error: Some(e.to_string()),
                    failed_checks: 0,
                });
                failed.push(format!("{dir}: {e}"));
            }
        }
    }
    if key == "disk_r_list" && disk_sup.len() >= 2 {
        let decreasing = disk_sup.windows(2).all(|w| w[1] < w[0]);
        merged.check(
            "sweep/sup_y decreasing in r",
            Status::from_bool(decreasing),
            format!("{} points", disk_sup.len()),
        );
    }
    if let Some(t) = &table {
        merged.file("sweep.csv", t.to_csv());
    }
    merged.file(
        "sweep.json",
        vw_core::report::to_json(&SweepSummary { experiment: cfg.experiment, key: key.clone(), points: summary }),
    );
    let manifest = output::persist(cfg, "sweep", merged, failed.clone())?;
    if failed.is_empty() {
        Ok(manifest)
    } else {
        Err(CliError::PartialFailure { failed })
    }
}

fn run_point(cfg: &RunConfig, key: &str, value: f64) -> Result<Outputs, CliError> {
    let mut p = cfg.clone();
    p.set_real(key, value).map_err(|message| CliError::ConfigParse { line: 0, message })?;
    experiments::run_experiment(&p, p.experiment)
}

/// The full suite with default parameters, written to `output_dir`.
pub fn verify(output_dir: PathBuf) -> Result<RunManifest, CliError> {
    let mut cfg = RunConfig::default();
    cfg.set_output_dir(output_dir);
    let out = experiments::run_experiment(&cfg, Experiment::FullSuite)?;
    output::persist(&cfg, "verify", out, Vec::new())
}
