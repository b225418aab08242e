//! Collected outputs of a run and the manifest that lists them.

use serde::Serialize;
use sha2::{Digest, Sha256};
use std::fs;
use std::path::Path;

use crate::config::RunConfig;
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Pass,
    Fail,
    /// Fails its nominal tolerance for a documented, analyzed reason.
    KnownFail,
}

impl Status {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Status::Pass
        } else {
            Status::Fail
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::KnownFail => "FAIL (known)",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub status: Status,
    pub detail: String,
}

/// A table with a header row; cells are already formatted.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.join(","));
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Timing {
    pub operation: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Default)]
pub struct Outputs {
    /// Relative path and contents, in insertion order.
    pub files: Vec<(String, Vec<u8>)>,
    pub checks: Vec<Check>,
    pub timings: Vec<Timing>,
    /// Main result table of an experiment, merged across sweep points.
    pub table: Option<Table>,
}

impl Outputs {
    pub fn file(&mut self, path: impl Into<String>, contents: impl Into<Vec<u8>>) {
        self.files.push((path.into(), contents.into()));
    }

    pub fn check(&mut self, name: &str, status: Status, detail: String) {
        self.checks.push(Check { name: name.into(), status, detail });
    }

    pub fn timed<T>(&mut self, operation: &str, f: impl FnOnce() -> T) -> T {
        let t = std::time::Instant::now();
        let v = f();
        self.timings.push(Timing { operation: operation.into(), seconds: t.elapsed().as_secs_f64() });
        v
    }

    /// Moves everything from `other` under the directory `prefix`.
    pub fn absorb(&mut self, prefix: &str, other: Outputs) {
        let join = |s: &str| if prefix.is_empty() { s.to_string() } else { format!("{prefix}/{s}") };
        self.files.extend(other.files.into_iter().map(|(p, c)| (join(&p), c)));
        self.checks.extend(other.checks.into_iter().map(|c| Check { name: join(&c.name), ..c }));
        self.timings.extend(other.timings.into_iter().map(|t| Timing { operation: join(&t.operation), ..t }));
    }

    pub fn failed(&self) -> usize {
        self.checks.iter().filter(|c| c.status == Status::Fail).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub artifact: String,
    pub version: String,
    pub command: String,
    pub config: Vec<(String, String)>,
    pub timings: Vec<Timing>,
    pub files: Vec<FileDigest>,
    pub checks: Vec<Check>,
    /// Sweep points that raised an error instead of producing results.
    pub failed_points: Vec<String>,
}

impl RunManifest {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.status != Status::Fail)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

fn io_err(path: &Path, source: std::io::Error) -> CliError {
    CliError::IoFailure { path: path.to_path_buf(), source }
}

/// Writes every file and `manifest.json` under the config's output directory.
pub fn persist(
    cfg: &RunConfig,
    command: &str,
    out: Outputs,
    failed_points: Vec<String>,
) -> Result<RunManifest, CliError> {
    let dir = &cfg.output_dir;
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let mut files = Vec::with_capacity(out.files.len());
    for (rel, contents) in &out.files {
        let path = dir.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
        }
        fs::write(&path, contents).map_err(|e| io_err(&path, e))?;
        files.push(FileDigest { path: rel.clone(), sha256: sha256_hex(contents), bytes: contents.len() });
    }
    files.sort_by(|a, b| a.path.cmp(&b.path));
    let manifest = RunManifest {
        artifact: "vwlab".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: command.into(),
        config: cfg.snapshot(),
        timings: out.timings,
        files,
        checks: out.checks,
        failed_points,
    };
    let path = dir.join("manifest.json");
    fs::write(&path, vw_core::report::to_json(&manifest)).map_err(|e| io_err(&path, e))?;
    Ok(manifest)
}
