//! Run-report serialization.
//!
//! Every artifact embeds the resolved config, the seed, and a schema version,
//! so a run can be reproduced from its output alone. Writes go through a
//! temp-file-plus-rename so a failed run never leaves partial output, and the
//! byte stream is a pure function of the report (no timestamps unless asked
//! for).

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::sampler::FieldSample;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("failed writing {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Top-level envelope shared by all JSON outputs.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport<C: Serialize, R: Serialize> {
    pub schema_version: u32,
    pub command: String,
    pub config: C,
    pub results: R,
    pub diagnostics: serde_json::Map<String, serde_json::Value>,
    pub seed: u64,
}

impl<C: Serialize, R: Serialize> RunReport<C, R> {
    pub fn new(command: &str, config: C, results: R, seed: u64) -> Self {
        RunReport {
            schema_version: SCHEMA_VERSION,
            command: command.to_string(),
            config,
            results,
            diagnostics: serde_json::Map::new(),
            seed,
        }
    }

    pub fn diagnostic(mut self, key: &str, value: serde_json::Value) -> Self {
        self.diagnostics.insert(key.to_string(), value);
        self
    }
}

fn atomic_write(path: &Path, bytes: &[u8]) -> Result<(), ReportError> {
    let io = |source| ReportError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    let mut f = fs::File::create(&tmp).map_err(io)?;
    f.write_all(bytes).map_err(io)?;
    f.sync_all().map_err(io)?;
    drop(f);
    fs::rename(&tmp, path).map_err(io)
}

/// Serializes any report as pretty JSON; struct field order fixes the byte
/// stream, so identical reports give identical files.
pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<(), ReportError> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    atomic_write(path, &bytes)
}

pub fn to_json_string<T: Serialize>(value: &T) -> Result<String, ReportError> {
    Ok(serde_json::to_string_pretty(value)?)
}

/// CSV of a sample batch: one row per realization, one value column per grid
/// point, point coordinates encoded in the header labels.
pub fn sample_to_csv(sample: &FieldSample) -> String {
    let mut out = String::from("sample");
    for p in &sample.points {
        let coords: Vec<String> = p.x().iter().map(|v| format!("{v}")).collect();
        out.push_str(&format!(",u(t={};x={})", p.t, coords.join(";")));
    }
    out.push('\n');
    for s in 0..sample.values.nrows() {
        out.push_str(&format!("{s}"));
        for j in 0..sample.values.ncols() {
            out.push_str(&format!(",{}", sample.values[(s, j)]));
        }
        out.push('\n');
    }
    out
}

/// CSV of the J-versus-epsilon table: header row of epsilon levels, one row
/// per realization.
pub fn j_table_to_csv(epsilons: &[f64], j_values: &[Vec<f64>]) -> String {
    let mut out = String::from("sample");
    for e in epsilons {
        out.push_str(&format!(",J(eps={e})"));
    }
    out.push('\n');
    for (s, row) in j_values.iter().enumerate() {
        out.push_str(&format!("{s}"));
        for v in row {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    out
}

pub fn write_csv(csv: &str, path: &Path) -> Result<(), ReportError> {
    atomic_write(path, csv.as_bytes())
}
