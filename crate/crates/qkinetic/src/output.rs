//! Output directory: long-format CSV files and the run manifest.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;

/// Header of every long-format table.
pub const LONG_HEADER: [&str; 5] = ["series", "time", "observable", "index", "value"];

/// One observable value per row. Empty `series`, `time` or `index` cells mean
/// "not applicable".
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub series: Option<u64>,
    pub time: Option<f64>,
    pub observable: &'static str,
    pub index: Option<i64>,
    pub value: f64,
}

impl Row {
    pub fn scalar(observable: &'static str, value: f64) -> Self {
        Self {
            series: None,
            time: None,
            observable,
            index: None,
            value,
        }
    }

    pub fn at(series: u64, time: f64, observable: &'static str, value: f64) -> Self {
        Self {
            series: Some(series),
            time: Some(time),
            observable,
            index: None,
            value,
        }
    }

    pub fn indexed(mut self, index: i64) -> Self {
        self.index = Some(index);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Artifact {
    pub file: String,
    pub bytes: u64,
    pub sha256: String,
}

/// Writes every file of a run below one directory and records its digest.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    artifacts: Vec<Artifact>,
}

fn fmt_opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Shortest round-trip form; scientific outside `[1e-4, 1e15)`.
pub fn fmt_value(x: f64) -> String {
    let a = x.abs();
    if a != 0.0 && a.is_finite() && !(1e-4..1e15).contains(&a) {
        format!("{x:e}")
    } else {
        x.to_string()
    }
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
        Ok(Self {
            root: root.to_path_buf(),
            artifacts: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn artifacts(&self) -> &[Artifact] {
        &self.artifacts
    }

    /// Writes `bytes` to `name`, a bare file name inside the directory.
    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        assert!(
            !name.contains(['/', '\\']) && name != ".." && name != ".",
            "output names are plain file names"
        );
        let path = self.root.join(name);
        fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
        self.artifacts.push(Artifact {
            file: name.to_string(),
            bytes: bytes.len() as u64,
            sha256: hex::encode(Sha256::digest(bytes)),
        });
        Ok(())
    }

    pub fn write_long(&mut self, name: &str, rows: &[Row]) -> Result<(), CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let csv_err = |e: csv::Error| CliError::Output(e.to_string());
        w.write_record(LONG_HEADER).map_err(csv_err)?;
        for r in rows {
            w.write_record([
                fmt_opt(r.series),
                r.time.map(fmt_value).unwrap_or_default(),
                r.observable.to_string(),
                fmt_opt(r.index),
                fmt_value(r.value),
            ])
            .map_err(csv_err)?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| CliError::Output(e.to_string()))?;
        self.write(name, &bytes)
    }

    /// Writes a table with its own header (lookup tables, not time series).
    pub fn write_table(
        &mut self,
        name: &str,
        header: &[&str],
        rows: &[Vec<String>],
    ) -> Result<(), CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let csv_err = |e: csv::Error| CliError::Output(e.to_string());
        w.write_record(header).map_err(csv_err)?;
        for r in rows {
            w.write_record(r).map_err(csv_err)?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| CliError::Output(e.to_string()))?;
        self.write(name, &bytes)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut bytes =
            serde_json::to_vec_pretty(value).map_err(|e| CliError::Output(e.to_string()))?;
        bytes.push(b'\n');
        self.write(name, &bytes)
    }
}

#[derive(Debug, Serialize)]
pub struct Manifest<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub core_version: &'static str,
    pub command: &'static str,
    pub seed: u64,
    pub seed_source: &'static str,
    pub threads: usize,
    /// Resolved configuration; rerunning it reproduces the CSV files.
    pub config: &'a crate::config::RunConfig,
    pub wall_time_seconds: f64,
    pub outputs: &'a [Artifact],
    pub diagnostics: serde_json::Value,
}
