//! Writing result files: CSV bodies, their JSON rendering, atomic
//! replacement and the run manifest.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::config::{ExperimentConfig, Format};
use crate::CliError;

/// A named CSV body, header line first.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvFile {
    pub stem: String,
    pub body: String,
}

impl CsvFile {
    pub fn new(stem: &str, body: String) -> Self {
        Self {
            stem: stem.into(),
            body,
        }
    }

    pub fn from_writer(
        stem: &str,
        write: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>,
    ) -> Result<Self, CliError> {
        let mut buf = Vec::new();
        write(&mut buf).map_err(|e| CliError::Runtime(e.to_string()))?;
        let body = String::from_utf8(buf).map_err(|e| CliError::Runtime(e.to_string()))?;
        Ok(Self::new(stem, body))
    }

    pub fn rows(&self) -> usize {
        self.body.lines().count().saturating_sub(1)
    }
}

/// Builds a CSV body row by row.
#[derive(Debug, Default)]
pub struct CsvBuilder {
    body: String,
}

impl CsvBuilder {
    pub fn new(header: &[&str]) -> Self {
        let mut body = header.join(",");
        body.push('\n');
        Self { body }
    }

    pub fn row<I, T>(&mut self, cells: I)
    where
        I: IntoIterator<Item = T>,
        T: std::fmt::Display,
    {
        let line: Vec<String> = cells.into_iter().map(|c| c.to_string()).collect();
        self.body.push_str(&line.join(","));
        self.body.push('\n');
    }

    pub fn finish(self, stem: &str) -> CsvFile {
        CsvFile::new(stem, self.body)
    }
}

/// Renders an optional value, empty when absent.
pub fn opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

/// Parses a CSV body into JSON records. Numeric cells become numbers and
/// empty cells `null`.
pub fn csv_to_json(body: &str) -> Value {
    let mut lines = body.lines();
    let header: Vec<&str> = lines
        .next()
        .map(|h| h.split(',').collect())
        .unwrap_or_default();
    let records = lines
        .map(|line| {
            let mut obj = Map::new();
            for (key, cell) in header.iter().zip(line.split(',')) {
                obj.insert((*key).to_string(), cell_value(cell));
            }
            Value::Object(obj)
        })
        .collect();
    Value::Array(records)
}

fn cell_value(cell: &str) -> Value {
    if cell.is_empty() {
        return Value::Null;
    }
    if let Ok(i) = cell.parse::<i64>() {
        return Value::from(i);
    }
    match cell.parse::<f64>() {
        Ok(x) if x.is_finite() => Value::from(x),
        _ => Value::from(cell),
    }
}

/// Writes `bytes` to `dir/name` through a temporary sibling and a rename.
pub fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
    let target = dir.join(name);
    let tmp = dir.join(format!(".{name}.tmp"));
    let io = |e: std::io::Error| CliError::Runtime(format!("writing {}: {e}", target.display()));
    fs::write(&tmp, bytes).map_err(io)?;
    fs::rename(&tmp, &target).map_err(io)?;
    Ok(target)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct FileRecord {
    pub name: String,
    pub rows: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest<'a> {
    pub config: &'a ExperimentConfig,
    pub seed: u64,
    pub version: &'static str,
    pub wall_time_seconds: f64,
    pub files: Vec<FileRecord>,
    pub summary: &'a Value,
}

/// Writes every table in the configured format, plus `summary.json`, and
/// returns the file records for the manifest.
pub fn write_outputs(
    cfg: &ExperimentConfig,
    tables: &[CsvFile],
    summary: &Value,
) -> Result<Vec<FileRecord>, CliError> {
    fs::create_dir_all(&cfg.out_dir)
        .map_err(|e| CliError::Runtime(format!("creating {}: {e}", cfg.out_dir.display())))?;
    let mut records = Vec::with_capacity(tables.len() + 1);
    for t in tables {
        let (name, bytes) = match cfg.format {
            Format::Csv => (format!("{}.csv", t.stem), t.body.clone().into_bytes()),
            Format::Json => (format!("{}.json", t.stem), pretty(&csv_to_json(&t.body))),
        };
        write_atomic(&cfg.out_dir, &name, &bytes)?;
        records.push(FileRecord {
            name,
            rows: t.rows(),
            sha256: sha256_hex(&bytes),
        });
    }
    let bytes = pretty(summary);
    write_atomic(&cfg.out_dir, "summary.json", &bytes)?;
    records.push(FileRecord {
        name: "summary.json".into(),
        rows: 0,
        sha256: sha256_hex(&bytes),
    });
    Ok(records)
}

pub fn write_manifest(cfg: &ExperimentConfig, manifest: &Manifest<'_>) -> Result<(), CliError> {
    write_atomic(&cfg.out_dir, "manifest.json", &pretty(manifest))?;
    Ok(())
}

fn pretty<T: Serialize + ?Sized>(v: &T) -> Vec<u8> {
    let mut s = serde_json::to_vec_pretty(v).expect("values serialize");
    s.push(b'\n');
    s
}
