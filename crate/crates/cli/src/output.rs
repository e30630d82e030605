//! Result files and the run report. Every file carries the config hash.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// A plot-ready table.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<&Value>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| &r[i]).collect())
    }
}

/// Tables plus a JSON summary produced by one scenario.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Outputs {
    pub tables: Vec<Table>,
    pub summary: serde_json::Map<String, Value>,
    /// Extra files written verbatim, `(name, bytes)`.
    pub raw: Vec<(String, Vec<u8>)>,
}

impl Outputs {
    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn set(&mut self, key: &str, value: impl Serialize) {
        self.summary.insert(
            key.into(),
            serde_json::to_value(value).expect("summary value serialises"),
        );
    }
}

fn cell(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => String::new(),
        other => other.to_string(),
    }
}

fn render_csv(t: &Table, hash: &str) -> String {
    let mut s = format!("# config_hash: {hash}\n{}\n", t.columns.join(","));
    for r in &t.rows {
        let cells: Vec<String> = r.iter().map(cell).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}

fn render_json(t: &Table, hash: &str) -> String {
    let rows: Vec<Value> = t
        .rows
        .iter()
        .map(|r| Value::Object(t.columns.iter().cloned().zip(r.iter().cloned()).collect()))
        .collect();
    let v = json!({ "config_hash": hash, "table": t.name, "rows": rows });
    serde_json::to_string_pretty(&v).expect("json") + "\n"
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputFile {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub scenario: String,
    pub config_hash: String,
    pub seed: u64,
    pub outputs: Vec<OutputFile>,
    /// Excluded from reproducibility comparisons.
    pub wall_time_s: f64,
}

pub const REPORT_FILE: &str = "report.json";

fn write(
    dir: &Path,
    name: &str,
    bytes: &[u8],
    manifest: &mut Vec<OutputFile>,
) -> Result<(), CliError> {
    let path: PathBuf = dir.join(name);
    fs::write(&path, bytes)?;
    manifest.push(OutputFile {
        path: name.into(),
        sha256: hex::encode(Sha256::digest(bytes)),
    });
    Ok(())
}

/// Writes all outputs into `dir` and returns the manifest.
pub fn write_outputs(
    dir: &Path,
    out: &Outputs,
    format: Format,
    hash: &str,
    seed: u64,
) -> Result<Vec<OutputFile>, CliError> {
    fs::create_dir_all(dir)?;
    let mut manifest = Vec::new();
    for t in &out.tables {
        match format {
            Format::Csv => write(
                dir,
                &format!("{}.csv", t.name),
                render_csv(t, hash).as_bytes(),
                &mut manifest,
            )?,
            Format::Json => write(
                dir,
                &format!("{}.json", t.name),
                render_json(t, hash).as_bytes(),
                &mut manifest,
            )?,
        }
    }
    for (name, bytes) in &out.raw {
        write(dir, name, bytes, &mut manifest)?;
    }
    let mut summary = out.summary.clone();
    summary.insert("config_hash".into(), Value::String(hash.into()));
    summary.insert("seed".into(), json!(seed));
    let text = serde_json::to_string_pretty(&Value::Object(summary)).expect("json") + "\n";
    write(dir, "summary.json", text.as_bytes(), &mut manifest)?;
    Ok(manifest)
}

pub fn write_report(dir: &Path, report: &RunReport) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(report).expect("json") + "\n";
    fs::write(dir.join(REPORT_FILE), text)?;
    Ok(())
}
