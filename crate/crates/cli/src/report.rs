//! Reports and their CSV / JSON / whitespace-delimited renderings.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use crate::config::Kind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
    Plot,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
            Format::Plot => "dat",
        }
    }
}

/// One table cell. Missing values serialize as JSON `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cell {
    Int(i64),
    Num(f64),
    Text(String),
    Missing,
}

impl Cell {
    pub fn num(v: f64) -> Cell {
        if v.is_finite() {
            Cell::Num(v)
        } else {
            Cell::Missing
        }
    }
    pub fn opt(v: Option<f64>) -> Cell {
        v.map(Cell::num).unwrap_or(Cell::Missing)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::num(v)
    }
}

impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Cell::Int(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

/// A tolerance check. `value` is compared against `tolerance` by the producer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    /// Passes when `value <= tolerance`.
    pub fn at_most(name: impl Into<String>, value: f64, tolerance: f64) -> Check {
        Check { name: name.into(), value, tolerance, pass: value <= tolerance }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub tool: String,
    pub version: String,
    pub kind: Kind,
    pub seed: u64,
    /// The identity or quantity this experiment evaluates.
    pub identity: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    pub summary: BTreeMap<String, f64>,
    pub checks: Vec<Check>,
}

impl Report {
    pub fn new(kind: Kind, seed: u64, identity: &str, columns: &[&str]) -> Self {
        Report {
            tool: "dualdet".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            kind,
            seed,
            identity: identity.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            summary: BTreeMap::new(),
            checks: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn note(&mut self, key: &str, v: f64) {
        if v.is_finite() {
            self.summary.insert(key.into(), v);
        }
    }

    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// `{:e}` with 16 digits after the point: 17 significant digits.
pub fn fmt_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        "nan".into()
    }
}

fn fmt_cell(c: &Cell, quote: bool) -> String {
    match c {
        Cell::Int(i) => i.to_string(),
        Cell::Num(v) => fmt_float(*v),
        Cell::Text(s) if quote && s.contains([',', '"', ' ']) => format!("\"{}\"", s.replace('"', "\"\"")),
        Cell::Text(s) => s.clone(),
        Cell::Missing => "nan".into(),
    }
}

fn header(report: &Report) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# {} {}", report.tool, report.version);
    let _ = writeln!(s, "# experiment: {}", report.kind);
    let _ = writeln!(s, "# seed: {}", report.seed);
    let _ = writeln!(s, "# identity: {}", report.identity);
    for (k, v) in &report.summary {
        let _ = writeln!(s, "# summary {k} = {}", fmt_float(*v));
    }
    for c in &report.checks {
        let verdict = if c.pass { "PASS" } else { "FAIL" };
        let _ = writeln!(s, "# check {} value = {} tolerance = {} {verdict}", c.name, fmt_float(c.value), fmt_float(c.tolerance));
    }
    s
}

pub fn render(report: &Report, format: Format) -> Result<String> {
    Ok(match format {
        Format::Csv => {
            let mut s = header(report);
            s.push_str(&report.columns.join(","));
            s.push('\n');
            for row in &report.rows {
                let cells: Vec<String> = row.iter().map(|c| fmt_cell(c, true)).collect();
                s.push_str(&cells.join(","));
                s.push('\n');
            }
            s
        }
        Format::Plot => {
            let mut s = header(report);
            let _ = writeln!(s, "# {}", report.columns.join(" "));
            for row in &report.rows {
                let cells: Vec<String> = row.iter().map(|c| fmt_cell(c, false).replace(' ', "_")).collect();
                s.push_str(&cells.join(" "));
                s.push('\n');
            }
            s
        }
        Format::Json => {
            let mut s = serde_json::to_string_pretty(report)?;
            s.push('\n');
            s
        }
    })
}

/// Writes through a temporary file in the destination directory, then renames.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).with_context(|| format!("temporary file in {}", dir.display()))?;
    tmp.write_all(contents.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).with_context(|| format!("renaming onto {}", path.display()))?;
    Ok(())
}

pub fn emit_report(report: &Report, format: Format, path: &Path) -> Result<()> {
    write_atomic(path, &render(report, format)?)
}
