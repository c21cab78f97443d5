//! Run manifests and CSV tables.
//!
//! Every CSV starts with `#` comment lines describing the run (command,
//! parameters, seed, tool version, output names), followed by the header and
//! rows. Nothing time- or host-dependent goes in, so equal manifests give
//! byte-identical files.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{ensure, Context, Result};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunManifest {
    pub command: String,
    pub params: BTreeMap<String, String>,
    pub seed: u64,
    pub version: String,
    /// Output file names, relative to the output directory.
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str, seed: u64) -> RunManifest {
        RunManifest {
            command: command.to_string(),
            params: BTreeMap::new(),
            seed,
            version: TOOL_VERSION.to_string(),
            outputs: Vec::new(),
        }
    }

    pub fn param(mut self, key: &str, value: impl Display) -> RunManifest {
        self.params.insert(key.to_string(), value.to_string());
        self
    }

    pub fn output(mut self, name: &str) -> RunManifest {
        self.outputs.push(name.to_string());
        self
    }

    pub fn header_lines(&self) -> Vec<String> {
        let mut lines = vec![
            format!("# thinlab {}", self.version),
            format!("# command: {}", self.command),
            format!("# seed: {}", self.seed),
        ];
        lines.extend(self.params.iter().map(|(k, v)| format!("# param {k}={v}")));
        lines.extend(self.outputs.iter().map(|o| format!("# output: {o}")));
        lines
    }
}

/// A CSV table with string cells.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Table {
        Table { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Values of a numeric column.
    pub fn numbers(&self, name: &str) -> Result<Vec<f64>> {
        let k = self.column(name).with_context(|| format!("no column {name}"))?;
        self.rows.iter().map(|r| r[k].parse::<f64>().with_context(|| format!("cell {:?}", r[k]))).collect()
    }

    /// The CSV text, manifest header included.
    pub fn render(&self, manifest: &RunManifest) -> Result<String> {
        let mut out = String::new();
        for line in manifest.header_lines() {
            out.push_str(&line);
            out.push('\n');
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        out.push_str(std::str::from_utf8(&w.into_inner()?)?);
        Ok(out)
    }
}

/// Reads a table written by [`Table::render`], skipping comment lines.
pub fn read_table(path: &Path) -> Result<Table> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let columns = reader.headers()?.iter().map(str::to_string).collect();
    let rows = reader.records().map(|r| Ok(r?.iter().map(str::to_string).collect())).collect::<Result<_>>()?;
    Ok(Table { columns, rows })
}

/// Writes `table` as `dir/name` and returns the path.
pub fn write_table(dir: &Path, name: &str, manifest: &RunManifest, table: &Table) -> Result<PathBuf> {
    ensure!(manifest.outputs.iter().any(|o| o == name), "output {name} missing from the manifest");
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    fs::write(&path, table.render(manifest)?).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}
