use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum TableFormat {
    Csv,
    Json,
}

/// Numeric table written as CSV or as `{"columns": [...], "rows": [[...]]}`.
#[derive(Clone, Debug, Serialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn with_columns(columns: Vec<String>) -> Self {
        Table { columns, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Vec<f64> {
        let i = self.columns.iter().position(|c| c == name).expect("known column");
        self.rows.iter().map(|r| r[i]).collect()
    }

    fn to_csv(&self) -> String {
        let mut s = self.columns.join(",");
        s.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }
}

#[derive(Serialize)]
struct FileRecord {
    sha256: String,
    bytes: usize,
}

#[derive(Serialize)]
struct InputRecord {
    path: String,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    args: &'a [String],
    seed: u64,
    inputs: &'a [InputRecord],
    outputs: &'a BTreeMap<String, FileRecord>,
}

pub const MANIFEST: &str = "run_manifest.json";

/// Output directory of one command. Every file goes through here so the
/// manifest can hash it.
pub struct OutDir {
    root: PathBuf,
    format: TableFormat,
    files: BTreeMap<String, FileRecord>,
    inputs: Vec<InputRecord>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl OutDir {
    pub fn create(root: &Path, format: TableFormat) -> Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("creating output directory {}", root.display()))?;
        Ok(OutDir {
            root: root.to_path_buf(),
            format,
            files: BTreeMap::new(),
            inputs: Vec::new(),
        })
    }

    /// Reads an input file and records its hash.
    pub fn read_input(&mut self, path: &Path) -> Result<String> {
        let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        self.inputs.push(InputRecord {
            path: path.display().to_string(),
            sha256: sha256_hex(&bytes),
        });
        String::from_utf8(bytes).with_context(|| format!("{} is not UTF-8", path.display()))
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.root.join(name);
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.files.insert(
            name.to_string(),
            FileRecord {
                sha256: sha256_hex(bytes),
                bytes: bytes.len(),
            },
        );
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write_bytes(name, text.as_bytes())
    }

    /// Writes `stem.csv` or `stem.json` depending on the table format.
    pub fn write_table(&mut self, stem: &str, table: &Table) -> Result<()> {
        match self.format {
            TableFormat::Csv => self.write_bytes(&format!("{stem}.csv"), table.to_csv().as_bytes()),
            TableFormat::Json => self.write_json(&format!("{stem}.json"), table),
        }
    }

    pub fn finish(self, command: &str, args: &[String], seed: u64) -> Result<Vec<String>> {
        let manifest = Manifest {
            tool: "odernn-lab",
            version: env!("CARGO_PKG_VERSION"),
            command,
            args,
            seed,
            inputs: &self.inputs,
            outputs: &self.files,
        };
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        let path = self.root.join(MANIFEST);
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        let mut names: Vec<String> = self.files.into_keys().collect();
        names.push(MANIFEST.to_string());
        Ok(names)
    }
}
