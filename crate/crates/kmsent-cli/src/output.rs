//! Buffered run artifacts: CSV tables and JSON reports.
//!
//! A run accumulates everything in memory and only touches the filesystem
//! after it has fully succeeded, so a failed run never leaves partial files
//! behind.

use std::fs;
use std::path::Path;

use crate::error::{CliError, Result};

pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

#[derive(Default)]
pub struct RunOutput {
    pub artifacts: Vec<Artifact>,
    /// Human-readable lines for stdout (suppressed by --quiet).
    pub summary: Vec<String>,
}

impl RunOutput {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push_csv(&mut self, name: &str, table: CsvTable) {
        self.artifacts.push(Artifact {
            name: name.to_string(),
            bytes: table.finish(),
        });
    }

    pub fn push_json(&mut self, name: &str, value: serde_json::Value) {
        let mut bytes = serde_json::to_vec_pretty(&value).expect("plain data encodes");
        bytes.push(b'\n');
        self.artifacts.push(Artifact {
            name: name.to_string(),
            bytes,
        });
    }

    pub fn note(&mut self, line: String) {
        self.summary.push(line);
    }

    pub fn write_all(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| {
            CliError::Invalid(format!("output directory {}: {e}", dir.display()))
        })?;
        for artifact in &self.artifacts {
            let path = dir.join(&artifact.name);
            fs::write(&path, &artifact.bytes)
                .map_err(|e| CliError::Invalid(format!("writing {}: {e}", path.display())))?;
        }
        Ok(())
    }
}

/// RFC 4180-style CSV: CRLF row endings, no quoting needed because every
/// field is a number or a bare word.
pub struct CsvTable {
    buf: String,
    columns: usize,
}

impl CsvTable {
    pub fn new(header: &[&str]) -> Self {
        let mut table = CsvTable {
            buf: String::new(),
            columns: header.len(),
        };
        table.raw_row(header.iter().map(|s| s.to_string()));
        table
    }

    pub fn row(&mut self, fields: &[String]) {
        assert_eq!(fields.len(), self.columns, "csv row width");
        self.raw_row(fields.iter().cloned());
    }

    fn raw_row(&mut self, fields: impl Iterator<Item = String>) {
        let mut first = true;
        for field in fields {
            if !first {
                self.buf.push(',');
            }
            first = false;
            self.buf.push_str(&field);
        }
        self.buf.push_str("\r\n");
    }

    pub fn finish(self) -> Vec<u8> {
        self.buf.into_bytes()
    }
}

/// Shortest round-trip scientific form: byte-identical across reruns and
/// exact to re-parse.
pub fn num(x: f64) -> String {
    format!("{x:e}")
}
