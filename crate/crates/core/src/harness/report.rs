use std::fmt::Write as _;
use std::path::Path;

use super::{HarnessError, Result};

/// Identifies the run that produced a report.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportHeader {
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
}

impl ReportHeader {
    pub fn new(config_hash: impl Into<String>, seed: u64) -> Self {
        Self {
            config_hash: config_hash.into(),
            seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    pub fn line(&self) -> String {
        format!(
            "# config_hash={} seed={} version={}",
            self.config_hash, self.seed, self.version
        )
    }
}

/// Plain CSV with a fixed column list. Cells are written verbatim, so
/// callers keep them free of commas and newlines.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CsvTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.6}")
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

impl CsvTable {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn body(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let _ = writeln!(out, "{}", row.join(","));
        }
        out
    }

    pub fn render(&self, header: &ReportHeader) -> String {
        format!("{}\n{}", header.line(), self.body())
    }

    pub fn write(&self, path: &Path, header: &ReportHeader) -> Result<()> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|source| HarnessError::Io {
                path: dir.display().to_string(),
                source,
            })?;
        }
        std::fs::write(path, self.render(header)).map_err(|source| HarnessError::Io {
            path: path.display().to_string(),
            source,
        })
    }
}

/// Drops `#` comment lines, leaving what must be reproducible.
pub fn csv_body(text: &str) -> String {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| format!("{l}\n"))
        .collect()
}
