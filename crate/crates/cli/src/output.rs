//! Report files: CSV tables with a commented provenance header, plus a
//! `summary.json` that carries no timestamp.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use cobound::fieldsim::SCHEME_ID;
use serde::Serialize;
use serde_json::Value;

use crate::config::ResolvedConfig;
use crate::error::{CliError, CliResult};

/// A named CSV table.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Table {
            name: name.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

/// Everything a command produced.
#[derive(Debug, Clone, Default)]
pub struct Report {
    pub tables: Vec<Table>,
    /// Raw text files written verbatim (name, contents).
    pub files: Vec<(String, String)>,
    pub summary: serde_json::Map<String, Value>,
    /// Checks the command expected to hold but did not.
    pub violations: Vec<String>,
}

impl Report {
    pub fn insert(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).unwrap_or(Value::Null);
        self.summary.insert(key.to_string(), v);
    }

    pub fn violation(&mut self, message: impl Into<String>) {
        self.violations.push(message.into());
    }
}

/// Shortest round-trip form, switching to exponent notation far from 1.
pub fn num(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || !x.is_finite() || (1e-4..1e15).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

pub fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub fn block(n: &[i64]) -> String {
    n.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("x")
}

fn header(config: &ResolvedConfig) -> String {
    let stamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let mut out = format!(
        "# cobound {} {}\n# timestamp-unix: {stamp}\n# rng-scheme: {SCHEME_ID}\n# seed: {}\n# config:\n",
        config.command.token(),
        env!("CARGO_PKG_VERSION"),
        config.seed
    );
    for line in config.to_toml().lines() {
        if line.is_empty() {
            out.push_str("#\n");
        } else {
            out.push_str("#   ");
            out.push_str(line);
            out.push('\n');
        }
    }
    out
}

fn write(path: &Path, contents: &str) -> CliResult<()> {
    fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Write every table, raw file and the summary into `dir`.
pub fn write_report(dir: &Path, config: &ResolvedConfig, report: &Report) -> CliResult<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    let head = header(config);
    let mut written = Vec::new();
    for table in &report.tables {
        let mut text = head.clone();
        text.push_str(&table.columns.join(","));
        text.push('\n');
        for row in &table.rows {
            text.push_str(&row.join(","));
            text.push('\n');
        }
        let path = dir.join(format!("{}.csv", table.name));
        write(&path, &text)?;
        written.push(path);
    }
    for (name, contents) in &report.files {
        let path = dir.join(name);
        write(&path, contents)?;
        written.push(path);
    }
    let summary = serde_json::json!({
        "command": config.command.token(),
        "seed": config.seed,
        "rng_scheme": SCHEME_ID,
        "config": config,
        "status": if report.violations.is_empty() { "ok" } else { "violation" },
        "violations": report.violations,
        "results": report.summary,
    });
    let path = dir.join("summary.json");
    let text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    write(&path, &(text + "\n"))?;
    written.push(path);
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for x in [0.0, 1.5, -2.25e-9, 3.0e20, 123456.789, f64::MIN_POSITIVE] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(num(1e-300), "1e-300");
        assert_eq!(block(&[4, 8]), "4x8");
    }
}
