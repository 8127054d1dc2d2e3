//! Versioned CSV/JSON artifacts and atomic file writes.
//!
//! CSV layout: a `# schema=1` line, `# key=value` metadata lines (tool
//! version, resolved config), then a header row and data rows. The body (the
//! non-comment lines) is a pure function of the config. Wall-clock metadata
//! goes to a `<path>.meta.json` sidecar instead.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// A rectangular table with metadata.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub meta: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Self {
            meta: Vec::new(),
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Cell by row and column name.
    pub fn get(&self, row: usize, name: &str) -> Option<&str> {
        let j = self.column(name)?;
        self.rows.get(row)?.get(j).map(String::as_str)
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn to_csv(&self) -> String {
        let mut s = format!("# schema={SCHEMA_VERSION}\n");
        for (k, v) in &self.meta {
            s.push_str(&format!("# {k}={v}\n"));
        }
        s.push_str(&self.columns.join(","));
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        s
    }

    /// Parses CSV produced by [`Table::to_csv`]. Files without a schema line,
    /// or with a different schema version, are rejected.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let first = lines.next().unwrap_or("");
        let version = first
            .strip_prefix("# schema=")
            .ok_or_else(|| Error::Schema("missing '# schema=' header".to_string()))?;
        if version.trim() != SCHEMA_VERSION.to_string() {
            return Err(Error::Schema(format!("schema version {version} is not supported")));
        }
        let mut t = Table::default();
        let mut header = false;
        for line in lines {
            if let Some(c) = line.strip_prefix('#') {
                if let Some((k, v)) = c.trim_start().split_once('=') {
                    t.meta.push((k.to_string(), v.to_string()));
                }
                continue;
            }
            let cells: Vec<String> = line.split(',').map(String::from).collect();
            if !header {
                t.columns = cells;
                header = true;
            } else if cells.len() != t.columns.len() {
                return Err(Error::Schema(format!(
                    "row has {} cells, header has {}",
                    cells.len(),
                    t.columns.len()
                )));
            } else {
                t.rows.push(cells);
            }
        }
        if !header {
            return Err(Error::Schema("missing header row".to_string()));
        }
        Ok(t)
    }
}

/// The data part of a CSV artifact, without comment lines.
pub fn csv_body(text: &str) -> String {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| format!("{l}\n"))
        .collect()
}

/// Envelope of every JSON artifact.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JsonDoc {
    pub schema: u32,
    pub version: String,
    pub experiment: String,
    pub config: Vec<(String, String)>,
    pub result: Value,
}

impl JsonDoc {
    pub fn to_string_pretty(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn parse(text: &str) -> Result<Self> {
        let v: Value = serde_json::from_str(text)?;
        match v.get("schema").and_then(Value::as_u64) {
            Some(s) if s == SCHEMA_VERSION as u64 => Ok(serde_json::from_value(v)?),
            Some(s) => Err(Error::Schema(format!("schema version {s} is not supported"))),
            None => Err(Error::Schema("missing schema field".to_string())),
        }
    }
}

/// Writes through a temporary file in the target directory and renames it
/// into place, so readers never observe a partial file.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub version: String,
    pub created_unix: u64,
    pub elapsed_ms: u128,
    pub workers: usize,
    pub artifact: String,
}

pub fn write_sidecar(path: &Path, elapsed_ms: u128, workers: usize) -> Result<()> {
    let created_unix = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let meta = Sidecar {
        version: TOOL_VERSION.to_string(),
        created_unix,
        elapsed_ms,
        workers,
        artifact: path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default(),
    };
    write_atomic(&sidecar_path(path), &(serde_json::to_string_pretty(&meta)? + "\n"))
}

/// Float cell; non-finite values are spelled `inf`, `-inf`, `nan`.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        x.to_string()
    }
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}
