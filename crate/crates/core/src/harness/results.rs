//! Flat result tables and their CSV / JSON encodings.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::benchmarks::SchemeId;
use crate::error::{ConfigError, Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// Statistics reported per (scheme, sweep point, trial) and pooled over trials.
pub const STATISTICS: [&str; 8] = [
    "p10",
    "p20",
    "p50",
    "mean",
    "cv",
    "cvar",
    "outage",
    "violations",
];

/// One cell. `trial = None` pools all trials; `slot = Some(_)` marks a
/// per-slot SSE record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub schema: u32,
    pub experiment: String,
    pub scheme: SchemeId,
    pub sweep: String,
    pub trial: Option<usize>,
    pub slot: Option<usize>,
    pub statistic: String,
    pub value: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    /// Value of a summary cell.
    pub fn get(&self, scheme: SchemeId, sweep: &str, trial: Option<usize>, statistic: &str) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| {
                r.scheme == scheme && r.sweep == sweep && r.trial == trial && r.slot.is_none() && r.statistic == statistic
            })
            .map(|r| r.value)
    }

    /// Per-slot SSE of `scheme` at `sweep`, trial by trial in slot order.
    pub fn slot_sse(&self, scheme: SchemeId, sweep: &str, trial: Option<usize>) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| {
                r.scheme == scheme
                    && r.sweep == sweep
                    && r.slot.is_some()
                    && r.statistic == "sse"
                    && (trial.is_none() || r.trial == trial)
            })
            .map(|r| r.value)
            .collect()
    }

    pub fn schemes(&self) -> Vec<SchemeId> {
        let mut s: Vec<SchemeId> = self.rows.iter().map(|r| r.scheme).collect();
        s.sort();
        s.dedup();
        s
    }

    pub fn sweeps(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.sweep) {
                out.push(r.sweep.clone());
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn extension(&self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.extension())
    }
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(ConfigError::Validation(format!("unknown format `{s}` (expected csv or json)")).into()),
        }
    }
}

fn ser(e: impl fmt::Display) -> Error {
    Error::Serialization(e.to_string())
}

/// Encode `table` in memory.
pub fn encode(table: &ResultTable, format: Format) -> Result<Vec<u8>> {
    match format {
        Format::Csv => {
            let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
            w.write_record(["schema", "experiment", "scheme", "sweep", "trial", "slot", "statistic", "value"])
                .map_err(ser)?;
            for r in &table.rows {
                w.serialize(r).map_err(ser)?;
            }
            w.into_inner().map_err(ser)
        }
        Format::Json => {
            let mut out = serde_json::to_vec_pretty(&table.rows).map_err(ser)?;
            out.push(b'\n');
            Ok(out)
        }
    }
}

pub fn decode(bytes: &[u8], format: Format) -> Result<ResultTable> {
    let rows = match format {
        Format::Csv => csv::Reader::from_reader(bytes)
            .deserialize()
            .collect::<std::result::Result<Vec<ResultRow>, _>>()
            .map_err(ser)?,
        Format::Json => serde_json::from_slice(bytes).map_err(ser)?,
    };
    Ok(ResultTable { rows })
}

pub fn emit_results(table: &ResultTable, format: Format, path: &Path) -> Result<()> {
    let bytes = encode(table, format)?;
    std::fs::write(path, bytes).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

pub fn read_results(path: &Path, format: Format) -> Result<ResultTable> {
    let bytes = std::fs::read(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    decode(&bytes, format)
}
