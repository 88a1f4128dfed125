use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};
use sponge_core::rifs::SpongeSpec;
use sponge_core::{Error, Result};

pub const TOOL_VERSION: &str = concat!("sponge ", env!("CARGO_PKG_VERSION"));

/// One CSV row: parameter, estimate, standard error (blank when unknown).
pub struct Row {
    pub parameter: String,
    pub estimate: f64,
    pub stderr: Option<f64>,
}

impl Row {
    pub fn new(parameter: impl Into<String>, estimate: f64, stderr: Option<f64>) -> Self {
        Row {
            parameter: parameter.into(),
            estimate,
            stderr,
        }
    }
}

/// JSON summary shared by every command.
pub fn envelope<T: Serialize>(command: &str, spec: Option<&SpongeSpec>, seed: Option<u64>, result: &T) -> Result<Value> {
    let result = serde_json::to_value(result).map_err(|e| Error::Numeric(format!("result is not representable: {e}")))?;
    Ok(json!({
        "command": command,
        "tool_version": TOOL_VERSION,
        "spec_name": spec.and_then(|s| s.name.clone()),
        "spec_hash": spec.map(|s| s.hash_hex()),
        "seed": seed,
        "result": result,
    }))
}

pub fn json_text(value: &Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("json value serializes");
    s.push('\n');
    s
}

pub fn with_extension(path: &Path, ext: &str) -> PathBuf {
    path.with_extension(ext)
}

/// Suffixed sibling: `out/run.json` with `trials` gives `out/run-trials.csv`.
pub fn sibling(path: &Path, suffix: &str, ext: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}-{suffix}.{ext}"))
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, bytes)?;
    Ok(())
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Numeric(format!("csv: {other:?}")),
    }
}

pub fn rows_csv(rows: &[Row]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["parameter", "estimate", "stderr"]).map_err(csv_error)?;
    for r in rows {
        let se = r.stderr.map(|s| s.to_string()).unwrap_or_default();
        w.write_record([r.parameter.as_str(), &r.estimate.to_string(), &se])
            .map_err(csv_error)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

/// Headed numeric table.
pub fn table_csv(header: &[String], rows: impl Iterator<Item = Vec<f64>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(csv_error)?;
    for r in rows {
        w.write_record(r.iter().map(|x| x.to_string())).map_err(csv_error)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}
