//! Writers for JSON and CSV outputs. Every file gets a `<name>.meta.json`
//! sidecar that echoes the resolved configuration. Nothing time-dependent
//! is written, so reruns are byte-identical.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::AppError;

/// Environment variable naming the default output directory.
pub const OUTPUT_DIR_ENV: &str = "RJAR_OUTPUT_DIR";

/// `explicit`, else `$RJAR_OUTPUT_DIR`, else the working directory.
pub fn output_dir(explicit: Option<&Path>) -> PathBuf {
    explicit
        .map(Path::to_path_buf)
        .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".meta.json");
    path.with_file_name(name)
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> AppError + '_ {
    move |source| AppError::Io { path: path.display().to_string(), source }
}

fn ensure_parent(path: &Path) -> Result<(), AppError> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => fs::create_dir_all(dir).map_err(io_err(dir)),
        _ => Ok(()),
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), AppError> {
    ensure_parent(path)?;
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

/// One JSON document per line.
pub fn write_json_lines<T: Serialize>(path: &Path, values: &[T]) -> Result<(), AppError> {
    ensure_parent(path)?;
    fs::write(path, json_lines(values)?).map_err(io_err(path))
}

pub fn json_lines<T: Serialize>(values: &[T]) -> Result<String, AppError> {
    let mut text = String::new();
    for v in values {
        text.push_str(&serde_json::to_string(v)?);
        text.push('\n');
    }
    Ok(text)
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), AppError> {
    ensure_parent(path)?;
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(io_err(path))
}

/// CSV with a header computed at run time (e.g. one column per coordinate).
pub fn write_csv_records(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<(), AppError> {
    ensure_parent(path)?;
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush().map_err(io_err(path))
}

pub fn write_sidecar<T: Serialize>(path: &Path, meta: &T) -> Result<PathBuf, AppError> {
    let side = sidecar_path(path);
    write_json(&side, meta)?;
    Ok(side)
}

/// JSON has no NaN; non-finite values become `null`.
pub fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}
