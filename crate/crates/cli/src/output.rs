//! Artifact writing. JSON artifacts carry their provenance inline; CSV
//! artifacts and cohort files get a `<file>.meta.json` sidecar.

use std::io::Write;
use std::path::{Path, PathBuf};

use ebhmm_core::document::Provenance;
use serde::Serialize;

use crate::error::CliError;

pub fn provenance(config_hash: &str, seed: u64) -> Provenance {
    Provenance {
        config_hash: config_hash.to_string(),
        seed,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
    }
}

#[derive(Serialize)]
struct Sidecar<'a> {
    command: &'a str,
    #[serde(flatten)]
    provenance: &'a Provenance,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".meta.json");
    path.with_file_name(name)
}

pub fn write_sidecar(path: &Path, command: &str, provenance: &Provenance) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(&Sidecar { command, provenance })?;
    write_text(&sidecar_path(path), &(text + "\n"))?;
    Ok(())
}

/// Writes `text` to `path`, or to `stdout` when there is no path.
pub fn emit(path: Option<&Path>, text: &str, stdout: &mut dyn Write) -> Result<(), CliError> {
    match path {
        Some(p) => write_text(p, text)?,
        None => stdout.write_all(text.as_bytes())?,
    }
    Ok(())
}

/// Writes a CSV artifact plus its sidecar; without a path it goes to `stdout`.
pub fn emit_csv(
    path: Option<&Path>,
    text: &str,
    command: &str,
    provenance: &Provenance,
    stdout: &mut dyn Write,
) -> Result<(), CliError> {
    emit(path, text, stdout)?;
    if let Some(p) = path {
        write_sidecar(p, command, provenance)?;
    }
    Ok(())
}

pub fn csv_text(header: &[String], rows: &[Vec<String>]) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    let bytes = w.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Shortest text that round-trips; exponent form for very small or large magnitudes.
pub fn num(x: f64) -> String {
    let a = x.abs();
    if a != 0.0 && a.is_finite() && !(1e-4..1e16).contains(&a) {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

/// Attaches the path to I/O failures.
pub fn with_path<T>(path: &Path, r: ebhmm_core::Result<T>) -> Result<T, CliError> {
    r.map_err(|e| match e {
        ebhmm_core::Error::Io(io) => std::io::Error::new(io.kind(), format!("{}: {io}", path.display())).into(),
        other => other.into(),
    })
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    with_path(path, std::fs::write(path, text).map_err(Into::into))
}

pub fn read_text(path: &Path) -> Result<String, CliError> {
    with_path(path, std::fs::read_to_string(path).map_err(Into::into))
}
