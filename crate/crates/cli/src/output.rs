//! Report serialization and file helpers.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::ValueEnum;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::manifest::RunManifest;

#[derive(ValueEnum, Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Format {
    #[default]
    Json,
    Csv,
}

/// Header plus string rows, written with CSV quoting.
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.into_inner().context("flushing csv")
    }

    pub fn write_file(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?)
            .with_context(|| format!("writing {}", path.display()))
    }
}

/// TOML when the extension says so, JSON otherwise.
pub fn parse_structured<T: DeserializeOwned>(path: &Path, bytes: &[u8]) -> Result<T> {
    let text =
        std::str::from_utf8(bytes).with_context(|| format!("{} is not UTF-8", path.display()))?;
    let is_toml = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("toml"));
    if is_toml {
        toml::from_str(text).with_context(|| format!("parsing {}", path.display()))
    } else {
        serde_json::from_str(text).with_context(|| format!("parsing {}", path.display()))
    }
}

fn emit(bytes: &[u8], path: Option<&Path>) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, bytes).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes)?;
            Ok(out.flush()?)
        }
    }
}

pub fn write_json(value: &impl Serialize, path: Option<&Path>) -> Result<()> {
    let mut text = serde_json::to_vec_pretty(value)?;
    text.push(b'\n');
    emit(&text, path)
}

fn sidecar(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    path.with_file_name(name)
}

/// Writes `report` as JSON (manifest embedded), or its table as CSV with the
/// manifest in a `<output>.manifest.json` sidecar.
pub fn write_payload<R: Serialize>(
    report: &R,
    manifest: &RunManifest,
    table: impl FnOnce() -> Table,
    format: Format,
    path: Option<&Path>,
) -> Result<()> {
    match format {
        Format::Json => write_json(report, path),
        Format::Csv => {
            emit(&table().to_bytes()?, path)?;
            if let Some(p) = path {
                write_json(manifest, Some(&sidecar(p)))?;
            }
            Ok(())
        }
    }
}
