//! Output staging: every file of a run is rendered in memory first and only
//! then written, each one atomically.

use std::path::{Path, PathBuf};

use hyperuni_core::io::write_atomic;
use hyperuni_core::variance::fmt17;
use serde::Serialize;
use serde_json::{json, Value};

use crate::{CliError, RunConfig, SCHEMA_VERSION};

#[derive(Debug, Default)]
pub struct Outputs {
    files: Vec<(String, Vec<u8>)>,
}

impl Outputs {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a JSON document: `kind`, `schema_version`, the fields of
    /// `payload` and the resolved `config`.
    pub fn json<T: Serialize>(
        &mut self,
        name: impl Into<String>,
        kind: &str,
        payload: &T,
        config: &RunConfig,
    ) -> Result<(), CliError> {
        let mut doc = json!({ "schema_version": SCHEMA_VERSION, "kind": kind });
        let body = serde_json::to_value(payload).map_err(|e| CliError::Config(e.to_string()))?;
        match body {
            Value::Object(map) => doc.as_object_mut().expect("object").extend(map),
            other => {
                doc["data"] = other;
            }
        }
        doc["config"] = serde_json::to_value(config).map_err(|e| CliError::Config(e.to_string()))?;
        let mut text = serde_json::to_string_pretty(&doc).map_err(|e| CliError::Config(e.to_string()))?;
        text.push('\n');
        self.raw(name, text.into_bytes());
        Ok(())
    }

    pub fn raw(&mut self, name: impl Into<String>, bytes: Vec<u8>) {
        self.files.push((name.into(), bytes));
    }

    pub fn is_empty(&self) -> bool {
        self.files.is_empty()
    }

    /// Writes everything into `dir`, creating it if needed.
    pub fn commit(self, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
        std::fs::create_dir_all(dir).map_err(hyperuni_core::Error::from)?;
        let mut written = Vec::with_capacity(self.files.len());
        for (name, bytes) in self.files {
            let path = dir.join(name);
            write_atomic(&path, &bytes)?;
            written.push(path);
        }
        Ok(written)
    }
}

/// CSV text from a header and rows of numbers, 17 significant digits.
pub fn csv(header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> Vec<u8> {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| fmt17(*v)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out.into_bytes()
}
