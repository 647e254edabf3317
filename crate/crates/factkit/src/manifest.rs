//! Run manifests: what a command read, what it wrote, and with which
//! configuration. The timestamp lives here and nowhere else, so artifacts
//! from identical runs are byte-identical.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::facts::{write_text, DataError};

pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub artifact_version: String,
    pub config_sha256: String,
    pub seeds: Vec<u64>,
    /// Path → SHA-256 of every input file.
    pub inputs: BTreeMap<String, String>,
    /// Path → SHA-256 of every file written.
    pub outputs: BTreeMap<String, String>,
    /// Free-form facts about the run, e.g. the embedding provider.
    pub notes: BTreeMap<String, String>,
    pub created_unix: u64,
}

pub fn sha256_file(path: &Path) -> Result<String, DataError> {
    let bytes = std::fs::read(path).map_err(|e| DataError::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

impl Manifest {
    pub fn new(command: &str, config_sha256: String, seeds: Vec<u64>) -> Self {
        Manifest {
            command: command.to_string(),
            artifact_version: ARTIFACT_VERSION.to_string(),
            config_sha256,
            seeds,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            notes: BTreeMap::new(),
            created_unix: 0,
        }
    }

    pub fn input(&mut self, path: &Path) -> Result<(), DataError> {
        self.inputs.insert(path.display().to_string(), sha256_file(path)?);
        Ok(())
    }

    pub fn output(&mut self, path: &Path) -> Result<(), DataError> {
        self.outputs.insert(path.display().to_string(), sha256_file(path)?);
        Ok(())
    }

    pub fn note(&mut self, key: &str, value: impl ToString) {
        self.notes.insert(key.to_string(), value.to_string());
    }

    /// Stamps the current time and writes the manifest as pretty JSON.
    pub fn write(mut self, path: &Path) -> Result<(), DataError> {
        self.created_unix = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let mut text = serde_json::to_string_pretty(&self).expect("manifest serializes");
        text.push('\n');
        write_text(path, &text)
    }
}

/// Manifest location for a single-file output: `<out>.manifest.json`.
pub fn manifest_path_for(out: &Path) -> PathBuf {
    let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    out.with_file_name(name)
}
