use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use chrono::{SecondsFormat, Utc};
use serde::Serialize;
use sha2::{Digest, Sha256};

/// Record of one invocation, written next to its outputs.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub version: String,
    pub parameters: serde_json::Value,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub started_at: String,
    pub finished_at: Option<String>,
    /// SHA-256 of every input file, keyed by path.
    pub input_hashes: BTreeMap<String, String>,
    pub outputs: Vec<String>,
    pub status: Option<String>,
}

fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl RunManifest {
    pub fn start(subcommand: &str, parameters: serde_json::Value) -> Self {
        Self {
            subcommand: subcommand.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            parameters,
            seed: None,
            threads: None,
            started_at: now(),
            finished_at: None,
            input_hashes: BTreeMap::new(),
            outputs: Vec::new(),
            status: None,
        }
    }

    pub fn add_input(&mut self, path: &Path, bytes: &[u8]) {
        self.input_hashes
            .insert(path.display().to_string(), sha256_hex(bytes));
    }

    pub fn add_output(&mut self, path: &Path) {
        self.outputs.push(path.display().to_string());
    }

    pub fn finish(&mut self, status: &str) {
        self.finished_at = Some(now());
        self.status = Some(status.to_string());
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n")
            .with_context(|| format!("writing manifest {}", path.display()))
    }
}

/// `out.csv` → `out.csv.manifest.json`.
pub fn manifest_path(output: &Path) -> PathBuf {
    let mut name = output.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    output.with_file_name(name)
}

/// Header line citing the manifest by file name, so the citing file does not
/// depend on the directory it was written to.
pub fn citation(manifest: &Path) -> String {
    format!(
        "manifest: {}",
        manifest.file_name().unwrap_or_default().to_string_lossy()
    )
}
