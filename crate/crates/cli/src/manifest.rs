use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

#[derive(Debug, Serialize)]
pub struct ConfigEntry {
    pub role: String,
    pub path: PathBuf,
    pub sha256: String,
}

/// Summary of one successful command, emitted as a single JSON line.
#[derive(Debug, Default, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub configs: Vec<ConfigEntry>,
    pub timings_ms: BTreeMap<String, u128>,
    pub outputs: Vec<PathBuf>,
}

pub fn sha256_file(path: &Path) -> CliResult<String> {
    let bytes = std::fs::read(path).map_err(|e| CliError::validation(format!("cannot read {}: {e}", path.display())))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        Self { command: command.to_string(), ..Self::default() }
    }

    /// Records a consumed config file by its resolved path and digest.
    pub fn config(&mut self, role: &str, path: &Path) -> CliResult<()> {
        let resolved = path.canonicalize().unwrap_or_else(|_| path.to_path_buf());
        let sha256 = sha256_file(path)?;
        self.configs.push(ConfigEntry { role: role.to_string(), path: resolved, sha256 });
        Ok(())
    }

    pub fn timings(&mut self, stages: &[(&'static str, u128)]) {
        for (stage, ms) in stages {
            *self.timings_ms.entry((*stage).to_string()).or_default() += ms;
        }
    }

    pub fn emit(&self) {
        eprintln!("manifest: {}", serde_json::to_string(self).expect("manifest serializes"));
    }
}
