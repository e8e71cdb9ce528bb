//! Run manifest: enough to reproduce a result file.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::SystemConfig;
use crate::error::{Error, Result};

use super::results::SCHEMA_VERSION;
use super::run::DeploymentRecord;
use super::spec::{ConfigFile, ExperimentSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema: u32,
    pub command: String,
    pub config_sha256: String,
    pub seed: u64,
    pub version: String,
    pub wall_time_s: f64,
    pub result_file: String,
    pub config: ConfigFile,
    /// Hover position each scheme used, per trial.
    pub deployments: Vec<DeploymentRecord>,
}

/// Canonical TOML rendering of a full configuration.
pub fn canonical_config(cfg: &SystemConfig, spec: &ExperimentSpec) -> Result<String> {
    toml::to_string(&ConfigFile::join(cfg, spec)).map_err(|e| Error::Serialization(e.to_string()))
}

/// Hex SHA-256 of the canonical configuration.
pub fn config_hash(cfg: &SystemConfig, spec: &ExperimentSpec) -> Result<String> {
    let digest = Sha256::digest(canonical_config(cfg, spec)?.as_bytes());
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

impl RunManifest {
    pub fn new(
        command: &str,
        cfg: &SystemConfig,
        spec: &ExperimentSpec,
        wall_time_s: f64,
        result_file: &Path,
        deployments: Vec<DeploymentRecord>,
    ) -> Result<Self> {
        Ok(Self {
            schema: SCHEMA_VERSION,
            command: command.to_string(),
            config_sha256: config_hash(cfg, spec)?,
            seed: spec.seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            wall_time_s,
            result_file: result_file.display().to_string(),
            config: ConfigFile::join(cfg, spec),
            deployments,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Serialization(e.to_string()))?;
        std::fs::write(path, text + "\n").map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}
