//! Run manifests: the resolved config, its hash, and the artifact list.
//! Re-running a subcommand from its manifest reproduces identical files.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::ExperimentConfig;
use super::HarnessError;

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub subcommand: String,
    pub seed: u64,
    pub config_hash: String,
    pub crate_version: String,
    pub artifacts: Vec<String>,
    pub config: ExperimentConfig,
}

pub fn config_hash(cfg: &ExperimentConfig) -> String {
    let digest = Sha256::digest(cfg.canonical_json().as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

impl RunManifest {
    pub fn new(subcommand: &str, cfg: &ExperimentConfig, artifacts: Vec<String>) -> Self {
        Self {
            schema_version: MANIFEST_SCHEMA_VERSION,
            subcommand: subcommand.to_string(),
            seed: cfg.seed,
            config_hash: config_hash(cfg),
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
            artifacts,
            config: cfg.clone(),
        }
    }

    pub fn save(&self, out_dir: &Path) -> Result<(), HarnessError> {
        let path = out_dir.join(format!("manifest_{}.json", self.subcommand));
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|_| HarnessError::MissingArtifact(path.to_path_buf()))?;
        Ok(serde_json::from_str(&text)?)
    }
}
