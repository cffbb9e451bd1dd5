//! Run manifests: every artifact-producing command writes one next to
//! its outputs so the run can be replayed from config plus cache.

use std::collections::BTreeMap;
use std::path::Path;

use langbridge::backends::sha256_hex;
use langbridge::pipeline::TemplateSet;
use serde::Serialize;

use crate::CliError;

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub seed: u64,
    /// Wall time for real runs; virtual time for simulated runs, which
    /// keeps repeated simulations byte-identical.
    pub timestamp_unix_ms: u64,
    /// Merged config key/values. Holds env-var names, never secrets.
    pub config_snapshot: BTreeMap<String, String>,
    pub template_hashes: BTreeMap<String, String>,
    pub model_hashes: BTreeMap<String, String>,
    /// Endpoint hosts and model ids, never credentials.
    pub backend_identities: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str, seed: u64, timestamp_unix_ms: u64) -> Self {
        RunManifest {
            command: command.to_string(),
            seed,
            timestamp_unix_ms,
            config_snapshot: BTreeMap::new(),
            template_hashes: BTreeMap::new(),
            model_hashes: BTreeMap::new(),
            backend_identities: Vec::new(),
        }
    }

    pub fn with_config(mut self, snapshot: &BTreeMap<String, String>) -> Self {
        self.config_snapshot = snapshot.clone();
        self
    }

    pub fn with_templates(mut self, templates: &TemplateSet) -> Self {
        for template in templates.iter() {
            self.template_hashes.insert(
                template.name.clone(),
                sha256_hex(template.body().as_bytes()),
            );
        }
        self
    }

    pub fn with_model_file(mut self, label: &str, path: &Path) -> Result<Self, CliError> {
        let hash = langbridge::backends::hash_file(path)
            .map_err(|e| CliError::Runtime(format!("hashing {}: {e}", path.display())))?;
        self.model_hashes.insert(label.to_string(), hash);
        Ok(self)
    }

    pub fn with_backends(mut self, identities: Vec<String>) -> Self {
        self.backend_identities = identities;
        self
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| CliError::Runtime(e.to_string()))?;
        std::fs::write(path, json).map_err(|e| CliError::Runtime(e.to_string()))?;
        Ok(())
    }
}

pub fn now_unix_ms() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}
