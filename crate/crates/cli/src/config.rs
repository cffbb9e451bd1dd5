//! Sectioned key/value config files with flag-over-env-over-file
//! precedence.
//!
//! Format: `[section]` headers, `key = value` lines, `#` comments. Keys
//! are addressed as `section.key`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use langbridge::backends::BackendConfig;
use langbridge::lang::{LanguageCode, LanguageRegistry};
use langbridge::pipeline::{Ablation, IntegrationKey, PipelineMode};

use crate::CliError;

#[derive(Debug, Clone, Default)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut values = BTreeMap::new();
        let mut section = String::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                section = name.trim().to_string();
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::Config(format!(
                    "{}:{}: expected `key = value`, got {raw:?}",
                    path.display(),
                    idx + 1
                )));
            };
            let full_key = if section.is_empty() {
                key.trim().to_string()
            } else {
                format!("{section}.{}", key.trim())
            };
            values.insert(full_key, value.trim().to_string());
        }
        Ok(ConfigFile { values })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn snapshot(&self) -> &BTreeMap<String, String> {
        &self.values
    }
}

/// Everything a command needs to wire backends and the pipeline,
/// after precedence resolution.
#[derive(Debug, Clone)]
pub struct Settings {
    pub file: ConfigFile,
    pub chat: BackendConfig,
    pub chat_kind: String,
    pub chat_model: String,
    pub translate: BackendConfig,
    pub translate_kind: String,
    pub scripted_path: Option<PathBuf>,
    pub mode: PipelineMode,
    pub ablation: Option<Ablation>,
    pub integration_key: IntegrationKey,
    pub pair: (LanguageCode, LanguageCode),
    pub parallelism: usize,
    pub max_tokens: u32,
    pub templates_dir: Option<PathBuf>,
    pub registry_path: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
    pub detector_models: BTreeMap<String, PathBuf>,
    pub seed: u64,
}

/// Shared command-line overrides (flags beat env beats file).
#[derive(Debug, Clone, Default, clap::Args)]
pub struct CommonArgs {
    /// Config file path.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Chat backend endpoint override.
    #[arg(long, global = true)]
    pub backend: Option<String>,
    /// Chat model id override.
    #[arg(long, global = true)]
    pub model_id: Option<String>,
    /// Pipeline mode override.
    #[arg(long, value_parser = ["replace", "integrate"], global = true)]
    pub mode: Option<String>,
    /// Ablation switch.
    #[arg(long, value_parser = ["no_detector", "no_selection"], global = true)]
    pub ablate: Option<String>,
    /// Concurrent queries bound.
    #[arg(long, global = true)]
    pub parallelism: Option<usize>,
    /// Seed for anything stochastic in the command.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Response cache directory.
    #[arg(long, global = true)]
    pub cache_dir: Option<PathBuf>,
    /// Templates directory (defaults to the embedded set).
    #[arg(long, global = true)]
    pub templates: Option<PathBuf>,
}

fn parse_pair(raw: &str, registry: &LanguageRegistry) -> Result<(LanguageCode, LanguageCode), CliError> {
    let Some((a, b)) = raw.split_once(',') else {
        return Err(CliError::Config(format!(
            "language pair must be `a,b`, got {raw:?}"
        )));
    };
    let a = registry
        .normalize(a.trim())
        .map_err(|e| CliError::Config(e.to_string()))?;
    let b = registry
        .normalize(b.trim())
        .map_err(|e| CliError::Config(e.to_string()))?;
    Ok((a, b))
}

impl Settings {
    pub fn resolve(args: &CommonArgs) -> Result<Self, CliError> {
        let file = match &args.config {
            Some(path) => ConfigFile::load(path)?,
            None => ConfigFile::default(),
        };
        let registry = match file.get("languages.registry") {
            Some(path) => LanguageRegistry::from_path(Path::new(path))
                .map_err(|e| CliError::Config(e.to_string()))?,
            None => LanguageRegistry::builtin(),
        };

        let mut chat = BackendConfig::new(
            args.backend
                .clone()
                .or_else(|| file.get("backend.chat.endpoint").map(str::to_string))
                .unwrap_or_else(|| "http://127.0.0.1:8080/v1".to_string()),
        );
        chat.auth_env = file.get("backend.chat.auth_env").map(str::to_string);
        if let Some(v) = file.get("backend.chat.timeout_ms") {
            chat.timeout_ms = v.parse().map_err(|_| CliError::Config("bad timeout_ms".into()))?;
        }
        if let Some(v) = file.get("backend.chat.max_retries") {
            chat.max_retries = v.parse().map_err(|_| CliError::Config("bad max_retries".into()))?;
        }
        if let Some(v) = file.get("backend.chat.rps") {
            let rps: u32 = v.parse().map_err(|_| CliError::Config("bad rps".into()))?;
            chat.requests_per_second = (rps > 0).then_some(rps);
        }

        let mut translate = BackendConfig::new(
            file.get("backend.translate.endpoint")
                .unwrap_or("http://127.0.0.1:8081/translate")
                .to_string(),
        );
        translate.auth_env = file.get("backend.translate.auth_env").map(str::to_string);
        if let Some(v) = file.get("backend.translate.timeout_ms") {
            translate.timeout_ms = v.parse().map_err(|_| CliError::Config("bad timeout_ms".into()))?;
        }

        let mode = match args
            .mode
            .as_deref()
            .or_else(|| file.get("pipeline.mode"))
            .unwrap_or("replace")
        {
            "replace" => PipelineMode::Replace,
            "integrate" => PipelineMode::Integrate,
            other => return Err(CliError::Config(format!("unknown mode {other:?}"))),
        };
        let ablation = match args.ablate.as_deref() {
            Some("no_detector") => Some(Ablation::NoDetector),
            Some("no_selection") => Some(Ablation::NoSelection),
            Some(other) => return Err(CliError::Config(format!("unknown ablation {other:?}"))),
            None => match file.get("pipeline.ablate") {
                Some("no_detector") => Some(Ablation::NoDetector),
                Some("no_selection") => Some(Ablation::NoSelection),
                Some(other) => {
                    return Err(CliError::Config(format!("unknown ablation {other:?}")))
                }
                None => None,
            },
        };
        let integration_key = match file.get("pipeline.integration_key") {
            Some("target_language") => IntegrationKey::TargetLanguage,
            Some("output_language") | None => IntegrationKey::OutputLanguage,
            Some(other) => {
                return Err(CliError::Config(format!("unknown integration_key {other:?}")))
            }
        };
        let pair = parse_pair(file.get("languages.pair").unwrap_or("en,zh"), &registry)?;
        let parallelism = args
            .parallelism
            .or_else(|| file.get("pipeline.parallelism").and_then(|v| v.parse().ok()))
            .unwrap_or(1)
            .max(1);
        let max_tokens = file
            .get("pipeline.max_tokens")
            .and_then(|v| v.parse().ok())
            .unwrap_or(langbridge::backends::DEFAULT_MAX_TOKENS);

        let mut detector_models = BTreeMap::new();
        for (key, value) in file.snapshot() {
            if let Some(lang) = key.strip_prefix("detector.model.") {
                detector_models.insert(lang.to_string(), PathBuf::from(value));
            }
        }

        Ok(Settings {
            chat,
            chat_kind: file
                .get("backend.chat.kind")
                .unwrap_or("http")
                .to_string(),
            chat_model: args
                .model_id
                .clone()
                .or_else(|| file.get("backend.chat.model").map(str::to_string))
                .unwrap_or_else(|| "default-model".to_string()),
            translate_kind: file
                .get("backend.translate.kind")
                .unwrap_or("mock")
                .to_string(),
            translate,
            scripted_path: file.get("backend.chat.script").map(PathBuf::from),
            mode,
            ablation,
            integration_key,
            pair,
            parallelism,
            max_tokens,
            templates_dir: args
                .templates
                .clone()
                .or_else(|| file.get("pipeline.templates_dir").map(PathBuf::from)),
            registry_path: file.get("languages.registry").map(PathBuf::from),
            cache_dir: args
                .cache_dir
                .clone()
                .or_else(|| file.get("backend.cache_dir").map(PathBuf::from)),
            detector_models,
            seed: args
                .seed
                .or_else(|| file.get("pipeline.seed").and_then(|v| v.parse().ok()))
                .unwrap_or(0),
            file,
        })
    }

    pub fn registry(&self) -> Result<LanguageRegistry, CliError> {
        match &self.registry_path {
            Some(path) => {
                LanguageRegistry::from_path(path).map_err(|e| CliError::Config(e.to_string()))
            }
            None => Ok(LanguageRegistry::builtin()),
        }
    }
}
