//! Backend and pipeline assembly from resolved settings.

use std::path::Path;
use std::sync::Arc;

use langbridge::backends::{
    CachedChat, CachedTranslator, ChatBackend, ChatResponse, HttpChat, HttpTranslator, Matcher,
    MockTranslator, RateLimitedChat, RateLimitedTranslator, RateLimiter, Reply, ResponseCache,
    RetryingChat, ScriptedChat, Translator, WallClock,
};
use langbridge::detector::{DetectorModel, LowResourceDetector};
use langbridge::evaluation::{EvalError, Grader, Judge};
use langbridge::lang::LanguageCode;
use langbridge::pipeline::{Pipeline, PipelineConfig, TemplateSet};
use langbridge::types::Query;
use serde::Deserialize;

use crate::config::Settings;
use crate::CliError;

#[derive(Debug, Deserialize)]
struct ScriptRule {
    #[serde(default)]
    exact: Option<String>,
    #[serde(default)]
    substring: Option<String>,
    #[serde(default)]
    reply: Option<String>,
    #[serde(default)]
    replies: Option<Vec<String>>,
}

#[derive(Debug, Deserialize)]
struct ScriptFile {
    #[serde(default)]
    default: Option<String>,
    rules: Vec<ScriptRule>,
}

fn load_script(path: &Path) -> Result<ScriptedChat, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let file: ScriptFile =
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("script: {e}")))?;
    let mut rules = Vec::with_capacity(file.rules.len());
    for rule in file.rules {
        let matcher = match (rule.exact, rule.substring) {
            (Some(exact), None) => Matcher::Exact(exact),
            (None, Some(sub)) => Matcher::Substring(sub),
            _ => {
                return Err(CliError::Config(
                    "each script rule needs exactly one of `exact` or `substring`".into(),
                ))
            }
        };
        let reply = match (rule.reply, rule.replies) {
            (Some(text), None) => Reply::text(text),
            (None, Some(texts)) => Reply::texts(texts),
            _ => {
                return Err(CliError::Config(
                    "each script rule needs exactly one of `reply` or `replies`".into(),
                ))
            }
        };
        rules.push((matcher, reply));
    }
    let mut script = ScriptedChat::new(rules).map_err(|e| CliError::Config(e.to_string()))?;
    if let Some(default) = file.default {
        script = script.with_default(ChatResponse::text_only(default));
    }
    Ok(script)
}

pub struct Backends {
    pub chat: Arc<dyn ChatBackend>,
    pub translator: Arc<dyn Translator>,
    pub cache: Option<Arc<ResponseCache>>,
}

/// Chat stack: transport (http or scripted) → retry → rate limit → cache.
pub fn build_backends(settings: &Settings) -> Result<Backends, CliError> {
    let clock = Arc::new(WallClock);
    let cache = match &settings.cache_dir {
        Some(dir) => Some(Arc::new(
            ResponseCache::open(dir).map_err(|e| CliError::Runtime(e.to_string()))?,
        )),
        None => None,
    };
    let limiter = settings
        .chat
        .requests_per_second
        .map(|cap| Arc::new(RateLimiter::new(cap, clock.clone())));

    let transport: Arc<dyn ChatBackend> = match settings.chat_kind.as_str() {
        "http" => Arc::new(HttpChat::new(settings.chat.clone())),
        "scripted" => {
            let path = settings.scripted_path.as_ref().ok_or_else(|| {
                CliError::Config("backend.chat.script is required for kind = scripted".into())
            })?;
            Arc::new(load_script(path)?)
        }
        other => {
            return Err(CliError::Config(format!(
                "unknown chat backend kind {other:?}"
            )))
        }
    };
    let retried = RetryingChat::new(transport, settings.chat.max_retries, clock.clone());
    let chat: Arc<dyn ChatBackend> = match (limiter.clone(), cache.clone()) {
        (Some(limiter), Some(cache)) => Arc::new(CachedChat::new(
            RateLimitedChat::new(retried, limiter),
            cache,
        )),
        (Some(limiter), None) => Arc::new(RateLimitedChat::new(retried, limiter)),
        (None, Some(cache)) => Arc::new(CachedChat::new(retried, cache)),
        (None, None) => Arc::new(retried),
    };

    let translator_transport: Arc<dyn Translator> = match settings.translate_kind.as_str() {
        "mock" => Arc::new(MockTranslator),
        "http" => Arc::new(HttpTranslator::new(settings.translate.clone())),
        other => {
            return Err(CliError::Config(format!(
                "unknown translate backend kind {other:?}"
            )))
        }
    };
    let translator: Arc<dyn Translator> = match (limiter, cache.clone()) {
        (Some(limiter), Some(cache)) => Arc::new(CachedTranslator::new(
            RateLimitedTranslator::new(translator_transport, limiter),
            cache,
        )),
        (Some(limiter), None) => {
            Arc::new(RateLimitedTranslator::new(translator_transport, limiter))
        }
        (None, Some(cache)) => Arc::new(CachedTranslator::new(translator_transport, cache)),
        (None, None) => translator_transport,
    };

    Ok(Backends {
        chat,
        translator,
        cache,
    })
}

pub fn load_templates(settings: &Settings) -> Result<TemplateSet, CliError> {
    match &settings.templates_dir {
        Some(dir) => TemplateSet::from_dir(dir).map_err(|e| CliError::Config(e.to_string())),
        None => Ok(TemplateSet::builtin()),
    }
}

/// Assembles the full pipeline with trained detectors from config paths.
pub fn build_pipeline(
    settings: &Settings,
    backends: &Backends,
    ablation_override: Option<langbridge::pipeline::Ablation>,
    forced_direct: bool,
) -> Result<Pipeline, CliError> {
    let registry = settings.registry()?;
    let templates = load_templates(settings)?;
    let mut config = PipelineConfig::new(settings.mode, settings.pair.clone())
        .with_parallelism(settings.parallelism);
    config.integration_key = settings.integration_key;
    config.max_tokens = settings.max_tokens;
    config = config.with_ablation(ablation_override.or(settings.ablation));

    let mut builder = Pipeline::builder(config)
        .registry(registry)
        .templates(templates)
        .chat(backends.chat.clone())
        .translator(backends.translator.clone())
        .model_id(settings.chat_model.clone());

    if forced_direct {
        let detector: Arc<dyn LowResourceDetector> =
            Arc::new(langbridge::detector::ConstVerdict(false));
        for lang in [&settings.pair.0, &settings.pair.1] {
            builder = builder.detector(lang, detector.clone());
        }
    } else {
        for (lang_code, path) in &settings.detector_models {
            let lang = LanguageCode::parse_code(lang_code)
                .map_err(|e| CliError::Config(e.to_string()))?;
            let model = DetectorModel::load(path).map_err(CliError::from)?;
            builder = builder.detector(&lang, Arc::new(model));
        }
    }
    builder.build().map_err(CliError::from)
}

/// Gold-containment grader for offline evaluation: the answer is correct
/// when it contains the gold answer, case-insensitively, after stripping
/// any translation marker.
pub struct ExactGrader;

impl Grader for ExactGrader {
    fn grade(&self, query: &Query, answer_text: &str) -> Result<bool, EvalError> {
        let gold = query
            .gold_answer
            .as_deref()
            .ok_or_else(|| EvalError::MissingGold(query.id.clone()))?;
        let payload = match langbridge::backends::strip_marker(answer_text) {
            Some((_, payload)) => payload,
            None => answer_text,
        };
        Ok(payload.to_lowercase().contains(&gold.trim().to_lowercase()))
    }

    fn identity(&self) -> String {
        "exact-gold-containment".into()
    }
}

/// LLM-judge grader with an ambiguity budget: ambiguous verdicts count
/// as wrong but are tallied for the caller to enforce a rate bound.
pub struct JudgeGrader<'a> {
    pub judge: Judge<'a>,
    pub ambiguous: std::sync::atomic::AtomicU64,
    pub judged: std::sync::atomic::AtomicU64,
}

impl Grader for JudgeGrader<'_> {
    fn grade(&self, query: &Query, answer_text: &str) -> Result<bool, EvalError> {
        self.judged
            .fetch_add(1, std::sync::atomic::Ordering::SeqCst);
        match self.judge.judge_query(query, answer_text) {
            Ok(verdict) => Ok(verdict.value == langbridge::evaluation::Correctness::Correct),
            Err(EvalError::AmbiguousVerdict(_)) => {
                self.ambiguous
                    .fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                Ok(false)
            }
            Err(other) => Err(other),
        }
    }

    fn identity(&self) -> String {
        "llm-judge".into()
    }
}
