//! The end-to-end query pipeline: detect whether a query needs
//! cross-lingual help, select a target language, translate, answer in the
//! target language, and either replace (back-translate) or integrate the
//! answers — with every remote call recorded in the trace ledger.

pub mod template;

pub use template::{PromptTemplate, TemplateError, TemplateKind, TemplateSet};

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use crate::backends::{
    BackendError, ChatBackend, ChatRequest, Clock, TranslationRequest, Translator, WallClock,
};
use crate::detector::{DetectorError, LowResourceDetector};
use crate::lang::{LangError, LanguageCode, LanguageRegistry};
use crate::ratio::Ratio;
use crate::types::{
    Answer, AnswerProvenance, BackendCall, CallKind, CallPurpose, PipelineTrace, Query,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PipelineMode {
    /// Translate the target-language answer back to the source language.
    Replace,
    /// Merge target- and original-language answers with the integration
    /// prompt.
    Integrate,
}

/// Ablation switches: run without the detector (everything takes the
/// enhanced path) or without selection (always the opposite language).
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ablation {
    NoDetector,
    NoSelection,
}

/// Which language keys the integration template lookup. The shipped
/// prompt captions are contradictory on this; output-language is the
/// reading the rest of the system assumes, and the alternative stays
/// selectable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntegrationKey {
    #[default]
    OutputLanguage,
    TargetLanguage,
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Detector(#[from] DetectorError),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error(transparent)]
    Lang(#[from] LangError),
    #[error("no detector loaded for source language {0}")]
    NoDetectorForLanguage(String),
    #[error("no opposite language defined for {0}; the configured pair is ({1}, {2})")]
    OppositeUndefined(String, String, String),
    #[error("integration slots are bilingual; cannot integrate for source language {0}")]
    UnsupportedIntegrationLanguage(String),
    #[error("invalid pipeline config: {0}")]
    InvalidConfig(String),
}

/// Per-run pipeline settings.
#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub mode: PipelineMode,
    /// The bilingual axis used for opposite-language fallback and the
    /// no-selection ablation.
    pub language_pair: (LanguageCode, LanguageCode),
    pub parallelism: usize,
    pub ablation: Option<Ablation>,
    pub integration_key: IntegrationKey,
    pub max_tokens: u32,
}

impl PipelineConfig {
    pub fn new(mode: PipelineMode, pair: (LanguageCode, LanguageCode)) -> Self {
        PipelineConfig {
            mode,
            language_pair: pair,
            parallelism: 1,
            ablation: None,
            integration_key: IntegrationKey::OutputLanguage,
            max_tokens: crate::backends::DEFAULT_MAX_TOKENS,
        }
    }

    pub fn with_ablation(mut self, ablation: Option<Ablation>) -> Self {
        self.ablation = ablation;
        self
    }

    pub fn with_parallelism(mut self, parallelism: usize) -> Self {
        self.parallelism = parallelism.max(1);
        self
    }
}

/// Batch cost accounting; means are exact rationals over the ledgers.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CostSummary {
    pub queries: usize,
    pub total_remote_calls: u64,
    pub total_wall_ms: u64,
    pub mean_remote_calls: Ratio,
    pub mean_wall_ms: Ratio,
}

impl CostSummary {
    fn from_traces(traces: &[PipelineTrace]) -> Self {
        let queries = traces.len();
        let total_remote_calls: u64 = traces.iter().map(|t| t.remote_calls() as u64).sum();
        let total_wall_ms: u64 = traces.iter().map(PipelineTrace::total_latency_ms).sum();
        let (mean_remote_calls, mean_wall_ms) = if queries == 0 {
            (Ratio::ZERO, Ratio::ZERO)
        } else {
            (
                Ratio::new(total_remote_calls as i64, queries as i64),
                Ratio::new(total_wall_ms as i64, queries as i64),
            )
        };
        CostSummary {
            queries,
            total_remote_calls,
            total_wall_ms,
            mean_remote_calls,
            mean_wall_ms,
        }
    }
}

/// Traces in input order plus the cost summary.
#[derive(Debug, Clone)]
pub struct BatchResult {
    pub traces: Vec<PipelineTrace>,
    pub cost: CostSummary,
}

/// The assembled pipeline: backends, templates, detectors, and config.
/// Immutable once built; queries may run concurrently.
pub struct Pipeline {
    registry: LanguageRegistry,
    templates: TemplateSet,
    chat: Arc<dyn ChatBackend>,
    translator: Arc<dyn Translator>,
    clock: Arc<dyn Clock>,
    detectors: HashMap<String, Arc<dyn LowResourceDetector>>,
    model_id: String,
    config: PipelineConfig,
}

pub struct PipelineBuilder {
    registry: LanguageRegistry,
    templates: TemplateSet,
    chat: Option<Arc<dyn ChatBackend>>,
    translator: Option<Arc<dyn Translator>>,
    clock: Arc<dyn Clock>,
    detectors: HashMap<String, Arc<dyn LowResourceDetector>>,
    model_id: String,
    config: PipelineConfig,
}

impl PipelineBuilder {
    pub fn new(config: PipelineConfig) -> Self {
        PipelineBuilder {
            registry: LanguageRegistry::builtin(),
            templates: TemplateSet::builtin(),
            chat: None,
            translator: None,
            clock: Arc::new(WallClock),
            detectors: HashMap::new(),
            model_id: "default".into(),
            config,
        }
    }

    pub fn registry(mut self, registry: LanguageRegistry) -> Self {
        self.registry = registry;
        self
    }

    pub fn templates(mut self, templates: TemplateSet) -> Self {
        self.templates = templates;
        self
    }

    pub fn chat(mut self, chat: Arc<dyn ChatBackend>) -> Self {
        self.chat = Some(chat);
        self
    }

    pub fn translator(mut self, translator: Arc<dyn Translator>) -> Self {
        self.translator = Some(translator);
        self
    }

    pub fn clock(mut self, clock: Arc<dyn Clock>) -> Self {
        self.clock = clock;
        self
    }

    pub fn detector(mut self, lang: &LanguageCode, detector: Arc<dyn LowResourceDetector>) -> Self {
        self.detectors.insert(lang.as_str().to_string(), detector);
        self
    }

    pub fn model_id(mut self, model_id: impl Into<String>) -> Self {
        self.model_id = model_id.into();
        self
    }

    pub fn build(self) -> Result<Pipeline, PipelineError> {
        let chat = self
            .chat
            .ok_or_else(|| PipelineError::InvalidConfig("no chat backend".into()))?;
        let translator = self
            .translator
            .ok_or_else(|| PipelineError::InvalidConfig("no translator".into()))?;
        let (a, b) = &self.config.language_pair;
        if a == b {
            return Err(PipelineError::InvalidConfig(
                "language pair must be two distinct languages".into(),
            ));
        }
        for lang in [a, b] {
            if !self.registry.contains(lang) {
                return Err(PipelineError::InvalidConfig(format!(
                    "pair language {lang} is not in the registry"
                )));
            }
        }
        if self.config.parallelism == 0 {
            return Err(PipelineError::InvalidConfig("parallelism must be >= 1".into()));
        }
        Ok(Pipeline {
            registry: self.registry,
            templates: self.templates,
            chat,
            translator,
            clock: self.clock,
            detectors: self.detectors,
            model_id: self.model_id,
            config: self.config,
        })
    }
}

impl Pipeline {
    pub fn builder(config: PipelineConfig) -> PipelineBuilder {
        PipelineBuilder::new(config)
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn registry(&self) -> &LanguageRegistry {
        &self.registry
    }

    fn opposite(&self, lang: &LanguageCode) -> Result<LanguageCode, PipelineError> {
        let (a, b) = &self.config.language_pair;
        if lang == a {
            Ok(b.clone())
        } else if lang == b {
            Ok(a.clone())
        } else {
            Err(PipelineError::OppositeUndefined(
                lang.as_str().to_string(),
                a.as_str().to_string(),
                b.as_str().to_string(),
            ))
        }
    }

    fn timed_chat(
        &self,
        ledger: &mut Vec<BackendCall>,
        kind: CallKind,
        purpose: CallPurpose,
        prompt: &str,
    ) -> Result<crate::backends::ChatResponse, PipelineError> {
        let req = ChatRequest::deterministic(prompt, &self.model_id)
            .with_max_tokens(self.config.max_tokens);
        let t0 = self.clock.now_ms();
        let result = self.chat.chat(&req);
        let latency_ms = self.clock.now_ms().saturating_sub(t0);
        ledger.push(BackendCall {
            kind,
            purpose,
            latency_ms,
            usage: result.as_ref().ok().and_then(|r| r.usage),
        });
        Ok(result?)
    }

    fn timed_translate(
        &self,
        ledger: &mut Vec<BackendCall>,
        purpose: CallPurpose,
        text: &str,
        target: &LanguageCode,
        source: Option<&LanguageCode>,
    ) -> Result<String, PipelineError> {
        let mut req = TranslationRequest::new(text, target.clone())?;
        if let Some(source) = source {
            req = req.with_source(source.clone());
        }
        let t0 = self.clock.now_ms();
        let result = self.translator.translate(&req);
        let latency_ms = self.clock.now_ms().saturating_sub(t0);
        ledger.push(BackendCall {
            kind: CallKind::Translator,
            purpose,
            latency_ms,
            usage: None,
        });
        Ok(result?)
    }

    /// Renders the selection prompt for the query's language, asks the
    /// model, and takes the last language mention in the reply. An
    /// unparseable reply falls back to the opposite language with
    /// `parse_failed = true` rather than failing.
    pub fn select_target_language(
        &self,
        query: &Query,
        ledger: &mut Vec<BackendCall>,
    ) -> Result<(LanguageCode, bool), PipelineError> {
        let template = self
            .templates
            .get_exact(TemplateKind::Selection, &query.source_lang)
            .ok_or(TemplateError::NotFound {
                kind: TemplateKind::Selection,
                lang: query.source_lang.as_str().to_string(),
            })?;
        let prompt = format!("{}{}", template.body(), query.text);
        let resp = self.timed_chat(ledger, CallKind::Llm, CallPurpose::Select, &prompt)?;
        match self.registry.find_last_mention(&resp.text) {
            Some(lang) => Ok((lang, false)),
            None => Ok((self.opposite(&query.source_lang)?, true)),
        }
    }

    /// Runs one query end to end. Backend failures abort that query; the
    /// returned trace records the path up to the failure point with the
    /// error message attached.
    pub fn run_query(&self, query: &Query) -> PipelineTrace {
        let mut trace = PipelineTrace {
            query_id: query.id.clone(),
            detector_verdict: 0,
            selected_lang: None,
            selection_parse_failed: false,
            translated_query: None,
            answer_target: None,
            answer_original: None,
            answer_final: None,
            call_ledger: Vec::new(),
            third_language_integration: false,
            error: None,
        };
        if let Err(e) = self.run_inner(query, &mut trace) {
            trace.error = Some(e.to_string());
        }
        trace
    }

    fn run_inner(&self, query: &Query, trace: &mut PipelineTrace) -> Result<(), PipelineError> {
        let enhanced = match self.config.ablation {
            Some(Ablation::NoDetector) => true,
            _ => {
                let detector = self
                    .detectors
                    .get(query.source_lang.as_str())
                    .ok_or_else(|| {
                        PipelineError::NoDetectorForLanguage(query.source_lang.as_str().into())
                    })?;
                detector.detect(query)?
            }
        };
        trace.detector_verdict = u8::from(enhanced);

        if !enhanced {
            let resp = self.timed_chat(
                &mut trace.call_ledger,
                CallKind::Llm,
                CallPurpose::Direct,
                &query.text,
            )?;
            trace.answer_final = Some(Answer {
                text: resp.text,
                lang: query.source_lang.clone(),
                provenance: AnswerProvenance::Direct,
            });
            return Ok(());
        }

        let (target_lang, parse_failed) = match self.config.ablation {
            Some(Ablation::NoSelection) => (self.opposite(&query.source_lang)?, false),
            _ => self.select_target_language(query, &mut trace.call_ledger)?,
        };
        trace.selected_lang = Some(target_lang.clone());
        trace.selection_parse_failed = parse_failed;

        let translated = self.timed_translate(
            &mut trace.call_ledger,
            CallPurpose::TranslateQuery,
            &query.text,
            &target_lang,
            Some(&query.source_lang),
        )?;
        trace.translated_query = Some(translated.clone());

        let target_resp = self.timed_chat(
            &mut trace.call_ledger,
            CallKind::Llm,
            CallPurpose::TargetAnswer,
            &translated,
        )?;
        let answer_target = Answer {
            text: target_resp.text,
            lang: target_lang.clone(),
            provenance: AnswerProvenance::TargetLangRaw,
        };
        trace.answer_target = Some(answer_target.clone());

        match self.config.mode {
            PipelineMode::Replace => {
                // A back-translation failure is an error, not a silent
                // passthrough: returning a foreign-language answer would
                // break the output-language contract.
                let back = self.timed_translate(
                    &mut trace.call_ledger,
                    CallPurpose::TranslateBack,
                    &answer_target.text,
                    &query.source_lang,
                    Some(&target_lang),
                )?;
                trace.answer_final = Some(Answer {
                    text: back,
                    lang: query.source_lang.clone(),
                    provenance: AnswerProvenance::Replaced,
                });
            }
            PipelineMode::Integrate => {
                let original_resp = self.timed_chat(
                    &mut trace.call_ledger,
                    CallKind::Llm,
                    CallPurpose::OriginalAnswer,
                    &query.text,
                )?;
                let answer_original = Answer {
                    text: original_resp.text,
                    lang: query.source_lang.clone(),
                    provenance: AnswerProvenance::Direct,
                };
                trace.answer_original = Some(answer_original.clone());
                let rendered = self.render_integration(
                    query,
                    &answer_target,
                    &answer_original,
                    trace,
                )?;
                let final_resp = self.timed_chat(
                    &mut trace.call_ledger,
                    CallKind::Llm,
                    CallPurpose::Integrate,
                    &rendered,
                )?;
                trace.answer_final = Some(Answer {
                    text: final_resp.text,
                    lang: query.source_lang.clone(),
                    provenance: AnswerProvenance::Integrated,
                });
            }
        }
        Ok(())
    }

    /// Binds the bilingual integration slots. The slot matching the
    /// original language takes the original answer; the other slot takes
    /// the target answer, translated into the slot's language first when
    /// it arrived in a third language.
    fn render_integration(
        &self,
        query: &Query,
        answer_target: &Answer,
        answer_original: &Answer,
        trace: &mut PipelineTrace,
    ) -> Result<String, PipelineError> {
        let zh = LanguageCode::parse_code("zh").unwrap();
        let en = LanguageCode::parse_code("en").unwrap();
        let source = &query.source_lang;
        let other_slot = if *source == zh {
            en.clone()
        } else if *source == en {
            zh.clone()
        } else {
            return Err(PipelineError::UnsupportedIntegrationLanguage(
                source.as_str().to_string(),
            ));
        };

        let target_text = if answer_target.lang == other_slot {
            answer_target.text.clone()
        } else {
            trace.third_language_integration = true;
            self.timed_translate(
                &mut trace.call_ledger,
                CallPurpose::TranslateForIntegration,
                &answer_target.text,
                &other_slot,
                Some(&answer_target.lang),
            )?
        };

        let (ch_res, en_res) = if *source == zh {
            (answer_original.text.as_str(), target_text.as_str())
        } else {
            (target_text.as_str(), answer_original.text.as_str())
        };

        let key_lang = match self.config.integration_key {
            IntegrationKey::OutputLanguage => source.clone(),
            IntegrationKey::TargetLanguage => other_slot,
        };
        let template = self.templates.get(TemplateKind::Integration, &key_lang)?;
        Ok(template.render(&[
            ("[[Q]]", query.text.as_str()),
            ("[[CH_RES]]", ch_res),
            ("[[EN_RES]]", en_res),
        ])?)
    }

    /// Runs a batch with the configured parallelism. Traces come back in
    /// input order; per-query failures are embedded in their traces and
    /// never abort the batch.
    pub fn run_batch(&self, queries: &[Query]) -> BatchResult {
        let traces = if self.config.parallelism <= 1 || queries.len() <= 1 {
            queries.iter().map(|q| self.run_query(q)).collect()
        } else {
            let next = AtomicUsize::new(0);
            let results: Mutex<Vec<Option<PipelineTrace>>> =
                Mutex::new((0..queries.len()).map(|_| None).collect());
            let workers = self.config.parallelism.min(queries.len());
            std::thread::scope(|scope| {
                for _ in 0..workers {
                    scope.spawn(|| loop {
                        let i = next.fetch_add(1, Ordering::SeqCst);
                        if i >= queries.len() {
                            break;
                        }
                        let trace = self.run_query(&queries[i]);
                        results.lock().expect("results poisoned")[i] = Some(trace);
                    });
                }
            });
            results
                .into_inner()
                .expect("results poisoned")
                .into_iter()
                .map(|t| t.expect("every slot filled"))
                .collect::<Vec<_>>()
        };
        let cost = CostSummary::from_traces(&traces);
        BatchResult { traces, cost }
    }
}
