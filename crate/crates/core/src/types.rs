//! Domain types shared by every module: queries, labels, answers, and the
//! per-query pipeline trace with its backend-call ledger.

use serde::{Deserialize, Serialize};

use crate::lang::LanguageCode;

/// A user question with a declared source language. The source language is
/// an input, never inferred from the text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Query {
    pub id: String,
    pub text: String,
    #[serde(rename = "lang")]
    pub source_lang: LanguageCode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_answer: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset: Option<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum QueryError {
    #[error("query text is empty after trimming")]
    EmptyText,
    #[error("query id is empty")]
    EmptyId,
}

impl Query {
    pub fn new(id: impl Into<String>, text: impl Into<String>, source_lang: LanguageCode) -> Result<Self, QueryError> {
        let id = id.into();
        let text = text.into();
        if id.is_empty() {
            return Err(QueryError::EmptyId);
        }
        if text.trim().is_empty() {
            return Err(QueryError::EmptyText);
        }
        Ok(Query {
            id,
            text,
            source_lang,
            gold_answer: None,
            dataset: None,
        })
    }

    pub fn with_gold(mut self, gold: impl Into<String>) -> Self {
        self.gold_answer = Some(gold.into());
        self
    }

    pub fn with_dataset(mut self, dataset: impl Into<String>) -> Self {
        self.dataset = Some(dataset.into());
        self
    }
}

/// Three-way knowledge provenance label. Serialized names are part of the
/// dataset schema and must stay stable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KnowledgeLabel {
    ChSpecific,
    Common,
    EnSpecific,
}

impl KnowledgeLabel {
    pub const ALL: [KnowledgeLabel; 3] = [
        KnowledgeLabel::ChSpecific,
        KnowledgeLabel::Common,
        KnowledgeLabel::EnSpecific,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            KnowledgeLabel::ChSpecific => "ch_specific",
            KnowledgeLabel::Common => "common",
            KnowledgeLabel::EnSpecific => "en_specific",
        }
    }
}

impl std::fmt::Display for KnowledgeLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// How an answer was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnswerProvenance {
    /// Straight model answer in the source language (verdict-0 path).
    Direct,
    /// Raw answer generated in the selected target language.
    TargetLangRaw,
    /// Target-language answer translated back to the source language.
    Replaced,
    /// Merge of target- and original-language answers.
    Integrated,
}

/// A model answer tagged with its language and provenance. Final answers
/// always carry the query's source language.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Answer {
    pub text: String,
    pub lang: LanguageCode,
    pub provenance: AnswerProvenance,
}

/// Remote backend family a ledger entry talked to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CallKind {
    Llm,
    Translator,
    Judge,
}

/// Why a remote call was made.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CallPurpose {
    Direct,
    Select,
    TranslateQuery,
    TargetAnswer,
    TranslateBack,
    OriginalAnswer,
    Integrate,
    TranslateForIntegration,
    Judge,
    LabelPass1,
    LabelPass2,
    Generate,
    TranslateAugment,
}

/// Token counts as reported by a backend, when reported at all.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub prompt_tokens: u32,
    pub completion_tokens: u32,
}

/// One remote call in a trace's ledger.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackendCall {
    pub kind: CallKind,
    pub purpose: CallPurpose,
    pub latency_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub usage: Option<TokenUsage>,
}

/// Full record of one query's path through the pipeline.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineTrace {
    pub query_id: String,
    /// 1 when the query took the cross-lingual path, 0 otherwise.
    pub detector_verdict: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selected_lang: Option<LanguageCode>,
    pub selection_parse_failed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub translated_query: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer_target: Option<Answer>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer_original: Option<Answer>,
    /// Absent only when `error` is set: the query aborted mid-path.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer_final: Option<Answer>,
    pub call_ledger: Vec<BackendCall>,
    /// Set when the target answer had to be translated into an
    /// integration-slot language because it was in a third language.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub third_language_integration: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum TraceInvariantViolation {
    #[error("verdict 0 trace carries enhanced-path fields")]
    PassthroughCarriesEnhancedFields,
    #[error("verdict 0 trace ledger is not exactly one llm call")]
    PassthroughLedgerShape,
    #[error("verdict 1 trace is missing selected_lang")]
    MissingSelectedLang,
    #[error("verdict 1 trace is missing translated_query")]
    MissingTranslatedQuery,
    #[error("detector verdict must be 0 or 1, got {0}")]
    BadVerdict(u8),
}

impl PipelineTrace {
    /// Checks the structural invariants that hold for every completed
    /// (non-errored) trace.
    pub fn check_invariants(&self) -> Result<(), TraceInvariantViolation> {
        match self.detector_verdict {
            0 => {
                if self.selected_lang.is_some()
                    || self.translated_query.is_some()
                    || self.answer_target.is_some()
                {
                    return Err(TraceInvariantViolation::PassthroughCarriesEnhancedFields);
                }
                if self.error.is_none() {
                    let llm_only = self.call_ledger.len() == 1
                        && self.call_ledger[0].kind == CallKind::Llm;
                    if !llm_only {
                        return Err(TraceInvariantViolation::PassthroughLedgerShape);
                    }
                }
            }
            1 => {
                if self.error.is_none() {
                    if self.selected_lang.is_none() {
                        return Err(TraceInvariantViolation::MissingSelectedLang);
                    }
                    if self.translated_query.is_none() {
                        return Err(TraceInvariantViolation::MissingTranslatedQuery);
                    }
                }
            }
            other => return Err(TraceInvariantViolation::BadVerdict(other)),
        }
        Ok(())
    }

    pub fn remote_calls(&self) -> usize {
        self.call_ledger.len()
    }

    pub fn llm_calls(&self) -> usize {
        self.call_ledger
            .iter()
            .filter(|c| c.kind == CallKind::Llm)
            .count()
    }

    pub fn total_latency_ms(&self) -> u64 {
        self.call_ledger.iter().map(|c| c.latency_ms).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::LanguageRegistry;

    fn lang(code: &str) -> LanguageCode {
        LanguageRegistry::builtin().normalize(code).unwrap()
    }

    #[test]
    fn query_requires_nonempty_text() {
        assert!(matches!(
            Query::new("q1", "   ", lang("en")),
            Err(QueryError::EmptyText)
        ));
        assert!(Query::new("q1", "what is a byte?", lang("en")).is_ok());
    }

    #[test]
    fn knowledge_label_names_are_stable() {
        let json = serde_json::to_string(&KnowledgeLabel::ChSpecific).unwrap();
        assert_eq!(json, "\"ch_specific\"");
        let back: KnowledgeLabel = serde_json::from_str("\"en_specific\"").unwrap();
        assert_eq!(back, KnowledgeLabel::EnSpecific);
    }

    #[test]
    fn passthrough_trace_invariants() {
        let trace = PipelineTrace {
            query_id: "q1".into(),
            detector_verdict: 0,
            selected_lang: None,
            selection_parse_failed: false,
            translated_query: None,
            answer_target: None,
            answer_original: None,
            answer_final: Some(Answer {
                text: "42".into(),
                lang: lang("en"),
                provenance: AnswerProvenance::Direct,
            }),
            call_ledger: vec![BackendCall {
                kind: CallKind::Llm,
                purpose: CallPurpose::Direct,
                latency_ms: 0,
                usage: None,
            }],
            third_language_integration: false,
            error: None,
        };
        trace.check_invariants().unwrap();

        let mut bad = trace.clone();
        bad.selected_lang = Some(lang("zh"));
        assert_eq!(
            bad.check_invariants(),
            Err(TraceInvariantViolation::PassthroughCarriesEnhancedFields)
        );
    }

    #[test]
    fn enhanced_trace_requires_selection_fields() {
        let trace = PipelineTrace {
            query_id: "q1".into(),
            detector_verdict: 1,
            selected_lang: None,
            selection_parse_failed: false,
            translated_query: None,
            answer_target: None,
            answer_original: None,
            answer_final: None,
            call_ledger: vec![],
            third_language_integration: false,
            error: None,
        };
        assert_eq!(
            trace.check_invariants(),
            Err(TraceInvariantViolation::MissingSelectedLang)
        );
    }
}
