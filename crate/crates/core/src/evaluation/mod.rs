//! Answer evaluation: LLM-as-judge correctness, 1–10 rubric scoring,
//! accuracy and cross-lingual-gap reports, and ablation comparisons.

pub mod ablation;
pub mod report;

pub use ablation::{grade_traces, run_ablation, AblationReport, Condition, ConditionOutcome, Grader};
pub use report::{compute_report, CellRow, CellStats, ConditionData, DatasetGap, EvalReport};

use serde::{Deserialize, Serialize};

use crate::backends::{BackendError, ChatBackend, ChatRequest};
use crate::lang::LanguageCode;
use crate::pipeline::{TemplateError, TemplateKind, TemplateSet};
use crate::types::Query;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("ambiguous judge verdict in reply {0:?}")]
    AmbiguousVerdict(String),
    #[error("no score found in reply {0:?}")]
    NoScoreFound(String),
    #[error("query sets differ between conditions: {0}")]
    MismatchedQuerySets(String),
    #[error("no verdict recorded for query {0}")]
    MissingVerdict(String),
    #[error("query {0} has no gold answer to judge against")]
    MissingGold(String),
    #[error("ablation suite is empty")]
    EmptySuite,
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error(transparent)]
    Pipeline(#[from] crate::pipeline::PipelineError),
}

/// Binary judge outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Correctness {
    Correct,
    Wrong,
}

/// A judge call's parsed outcome plus the raw reply it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeVerdict {
    pub value: Correctness,
    pub raw_reply: String,
}

/// A 1–10 rubric score plus the raw reply.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreVerdict {
    pub score: u8,
    pub raw_reply: String,
}

use crate::textmatch::contains_whole_word;

/// Parses a judge reply into a verdict. Pure function of the reply text:
/// the trimmed lowercased reply wins on exact match; otherwise exactly
/// one of the keywords must appear as a whole word. Anything else is
/// ambiguous.
pub fn parse_judge_reply(raw: &str) -> Result<Correctness, EvalError> {
    let lowered = raw.trim().to_lowercase();
    if lowered == "correct" {
        return Ok(Correctness::Correct);
    }
    if lowered == "wrong" {
        return Ok(Correctness::Wrong);
    }
    let has_correct = contains_whole_word(&lowered, "correct");
    let has_wrong = contains_whole_word(&lowered, "wrong");
    match (has_correct, has_wrong) {
        (true, false) => Ok(Correctness::Correct),
        (false, true) => Ok(Correctness::Wrong),
        _ => Err(EvalError::AmbiguousVerdict(raw.to_string())),
    }
}

/// Extracts the last standalone integer in [1, 10] from a reply.
/// `k/10` is read as the score `k`; digits that are part of decimals do
/// not count as standalone.
pub fn parse_score_reply(raw: &str) -> Result<u8, EvalError> {
    let bytes = raw.as_bytes();
    let mut best: Option<u8> = None;
    let mut i = 0;
    while i < bytes.len() {
        if !bytes[i].is_ascii_digit() {
            i += 1;
            continue;
        }
        let start = i;
        while i < bytes.len() && bytes[i].is_ascii_digit() {
            i += 1;
        }
        let run = &raw[start..i];

        // part of a decimal number on either side
        let prev_is_decimal_point = start >= 2
            && bytes[start - 1] == b'.'
            && bytes[start - 2].is_ascii_digit();
        let next_is_decimal_point =
            i + 1 < bytes.len() && bytes[i] == b'.' && bytes[i + 1].is_ascii_digit();
        if prev_is_decimal_point || next_is_decimal_point {
            continue;
        }

        let Ok(value) = run.parse::<u64>() else {
            continue;
        };

        // fraction form k/10: take k and consume the denominator
        if bytes[i..].starts_with(b"/10")
            && !bytes.get(i + 3).is_some_and(|b| b.is_ascii_digit())
        {
            i += 3;
            if (1..=10).contains(&value) {
                best = Some(value as u8);
            }
            continue;
        }

        if (1..=10).contains(&value) {
            best = Some(value as u8);
        }
    }
    best.ok_or_else(|| EvalError::NoScoreFound(raw.to_string()))
}

/// LLM-as-judge runner: renders the judge template at temperature 0 and
/// parses the reply.
pub struct Judge<'a> {
    backend: &'a dyn ChatBackend,
    templates: &'a TemplateSet,
    model_id: String,
    template_lang: LanguageCode,
}

impl<'a> Judge<'a> {
    pub fn new(
        backend: &'a dyn ChatBackend,
        templates: &'a TemplateSet,
        model_id: impl Into<String>,
        template_lang: LanguageCode,
    ) -> Self {
        Judge {
            backend,
            templates,
            model_id: model_id.into(),
            template_lang,
        }
    }

    pub fn judge(
        &self,
        question: &str,
        gold: &str,
        candidate: &str,
    ) -> Result<JudgeVerdict, EvalError> {
        let template = self.templates.get(TemplateKind::Judge, &self.template_lang)?;
        let prompt = template.render(&[
            ("[QUESTION]", question),
            ("[ANSWER]", gold),
            ("[RES]", candidate),
        ])?;
        let req = ChatRequest::deterministic(prompt, &self.model_id);
        let resp = self.backend.chat(&req)?;
        let value = parse_judge_reply(&resp.text)?;
        Ok(JudgeVerdict {
            value,
            raw_reply: resp.text,
        })
    }

    /// Judges a query's final answer against its gold answer.
    pub fn judge_query(&self, query: &Query, candidate: &str) -> Result<JudgeVerdict, EvalError> {
        let gold = query
            .gold_answer
            .as_deref()
            .ok_or_else(|| EvalError::MissingGold(query.id.clone()))?;
        self.judge(&query.text, gold, candidate)
    }
}

/// Rubric scorer: renders a 1–10 scoring template and extracts the score.
pub fn score_1to10(
    backend: &dyn ChatBackend,
    rubric_prompt: &str,
    model_id: &str,
) -> Result<ScoreVerdict, EvalError> {
    let req = ChatRequest::deterministic(rubric_prompt, model_id);
    let resp = backend.chat(&req)?;
    let score = parse_score_reply(&resp.text)?;
    Ok(ScoreVerdict {
        score,
        raw_reply: resp.text,
    })
}
