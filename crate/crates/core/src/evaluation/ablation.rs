//! Ablation harness: run the same queries under several pipeline
//! conditions and compare each against the direct baseline.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::report::{compute_report, ConditionData, EvalReport};
use super::EvalError;
use crate::pipeline::{CostSummary, Pipeline, PipelineError};
use crate::types::{PipelineTrace, Query};

/// A pipeline condition in an ablation comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    /// Plain single-call answers: the "original" column.
    Direct,
    /// Detector + selection + enhancement, all on.
    Full,
    /// Every query forced through the enhanced path.
    NoDetector,
    /// Enhanced queries always use the opposite language.
    NoSelection,
}

impl Condition {
    pub fn as_str(&self) -> &'static str {
        match self {
            Condition::Direct => "direct",
            Condition::Full => "full",
            Condition::NoDetector => "no_detector",
            Condition::NoSelection => "no_selection",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "direct" => Condition::Direct,
            "full" => Condition::Full,
            "no_detector" => Condition::NoDetector,
            "no_selection" => Condition::NoSelection,
            _ => return None,
        })
    }
}

impl std::fmt::Display for Condition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Grades one query's final answer. Implemented by the LLM judge and by
/// the sim world's exact answer matcher.
pub trait Grader: Send + Sync {
    fn grade(&self, query: &Query, answer_text: &str) -> Result<bool, EvalError>;
    fn identity(&self) -> String;
}

/// Grades a batch of traces into a verdict map. Errored traces (no final
/// answer) grade as wrong.
pub fn grade_traces(
    grader: &dyn Grader,
    queries: &[Query],
    traces: &[PipelineTrace],
) -> Result<HashMap<String, bool>, EvalError> {
    let by_id: HashMap<&str, &PipelineTrace> =
        traces.iter().map(|t| (t.query_id.as_str(), t)).collect();
    let mut verdicts = HashMap::with_capacity(queries.len());
    for q in queries {
        let trace = by_id
            .get(q.id.as_str())
            .ok_or_else(|| EvalError::MismatchedQuerySets(format!("no trace for {}", q.id)))?;
        let verdict = match &trace.answer_final {
            Some(answer) => grader.grade(q, &answer.text)?,
            None => false,
        };
        verdicts.insert(q.id.clone(), verdict);
    }
    Ok(verdicts)
}

/// One condition's run artifacts and its comparison against direct.
pub struct ConditionOutcome {
    pub condition: Condition,
    pub traces: Vec<PipelineTrace>,
    pub cost: CostSummary,
    pub verdicts: HashMap<String, bool>,
    /// Report of this condition (improved) against direct (original).
    pub versus_direct: EvalReport,
}

/// Direct baseline plus each requested condition.
pub struct AblationReport {
    pub direct_traces: Vec<PipelineTrace>,
    pub direct_cost: CostSummary,
    pub direct_verdicts: HashMap<String, bool>,
    pub outcomes: Vec<ConditionOutcome>,
}

/// Runs the suite on identical queries. `build` constructs the pipeline
/// for each condition; the direct baseline always runs first.
pub fn run_ablation(
    suite: &[Condition],
    queries: &[Query],
    build: &dyn Fn(Condition) -> Result<Pipeline, PipelineError>,
    grader: &dyn Grader,
) -> Result<AblationReport, EvalError> {
    if suite.is_empty() {
        return Err(EvalError::EmptySuite);
    }
    let direct = build(Condition::Direct)?.run_batch(queries);
    let direct_verdicts = grade_traces(grader, queries, &direct.traces)?;

    let mut outcomes = Vec::with_capacity(suite.len());
    for &condition in suite {
        if condition == Condition::Direct {
            continue;
        }
        let run = build(condition)?.run_batch(queries);
        let verdicts = grade_traces(grader, queries, &run.traces)?;
        let versus_direct = compute_report(
            queries,
            &ConditionData {
                traces: &direct.traces,
                verdicts: &direct_verdicts,
            },
            &ConditionData {
                traces: &run.traces,
                verdicts: &verdicts,
            },
        )?;
        outcomes.push(ConditionOutcome {
            condition,
            traces: run.traces,
            cost: run.cost,
            verdicts,
            versus_direct,
        });
    }
    Ok(AblationReport {
        direct_traces: direct.traces,
        direct_cost: direct.cost,
        direct_verdicts,
        outcomes,
    })
}
