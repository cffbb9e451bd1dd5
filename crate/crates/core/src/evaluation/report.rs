//! Accuracy, cross-lingual gap, and cost reporting over judged traces.
//! All accuracy arithmetic is exact rational; floats appear only at
//! display time.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::lang::LanguageCode;
use crate::pipeline::CostSummary;
use crate::ratio::Ratio;
use crate::types::{PipelineTrace, Query};

/// Correct/total counts with the exact accuracy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellStats {
    pub correct: u64,
    pub total: u64,
    pub accuracy: Ratio,
}

impl CellStats {
    fn from_counts(correct: u64, total: u64) -> Self {
        CellStats {
            correct,
            total,
            accuracy: Ratio::from_counts(correct, total),
        }
    }
}

/// Flag mirroring the report-table coloring rule: a cell moved by more
/// than one percentage point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellFlag {
    Improved,
    Decreased,
}

/// One (dataset, language) row of the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRow {
    pub dataset: String,
    pub lang: LanguageCode,
    pub original: CellStats,
    pub improved: CellStats,
    /// improved − original accuracy, exact.
    pub delta: Ratio,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flag: Option<CellFlag>,
}

/// Per-dataset absolute accuracy gap between its two languages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetGap {
    pub dataset: String,
    pub langs: (LanguageCode, LanguageCode),
    pub gap_original: Ratio,
    pub gap_improved: Ratio,
}

/// The full comparison of an original and an improved condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub cells: Vec<CellRow>,
    pub dataset_gaps: Vec<DatasetGap>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_gap_original: Option<Ratio>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_gap_improved: Option<Ratio>,
    /// Sum, in percentage points, of every cell's accuracy decrease.
    pub error_rate: Ratio,
    pub cost_original: CostSummary,
    pub cost_improved: CostSummary,
}

/// One condition's inputs: its traces and a verdict (correct?) per query
/// id.
pub struct ConditionData<'a> {
    pub traces: &'a [PipelineTrace],
    pub verdicts: &'a HashMap<String, bool>,
}

const FLAG_THRESHOLD: Ratio = Ratio::ONE; // one percentage point, applied at percent scale

fn check_coverage(queries: &[Query], data: &ConditionData, name: &str) -> Result<(), EvalError> {
    let query_ids: HashSet<&str> = queries.iter().map(|q| q.id.as_str()).collect();
    let trace_ids: HashSet<&str> = data.traces.iter().map(|t| t.query_id.as_str()).collect();
    if query_ids != trace_ids {
        let missing: Vec<&&str> = query_ids.difference(&trace_ids).take(3).collect();
        let extra: Vec<&&str> = trace_ids.difference(&query_ids).take(3).collect();
        return Err(EvalError::MismatchedQuerySets(format!(
            "{name}: missing {missing:?}, unexpected {extra:?}"
        )));
    }
    for q in queries {
        if !data.verdicts.contains_key(&q.id) {
            return Err(EvalError::MissingVerdict(q.id.clone()));
        }
    }
    Ok(())
}

/// Builds the report comparing two conditions over identical query sets.
pub fn compute_report(
    queries: &[Query],
    original: &ConditionData,
    improved: &ConditionData,
) -> Result<EvalReport, EvalError> {
    check_coverage(queries, original, "original")?;
    check_coverage(queries, improved, "improved")?;

    #[derive(Default)]
    struct Acc {
        orig_correct: u64,
        impr_correct: u64,
        total: u64,
    }
    let mut cells: BTreeMap<(String, String), Acc> = BTreeMap::new();
    let mut langs_in_dataset: BTreeMap<String, Vec<LanguageCode>> = BTreeMap::new();
    for q in queries {
        let dataset = q.dataset.clone().unwrap_or_else(|| "default".to_string());
        let key = (dataset.clone(), q.source_lang.as_str().to_string());
        let acc = cells.entry(key).or_default();
        acc.total += 1;
        if original.verdicts[&q.id] {
            acc.orig_correct += 1;
        }
        if improved.verdicts[&q.id] {
            acc.impr_correct += 1;
        }
        let langs = langs_in_dataset.entry(dataset).or_default();
        if !langs.contains(&q.source_lang) {
            langs.push(q.source_lang.clone());
        }
    }

    let one_point = FLAG_THRESHOLD; // percent units
    let mut rows = Vec::with_capacity(cells.len());
    let mut error_rate = Ratio::ZERO;
    for ((dataset, lang), acc) in &cells {
        let original_stats = CellStats::from_counts(acc.orig_correct, acc.total);
        let improved_stats = CellStats::from_counts(acc.impr_correct, acc.total);
        let delta = improved_stats.accuracy.sub(original_stats.accuracy);
        let delta_points = delta.scale(100);
        let flag = if delta_points > one_point {
            Some(CellFlag::Improved)
        } else if delta_points < one_point.scale(-1) {
            Some(CellFlag::Decreased)
        } else {
            None
        };
        if delta < Ratio::ZERO {
            error_rate = error_rate.add(delta.abs().scale(100));
        }
        rows.push(CellRow {
            dataset: dataset.clone(),
            lang: LanguageCode::parse_code(lang).expect("cell key is a valid code"),
            original: original_stats,
            improved: improved_stats,
            delta,
            flag,
        });
    }

    let mut dataset_gaps = Vec::new();
    for (dataset, langs) in &langs_in_dataset {
        if langs.len() != 2 {
            continue;
        }
        let stats = |lang: &LanguageCode| {
            rows.iter()
                .find(|r| &r.dataset == dataset && r.lang == *lang)
                .expect("row exists for every (dataset, lang)")
        };
        let a = stats(&langs[0]);
        let b = stats(&langs[1]);
        dataset_gaps.push(DatasetGap {
            dataset: dataset.clone(),
            langs: (langs[0].clone(), langs[1].clone()),
            gap_original: a.original.accuracy.sub(b.original.accuracy).abs(),
            gap_improved: a.improved.accuracy.sub(b.improved.accuracy).abs(),
        });
    }

    let mean = |pick: fn(&DatasetGap) -> Ratio| -> Option<Ratio> {
        if dataset_gaps.is_empty() {
            return None;
        }
        let sum = dataset_gaps
            .iter()
            .map(pick)
            .fold(Ratio::ZERO, |acc, g| acc.add(g));
        Some(sum.div(dataset_gaps.len() as i64))
    };

    Ok(EvalReport {
        cells: rows,
        mean_gap_original: mean(|g| g.gap_original),
        mean_gap_improved: mean(|g| g.gap_improved),
        dataset_gaps,
        error_rate,
        cost_original: cost_summary(original.traces),
        cost_improved: cost_summary(improved.traces),
    })
}

fn cost_summary(traces: &[PipelineTrace]) -> CostSummary {
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

impl EvalReport {
    /// Aligned-column text table: one dataset row per language with
    /// original/improved accuracy, plus gap and cost footers.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<16} {:<6} {:>10} {:>10} {:>9}  {}\n",
            "Dataset", "Lang", "Origi.", "Impro.", "Delta", "Flag"
        ));
        out.push_str(&format!("{}\n", "-".repeat(62)));
        for row in &self.cells {
            let flag = match row.flag {
                Some(CellFlag::Improved) => "improved",
                Some(CellFlag::Decreased) => "decreased",
                None => "",
            };
            out.push_str(&format!(
                "{:<16} ({:<4} {:>9.2}% {:>9.2}% {:>+8.2}  {}\n",
                row.dataset,
                format!("{})", row.lang),
                row.original.accuracy.percent(),
                row.improved.accuracy.percent(),
                row.delta.percent(),
                flag
            ));
        }
        if !self.dataset_gaps.is_empty() {
            out.push_str(&format!("{}\n", "-".repeat(62)));
            for gap in &self.dataset_gaps {
                out.push_str(&format!(
                    "{:<16} gap {:>6.2} -> {:>6.2} points ({}, {})\n",
                    gap.dataset,
                    gap.gap_original.percent(),
                    gap.gap_improved.percent(),
                    gap.langs.0,
                    gap.langs.1
                ));
            }
        }
        if let (Some(before), Some(after)) = (self.mean_gap_original, self.mean_gap_improved) {
            out.push_str(&format!(
                "mean gap         {:>6.2} -> {:>6.2} points\n",
                before.percent(),
                after.percent()
            ));
        }
        out.push_str(&format!(
            "error rate       {:>6.2} points\n",
            self.error_rate.to_f64()
        ));
        out.push_str(&format!(
            "mean calls/query {:>6.2} -> {:>6.2}   mean ms/query {:>8.1} -> {:>8.1}\n",
            self.cost_original.mean_remote_calls.to_f64(),
            self.cost_improved.mean_remote_calls.to_f64(),
            self.cost_original.mean_wall_ms.to_f64(),
            self.cost_improved.mean_wall_ms.to_f64(),
        ));
        out
    }
}
