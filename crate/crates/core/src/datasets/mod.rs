//! Corpus ingestion, translation augmentation, the two-pass labeling
//! workflow with its file-based human-review queue, and attribute-guided
//! synthetic question generation.

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::backends::{
    BackendError, ChatBackend, ChatRequest, TranslationRequest, Translator, LABELING_TEMPERATURE,
};
use crate::lang::{LanguageCode, LanguageRegistry};
use crate::pipeline::{TemplateError, TemplateKind, TemplateSet};
use crate::textmatch::contains_whole_word;
use crate::types::{KnowledgeLabel, Query};

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("line {line}: {message}")]
    SchemaViolation { line: usize, message: String },
    #[error("unknown topic {0:?}; register it in the topic list first")]
    UnknownTopic(String),
    #[error("generation reply contained no usable entries: {0}")]
    UnparseableGeneration(String),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// How a record's label came to be.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelProvenance {
    LlmAgreed,
    HumanReviewed,
    Generated,
}

/// One labeled corpus record, the JSON Lines schema every corpus file
/// uses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledRecord {
    pub id: String,
    pub text: String,
    pub lang: LanguageCode,
    pub label: KnowledgeLabel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_answer: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label_provenance: Option<LabelProvenance>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pass1: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pass2: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub translated_from: Option<LanguageCode>,
}

impl LabeledRecord {
    pub fn to_query(&self) -> Query {
        Query {
            id: self.id.clone(),
            text: self.text.clone(),
            source_lang: self.lang.clone(),
            gold_answer: self.gold_answer.clone(),
            dataset: self.dataset.clone(),
        }
    }

    pub fn training_pair(&self) -> (String, KnowledgeLabel) {
        (self.text.clone(), self.label)
    }
}

/// Per-label record counts, as reported after every ingest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LabelCounts {
    pub ch_specific: u64,
    pub common: u64,
    pub en_specific: u64,
    pub total: u64,
}

impl LabelCounts {
    pub fn tally(records: &[LabeledRecord]) -> Self {
        let mut counts = LabelCounts::default();
        for r in records {
            match r.label {
                KnowledgeLabel::ChSpecific => counts.ch_specific += 1,
                KnowledgeLabel::Common => counts.common += 1,
                KnowledgeLabel::EnSpecific => counts.en_specific += 1,
            }
            counts.total += 1;
        }
        counts
    }
}

/// Reads a JSON Lines corpus, validating each record against the schema
/// and the language registry. Blank lines are tolerated.
pub fn ingest(
    path: &Path,
    registry: &LanguageRegistry,
) -> Result<(Vec<LabeledRecord>, LabelCounts), DatasetError> {
    let file = std::fs::File::open(path)?;
    let reader = std::io::BufReader::new(file);
    let mut records = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: LabeledRecord =
            serde_json::from_str(&line).map_err(|e| DatasetError::SchemaViolation {
                line: line_no,
                message: e.to_string(),
            })?;
        if record.text.trim().is_empty() {
            return Err(DatasetError::SchemaViolation {
                line: line_no,
                message: "text is empty".into(),
            });
        }
        if record.id.is_empty() {
            return Err(DatasetError::SchemaViolation {
                line: line_no,
                message: "id is empty".into(),
            });
        }
        if !registry.contains(&record.lang) {
            return Err(DatasetError::SchemaViolation {
                line: line_no,
                message: format!("lang {} is not in the registry", record.lang),
            });
        }
        records.push(record);
    }
    let counts = LabelCounts::tally(&records);
    Ok((records, counts))
}

/// Writes records as JSON Lines, atomically (write-temp-then-rename).
pub fn write_jsonl<T: Serialize>(items: &[T], path: &Path) -> Result<(), DatasetError> {
    let tmp = path.with_extension("tmp");
    {
        let file = std::fs::File::create(&tmp)?;
        let mut w = std::io::BufWriter::new(file);
        for item in items {
            let line = serde_json::to_string(item).expect("record serializes");
            writeln!(w, "{line}")?;
        }
        w.flush()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// A record that could not be translated, kept for the operator.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AugmentFailure {
    pub id: String,
    pub error: String,
}

/// Duplicates each record into the target language via the translator.
/// Records already in the target language are skipped; labels and gold
/// answers are carried over untouched; failures are collected, not fatal.
pub fn translate_augment(
    records: &[LabeledRecord],
    target: &LanguageCode,
    translator: &dyn Translator,
) -> (Vec<LabeledRecord>, Vec<AugmentFailure>) {
    let mut out = records.to_vec();
    let mut failures = Vec::new();
    for record in records {
        if record.lang == *target {
            continue;
        }
        let req = match TranslationRequest::new(record.text.clone(), target.clone()) {
            Ok(req) => req.with_source(record.lang.clone()),
            Err(e) => {
                failures.push(AugmentFailure {
                    id: record.id.clone(),
                    error: e.to_string(),
                });
                continue;
            }
        };
        match translator.translate(&req) {
            Ok(text) => out.push(LabeledRecord {
                id: format!("{}-{}", record.id, target),
                text,
                lang: target.clone(),
                label: record.label,
                gold_answer: record.gold_answer.clone(),
                dataset: record.dataset.clone(),
                label_provenance: record.label_provenance,
                pass1: None,
                pass2: None,
                translated_from: Some(record.lang.clone()),
            }),
            Err(e) => failures.push(AugmentFailure {
                id: record.id.clone(),
                error: e.to_string(),
            }),
        }
    }
    (out, failures)
}

/// Category surface forms accepted from labeling and generation replies,
/// in both scripts.
const CATEGORY_SURFACES: &[(&str, KnowledgeLabel)] = &[
    ("english knowledge", KnowledgeLabel::EnSpecific),
    ("英文知识", KnowledgeLabel::EnSpecific),
    ("英语知识", KnowledgeLabel::EnSpecific),
    ("chinese knowledge", KnowledgeLabel::ChSpecific),
    ("中文知识", KnowledgeLabel::ChSpecific),
    ("中国知识", KnowledgeLabel::ChSpecific),
    (
        "knowledge with no specific language",
        KnowledgeLabel::Common,
    ),
    ("无特定语言知识", KnowledgeLabel::Common),
    ("无特定语言的知识", KnowledgeLabel::Common),
    ("没有特定语言的知识", KnowledgeLabel::Common),
    ("common", KnowledgeLabel::Common),
];

/// Maps a free-form category mention to a label. Returns `None` unless
/// exactly one category is mentioned.
pub fn category_to_label(reply: &str) -> Option<KnowledgeLabel> {
    let lowered = reply.trim().to_lowercase();
    let mut found: Option<KnowledgeLabel> = None;
    for (surface, label) in CATEGORY_SURFACES {
        let hit = if surface.is_ascii() {
            contains_whole_word(&lowered, surface)
        } else {
            lowered.contains(surface)
        };
        if hit {
            match found {
                None => found = Some(*label),
                Some(existing) if existing == *label => {}
                Some(_) => return None,
            }
        }
    }
    found
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReviewStatus {
    Pending,
    Resolved,
    Discarded,
}

/// A labeling disagreement awaiting human review. Created only when the
/// two passes differ (an unparseable pass counts as disagreement).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewQueueItem {
    pub record_id: String,
    pub pass1_raw: String,
    pub pass2_raw: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pass1: Option<KnowledgeLabel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pass2: Option<KnowledgeLabel>,
    pub status: ReviewStatus,
    /// Set by the reviewer when status is `resolved`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolution: Option<KnowledgeLabel>,
}

/// Output of one labeling run: records whose two passes agreed, plus the
/// queue of disagreements. `agreed.len() + queue.len() == input.len()`.
pub struct LabelingOutcome {
    pub agreed: Vec<LabeledRecord>,
    pub queue: Vec<ReviewQueueItem>,
}

/// Labels records with two independent chat calls at temperature 1.0.
/// Agreement yields an `llm_agreed` record; disagreement or an
/// unparseable reply queues the record for human review.
pub fn llm_label(
    records: &[Query],
    backend: &dyn ChatBackend,
    model_id: &str,
    templates: &TemplateSet,
) -> Result<LabelingOutcome, DatasetError> {
    let mut agreed = Vec::new();
    let mut queue = Vec::new();
    for record in records {
        let template = templates.get(TemplateKind::Labeling, &record.source_lang)?;
        let prompt = template.render(&[("[QUESTION]", record.text.as_str())])?;
        let mut passes = Vec::with_capacity(2);
        for _ in 0..2 {
            let req = ChatRequest::new(prompt.clone(), LABELING_TEMPERATURE, model_id)?;
            let resp = backend.chat(&req)?;
            let label = category_to_label(&resp.text);
            passes.push((resp.text, label));
        }
        let (pass1_raw, pass1) = passes.remove(0);
        let (pass2_raw, pass2) = passes.remove(0);
        match (pass1, pass2) {
            (Some(a), Some(b)) if a == b => agreed.push(LabeledRecord {
                id: record.id.clone(),
                text: record.text.clone(),
                lang: record.source_lang.clone(),
                label: a,
                gold_answer: record.gold_answer.clone(),
                dataset: record.dataset.clone(),
                label_provenance: Some(LabelProvenance::LlmAgreed),
                pass1: Some(pass1_raw),
                pass2: Some(pass2_raw),
                translated_from: None,
            }),
            (p1, p2) => queue.push(ReviewQueueItem {
                record_id: record.id.clone(),
                pass1_raw,
                pass2_raw,
                pass1: p1,
                pass2: p2,
                status: ReviewStatus::Pending,
                resolution: None,
            }),
        }
    }
    Ok(LabelingOutcome { agreed, queue })
}

/// Reads a review queue file (JSON Lines of [`ReviewQueueItem`]).
pub fn read_queue(path: &Path) -> Result<Vec<ReviewQueueItem>, DatasetError> {
    let file = std::fs::File::open(path)?;
    let reader = std::io::BufReader::new(file);
    let mut items = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let item: ReviewQueueItem =
            serde_json::from_str(&line).map_err(|e| DatasetError::SchemaViolation {
                line: idx + 1,
                message: e.to_string(),
            })?;
        items.push(item);
    }
    Ok(items)
}

/// Merges reviewed queue items back into records by id. Resolved items
/// become `human_reviewed` records; discarded items drop their record;
/// pending items stay out.
pub fn resolve_queue(
    records: &[Query],
    queue: &[ReviewQueueItem],
) -> (Vec<LabeledRecord>, Vec<String>) {
    let by_id: HashMap<&str, &ReviewQueueItem> = queue
        .iter()
        .map(|item| (item.record_id.as_str(), item))
        .collect();
    let mut merged = Vec::new();
    let mut discarded = Vec::new();
    for record in records {
        match by_id.get(record.id.as_str()) {
            Some(item) if item.status == ReviewStatus::Resolved => {
                if let Some(label) = item.resolution {
                    merged.push(LabeledRecord {
                        id: record.id.clone(),
                        text: record.text.clone(),
                        lang: record.source_lang.clone(),
                        label,
                        gold_answer: record.gold_answer.clone(),
                        dataset: record.dataset.clone(),
                        label_provenance: Some(LabelProvenance::HumanReviewed),
                        pass1: Some(item.pass1_raw.clone()),
                        pass2: Some(item.pass2_raw.clone()),
                        translated_from: None,
                    });
                }
            }
            Some(item) if item.status == ReviewStatus::Discarded => {
                discarded.push(record.id.clone());
            }
            _ => {}
        }
    }
    (merged, discarded)
}

/// The default topic list for attribute-guided generation.
pub const DEFAULT_TOPICS: [&str; 30] = [
    "History",
    "Literature",
    "Science",
    "Art",
    "Social Sciences",
    "Technology",
    "Philosophy",
    "Geography",
    "Culture",
    "Health",
    "Artificial Intelligence",
    "Machine Learning",
    "Big Data",
    "Blockchain",
    "Internet of Things",
    "Environmental Protection",
    "Sustainable Development",
    "Energy",
    "Finance",
    "Education",
    "Human Genetics",
    "Artificial Life",
    "Space Exploration",
    "Food Science",
    "Sports",
    "Psychology",
    "Political Science",
    "Economics",
    "Sociology",
    "Law",
];

/// Counts from one generation call.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub parsed: usize,
    pub malformed: usize,
}

/// Renders the generation prompt for a topic, asks the model, and parses
/// the question→category JSON object from the reply. Valid entries are
/// salvaged from partially malformed replies.
pub fn generate_synthetic(
    topic: &str,
    backend: &dyn ChatBackend,
    model_id: &str,
    templates: &TemplateSet,
    topics: &[String],
) -> Result<(Vec<LabeledRecord>, GenerationStats), DatasetError> {
    if !topics.iter().any(|t| t == topic) {
        return Err(DatasetError::UnknownTopic(topic.to_string()));
    }
    let en = LanguageCode::parse_code("en").unwrap();
    let zh = LanguageCode::parse_code("zh").unwrap();
    let template = templates.get(TemplateKind::Generation, &en)?;
    let prompt = template.render(&[("[TOPIC]", topic)])?;
    let req = ChatRequest::new(prompt, LABELING_TEMPERATURE, model_id)?;
    let resp = backend.chat(&req)?;

    let Some(start) = resp.text.find('{') else {
        return Err(DatasetError::UnparseableGeneration(
            "no JSON object in reply".into(),
        ));
    };
    let Some(end) = resp.text.rfind('}') else {
        return Err(DatasetError::UnparseableGeneration(
            "no JSON object in reply".into(),
        ));
    };
    let object: serde_json::Map<String, serde_json::Value> =
        serde_json::from_str(&resp.text[start..=end]).map_err(|e| {
            DatasetError::UnparseableGeneration(format!("JSON parse failed: {e}"))
        })?;

    let slug: String = topic
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() {
                c.to_ascii_lowercase()
            } else {
                '-'
            }
        })
        .collect();
    let mut records = Vec::new();
    let mut malformed = 0usize;
    for (question, category) in &object {
        let Some(category) = category.as_str() else {
            malformed += 1;
            continue;
        };
        let Some(label) = category_to_label(category) else {
            malformed += 1;
            continue;
        };
        if question.trim().is_empty() {
            malformed += 1;
            continue;
        }
        records.push(LabeledRecord {
            id: format!("gen-{slug}-{:03}", records.len()),
            text: question.clone(),
            lang: zh.clone(),
            label,
            gold_answer: None,
            dataset: Some("generated".to_string()),
            label_provenance: Some(LabelProvenance::Generated),
            pass1: None,
            pass2: None,
            translated_from: None,
        });
    }
    if records.is_empty() {
        return Err(DatasetError::UnparseableGeneration(format!(
            "all {malformed} entries malformed"
        )));
    }
    let stats = GenerationStats {
        parsed: records.len(),
        malformed,
    };
    Ok((records, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backends::{Matcher, MockTranslator, Reply, ScriptedChat};

    fn en() -> LanguageCode {
        LanguageCode::parse_code("en").unwrap()
    }

    fn zh() -> LanguageCode {
        LanguageCode::parse_code("zh").unwrap()
    }

    fn record(id: &str, lang: LanguageCode, label: KnowledgeLabel) -> LabeledRecord {
        LabeledRecord {
            id: id.into(),
            text: format!("question {id}"),
            lang,
            label,
            gold_answer: Some("gold".into()),
            dataset: Some("unit".into()),
            label_provenance: None,
            pass1: None,
            pass2: None,
            translated_from: None,
        }
    }

    #[test]
    fn ingest_round_trip_is_identity() {
        let records = vec![
            record("a", en(), KnowledgeLabel::ChSpecific),
            record("b", zh(), KnowledgeLabel::Common),
        ];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("corpus.jsonl");
        write_jsonl(&records, &path).unwrap();
        let (back, counts) = ingest(&path, &LanguageRegistry::builtin()).unwrap();
        assert_eq!(back, records);
        assert_eq!(counts.total, 2);
        assert_eq!(counts.ch_specific, 1);
        assert_eq!(counts.common, 1);
    }

    #[test]
    fn ingest_reports_counts_matching_a_full_scale_fixture() {
        // counts shaped like the full bilingual detector corpus
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("full.jsonl");
        let mut lines = String::new();
        let mut serial = 0usize;
        for (label, count) in [
            (KnowledgeLabel::ChSpecific, 3716usize),
            (KnowledgeLabel::Common, 7457),
            (KnowledgeLabel::EnSpecific, 8253),
        ] {
            for _ in 0..count {
                lines.push_str(&format!(
                    "{{\"id\":\"r{serial}\",\"text\":\"q {serial}\",\"lang\":\"en\",\"label\":\"{label}\"}}\n"
                ));
                serial += 1;
            }
        }
        std::fs::write(&path, lines).unwrap();
        let (_, counts) = ingest(&path, &LanguageRegistry::builtin()).unwrap();
        assert_eq!(counts.ch_specific, 3716);
        assert_eq!(counts.common, 7457);
        assert_eq!(counts.en_specific, 8253);
        assert_eq!(counts.total, 19426);
    }

    #[test]
    fn augment_collects_failures_without_aborting() {
        struct Flaky;
        impl crate::backends::Translator for Flaky {
            fn translate(
                &self,
                req: &crate::backends::TranslationRequest,
            ) -> Result<String, crate::backends::BackendError> {
                if req.text.contains("poison") {
                    Err(crate::backends::BackendError::Timeout { attempts: 3 })
                } else {
                    Ok(format!("@@{}@@{}", req.target, req.text))
                }
            }
            fn identity(&self) -> String {
                "flaky".into()
            }
        }
        let records = vec![
            record("ok", en(), KnowledgeLabel::Common),
            {
                let mut r = record("bad", en(), KnowledgeLabel::Common);
                r.text = "poison pill".into();
                r
            },
        ];
        let (out, failures) = translate_augment(&records, &zh(), &Flaky);
        assert!(out.len() <= 2 * records.len());
        assert_eq!(out.len(), 3); // 2 originals + 1 successful translation
        assert_eq!(failures.len(), 1);
        assert_eq!(failures[0].id, "bad");
    }

    #[test]
    fn labeling_runs_at_temperature_one() {
        use std::sync::Mutex;
        struct Recording(Mutex<Vec<f64>>);
        impl ChatBackend for Recording {
            fn chat(
                &self,
                req: &crate::backends::ChatRequest,
            ) -> Result<crate::backends::ChatResponse, crate::backends::BackendError> {
                self.0.lock().unwrap().push(req.temperature);
                Ok(crate::backends::ChatResponse::text_only("common"))
            }
            fn identity(&self) -> String {
                "recording".into()
            }
        }
        let backend = Recording(Mutex::new(Vec::new()));
        let templates = TemplateSet::builtin();
        let queries = vec![Query::new("q1", "anything", en()).unwrap()];
        llm_label(&queries, &backend, "labeler", &templates).unwrap();
        let temps = backend.0.into_inner().unwrap();
        assert_eq!(temps, vec![LABELING_TEMPERATURE, LABELING_TEMPERATURE]);
    }

    #[test]
    fn ingest_empty_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.jsonl");
        std::fs::write(&path, "").unwrap();
        let (records, counts) = ingest(&path, &LanguageRegistry::builtin()).unwrap();
        assert!(records.is_empty());
        assert_eq!(counts, LabelCounts::default());
    }

    #[test]
    fn missing_lang_reports_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        std::fs::write(
            &path,
            "{\"id\":\"a\",\"text\":\"q\",\"lang\":\"en\",\"label\":\"common\"}\n{\"id\":\"b\",\"text\":\"q\",\"label\":\"common\"}\n",
        )
        .unwrap();
        match ingest(&path, &LanguageRegistry::builtin()) {
            Err(DatasetError::SchemaViolation { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected schema violation, got {other:?}"),
        }
    }

    #[test]
    fn augment_duplicates_without_touching_labels() {
        let records = vec![
            record("a", en(), KnowledgeLabel::ChSpecific),
            record("b", zh(), KnowledgeLabel::Common), // already target
        ];
        let (out, failures) = translate_augment(&records, &zh(), &MockTranslator);
        assert!(failures.is_empty());
        assert_eq!(out.len(), 3);
        let added = &out[2];
        assert_eq!(added.text, "@@zh@@question a");
        assert_eq!(added.lang, zh());
        assert_eq!(added.label, KnowledgeLabel::ChSpecific);
        assert_eq!(added.gold_answer.as_deref(), Some("gold"));
        assert_eq!(added.translated_from, Some(en()));
    }

    #[test]
    fn labeling_agreement_and_disagreement() {
        let script = ScriptedChat::new(vec![
            (
                Matcher::Substring("agree-q".into()),
                Reply::text("Chinese knowledge"),
            ),
            (
                Matcher::Substring("conflict-q".into()),
                Reply::texts(["English knowledge", "common"]),
            ),
            (
                Matcher::Substring("noise-q".into()),
                Reply::text("no idea"),
            ),
        ])
        .unwrap();
        let templates = TemplateSet::builtin();
        let queries = vec![
            Query::new("q1", "agree-q text", en()).unwrap(),
            Query::new("q2", "conflict-q text", en()).unwrap(),
            Query::new("q3", "noise-q text", en()).unwrap(),
        ];
        let outcome = llm_label(&queries, &script, "labeler", &templates).unwrap();
        assert_eq!(outcome.agreed.len() + outcome.queue.len(), queries.len());
        assert_eq!(outcome.agreed.len(), 1);
        assert_eq!(outcome.agreed[0].label, KnowledgeLabel::ChSpecific);
        assert_eq!(
            outcome.agreed[0].label_provenance,
            Some(LabelProvenance::LlmAgreed)
        );
        let conflict = &outcome.queue[0];
        assert_eq!(conflict.record_id, "q2");
        assert_eq!(conflict.pass1, Some(KnowledgeLabel::EnSpecific));
        assert_eq!(conflict.pass2, Some(KnowledgeLabel::Common));
        assert_eq!(conflict.status, ReviewStatus::Pending);
        let noise = &outcome.queue[1];
        assert_eq!(noise.pass1, None);
    }

    #[test]
    fn queue_file_round_trip_and_merge() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("queue.jsonl");
        let mut item = ReviewQueueItem {
            record_id: "q2".into(),
            pass1_raw: "English knowledge".into(),
            pass2_raw: "common".into(),
            pass1: Some(KnowledgeLabel::EnSpecific),
            pass2: Some(KnowledgeLabel::Common),
            status: ReviewStatus::Pending,
            resolution: None,
        };
        write_jsonl(&[item.clone()], &path).unwrap();
        let mut loaded = read_queue(&path).unwrap();
        assert_eq!(loaded[0], item);

        item.status = ReviewStatus::Resolved;
        item.resolution = Some(KnowledgeLabel::EnSpecific);
        loaded[0] = item;
        let discarded_item = ReviewQueueItem {
            record_id: "q3".into(),
            pass1_raw: "x".into(),
            pass2_raw: "y".into(),
            pass1: None,
            pass2: None,
            status: ReviewStatus::Discarded,
            resolution: None,
        };
        loaded.push(discarded_item);

        let queries = vec![
            Query::new("q2", "conflict-q text", en()).unwrap(),
            Query::new("q3", "noise-q text", en()).unwrap(),
        ];
        let (merged, discarded) = resolve_queue(&queries, &loaded);
        assert_eq!(merged.len(), 1);
        assert_eq!(merged[0].label, KnowledgeLabel::EnSpecific);
        assert_eq!(
            merged[0].label_provenance,
            Some(LabelProvenance::HumanReviewed)
        );
        assert_eq!(discarded, vec!["q3".to_string()]);
    }

    #[test]
    fn generation_parses_and_salvages() {
        let reply = r#"Here you go:
{
"故宫是哪个朝代建立的？": "Chinese knowledge",
"Which president appears on the two-dollar bill?": "English knowledge",
"光速是多少？": "Knowledge with no specific language",
"bad entry": "trivia",
"another bad": 42
}"#;
        let script = ScriptedChat::new(vec![(
            Matcher::Substring("The topic I provide is".into()),
            Reply::text(reply),
        )])
        .unwrap();
        let templates = TemplateSet::builtin();
        let topics: Vec<String> = DEFAULT_TOPICS.iter().map(|s| s.to_string()).collect();
        let (records, stats) =
            generate_synthetic("History", &script, "gen", &templates, &topics).unwrap();
        assert_eq!(records.len(), 3);
        assert_eq!(stats.malformed, 2);
        assert!(records
            .iter()
            .all(|r| r.label_provenance == Some(LabelProvenance::Generated)));
        assert_eq!(records[0].lang, zh());
    }

    #[test]
    fn unknown_topic_rejected() {
        let script = ScriptedChat::new(vec![]).unwrap();
        let templates = TemplateSet::builtin();
        let topics: Vec<String> = DEFAULT_TOPICS.iter().map(|s| s.to_string()).collect();
        assert!(matches!(
            generate_synthetic("Cryptozoology", &script, "gen", &templates, &topics),
            Err(DatasetError::UnknownTopic(_))
        ));
    }

    #[test]
    fn fully_malformed_generation_is_an_error() {
        let script = ScriptedChat::new(vec![(
            Matcher::Substring("The topic I provide is".into()),
            Reply::text("{\"q\": \"not-a-category\"}"),
        )])
        .unwrap();
        let templates = TemplateSet::builtin();
        let topics: Vec<String> = DEFAULT_TOPICS.iter().map(|s| s.to_string()).collect();
        assert!(matches!(
            generate_synthetic("Law", &script, "gen", &templates, &topics),
            Err(DatasetError::UnparseableGeneration(_))
        ));
    }
}
