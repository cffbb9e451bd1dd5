//! A synthetic bilingual knowledge world with an oracle chat backend.
//!
//! Every fact has a home: common knowledge, one of the two pair
//! languages, or a third language. The oracle answers a question
//! correctly exactly when it is asked in a language that covers the
//! fact's home (modulo a seeded noise dial), so every pipeline metric is
//! computable by enumerating the fact table — no judge model needed.
//!
//! Question surfaces embed the fact id and class-correlated vocabulary,
//! which is what gives the trained detector learnable signal.

use std::collections::HashMap;
use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::backends::{
    strip_marker, BackendError, ChatBackend, ChatRequest, ChatResponse, MockTranslator,
    TranslationRequest, Translator, VirtualClock,
};
use crate::datasets::LabeledRecord;
use crate::detector::{DetectorError, LowResourceDetector};
use crate::evaluation::{Condition, EvalError, Grader};
use crate::lang::LanguageCode;
use crate::pipeline::PipelineMode;
use crate::ratio::Ratio;
use crate::types::{KnowledgeLabel, Query};

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("invalid sim config: {0}")]
    InvalidConfig(String),
    #[error("sim io: {0}")]
    Io(#[from] std::io::Error),
    #[error("sim serialization: {0}")]
    Serde(#[from] serde_json::Error),
}

/// Where a fact's knowledge lives.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FactHome {
    /// Answerable in any language.
    Common,
    /// Answerable only in this language.
    Lang(LanguageCode),
}

impl FactHome {
    pub fn covers(&self, lang: &LanguageCode) -> bool {
        match self {
            FactHome::Common => true,
            FactHome::Lang(home) => home == lang,
        }
    }

    /// The three-way label, when the home is expressible in it.
    pub fn knowledge_label(&self) -> Option<KnowledgeLabel> {
        match self {
            FactHome::Common => Some(KnowledgeLabel::Common),
            FactHome::Lang(l) if l.as_str() == "en" => Some(KnowledgeLabel::EnSpecific),
            FactHome::Lang(l) if l.as_str() == "zh" => Some(KnowledgeLabel::ChSpecific),
            FactHome::Lang(_) => None,
        }
    }
}

/// One synthetic fact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimFact {
    pub id: String,
    pub home: FactHome,
    pub tokens: Vec<String>,
    pub answer: String,
}

/// World generation settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimWorldConfig {
    pub en_specific: usize,
    pub zh_specific: usize,
    pub common: usize,
    /// Third-language-home classes: low-resource in both pair languages.
    #[serde(default)]
    pub extra: Vec<(LanguageCode, usize)>,
    /// Probability an in-domain answer is still wrong.
    pub noise: f64,
    pub seed: u64,
    /// Vocabulary dial: tokens per class pool and the chance a question
    /// token comes from the class-neutral shared pool instead.
    pub vocab_per_class: usize,
    pub shared_token_prob: f64,
    pub tokens_per_question: usize,
}

impl SimWorldConfig {
    pub fn new(en_specific: usize, zh_specific: usize, common: usize, seed: u64) -> Self {
        SimWorldConfig {
            en_specific,
            zh_specific,
            common,
            extra: Vec::new(),
            noise: 0.0,
            seed,
            vocab_per_class: 12,
            shared_token_prob: 0.3,
            tokens_per_question: 4,
        }
    }

    fn validate(&self) -> Result<(), SimError> {
        if !(0.0..1.0).contains(&self.noise) {
            return Err(SimError::InvalidConfig(format!(
                "noise must be in [0, 1), got {}",
                self.noise
            )));
        }
        if self.en_specific + self.zh_specific + self.common
            + self.extra.iter().map(|(_, n)| n).sum::<usize>()
            == 0
        {
            return Err(SimError::InvalidConfig("world has no facts".into()));
        }
        if self.vocab_per_class == 0 || self.tokens_per_question == 0 {
            return Err(SimError::InvalidConfig(
                "vocab_per_class and tokens_per_question must be >= 1".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.shared_token_prob) {
            return Err(SimError::InvalidConfig(
                "shared_token_prob must be in [0, 1]".into(),
            ));
        }
        for (lang, _) in &self.extra {
            if lang.as_str() == "en" || lang.as_str() == "zh" {
                return Err(SimError::InvalidConfig(format!(
                    "extra class {lang} collides with a pair language"
                )));
            }
        }
        Ok(())
    }
}

fn hash64(parts: &[&str]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for part in parts {
        for &b in part.as_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
        h ^= 0x1e;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

fn pseudoword(rng: &mut ChaCha8Rng) -> String {
    const CONSONANTS: &[u8] = b"bdfgklmnprstvz";
    const VOWELS: &[u8] = b"aeiou";
    let syllables = rng.random_range(3..=4);
    let mut word = String::with_capacity(syllables * 2);
    for _ in 0..syllables {
        word.push(CONSONANTS[rng.random_range(0..CONSONANTS.len())] as char);
        word.push(VOWELS[rng.random_range(0..VOWELS.len())] as char);
    }
    word
}

/// The generated world: fact table plus derived corpora and backends.
#[derive(Debug, Clone)]
pub struct SimWorld {
    pub config: SimWorldConfig,
    pub facts: Vec<SimFact>,
    by_id: HashMap<String, usize>,
    en: LanguageCode,
    zh: LanguageCode,
}

/// Builds a world deterministically from its config.
pub fn build_world(config: SimWorldConfig) -> Result<SimWorld, SimError> {
    config.validate()?;
    let en = LanguageCode::parse_code("en").unwrap();
    let zh = LanguageCode::parse_code("zh").unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut classes: Vec<(FactHome, usize)> = vec![
        (FactHome::Lang(en.clone()), config.en_specific),
        (FactHome::Lang(zh.clone()), config.zh_specific),
        (FactHome::Common, config.common),
    ];
    for (lang, count) in &config.extra {
        classes.push((FactHome::Lang(lang.clone()), *count));
    }

    let mut used: std::collections::HashSet<String> = std::collections::HashSet::new();
    let mut draw_unique = |rng: &mut ChaCha8Rng| loop {
        let w = pseudoword(rng);
        if used.insert(w.clone()) {
            return w;
        }
    };
    let shared_pool: Vec<String> = (0..config.vocab_per_class)
        .map(|_| draw_unique(&mut rng))
        .collect();
    let class_pools: Vec<Vec<String>> = classes
        .iter()
        .map(|_| {
            (0..config.vocab_per_class)
                .map(|_| draw_unique(&mut rng))
                .collect()
        })
        .collect();

    let mut facts = Vec::new();
    let mut serial = 0usize;
    for (class_idx, (home, count)) in classes.iter().enumerate() {
        for _ in 0..*count {
            let id = format!("fact-{serial:06}");
            serial += 1;
            let tokens: Vec<String> = (0..config.tokens_per_question)
                .map(|_| {
                    if rng.random_bool(config.shared_token_prob) {
                        shared_pool[rng.random_range(0..shared_pool.len())].clone()
                    } else {
                        let pool = &class_pools[class_idx];
                        pool[rng.random_range(0..pool.len())].clone()
                    }
                })
                .collect();
            let answer = format!("ans-{id}");
            facts.push(SimFact {
                id,
                home: home.clone(),
                tokens,
                answer,
            });
        }
    }

    let by_id = facts
        .iter()
        .enumerate()
        .map(|(i, f)| (f.id.clone(), i))
        .collect();
    Ok(SimWorld {
        config,
        facts,
        by_id,
        en,
        zh,
    })
}

impl SimWorld {
    pub fn pair(&self) -> (LanguageCode, LanguageCode) {
        (self.en.clone(), self.zh.clone())
    }

    pub fn fact_count(&self) -> usize {
        self.facts.len()
    }

    /// The question surface for a fact in one of the pair languages.
    pub fn question(&self, fact: &SimFact, lang: &LanguageCode) -> String {
        let topic = fact.tokens.join(" ");
        if lang == &self.zh {
            format!("关于 {topic} 的条目 {} 有什么记载？", fact.id)
        } else {
            format!("Regarding {topic}, what do the records say about item {}?", fact.id)
        }
    }

    fn correct_reply(&self, fact: &SimFact) -> String {
        format!("The records for item {} show {}.", fact.id, fact.answer)
    }

    fn wrong_reply(&self, fact: &SimFact) -> String {
        format!("The records for item {} show unresolved-{}.", fact.id, fact.id)
    }

    /// Seeded per-(fact, answer-language) noise flip.
    fn flipped(&self, fact: &SimFact, lang: &LanguageCode) -> bool {
        if self.config.noise <= 0.0 {
            return false;
        }
        let h = hash64(&[
            &self.config.seed.to_string(),
            fact.id.as_str(),
            lang.as_str(),
        ]);
        ((h >> 11) as f64 / (1u64 << 53) as f64) < self.config.noise
    }

    /// Finds the fact a piece of text refers to by its embedded id.
    pub fn fact_for_text(&self, text: &str) -> Option<&SimFact> {
        let mut from = 0;
        while let Some(pos) = text[from..].find("fact-") {
            let start = from + pos;
            let digits: String = text[start + 5..]
                .chars()
                .take_while(|c| c.is_ascii_digit())
                .collect();
            if digits.len() == 6 {
                let id = format!("fact-{digits}");
                if let Some(&idx) = self.by_id.get(&id) {
                    return Some(&self.facts[idx]);
                }
            }
            from = start + 5;
        }
        None
    }

    /// The full query set for one pair language. Query ids are
    /// `<fact_id>:<lang>`; gold answers carry the canonical answer token.
    pub fn queries(&self, lang: &LanguageCode) -> Vec<Query> {
        self.facts
            .iter()
            .map(|fact| Query {
                id: format!("{}:{lang}", fact.id),
                text: self.question(fact, lang),
                source_lang: lang.clone(),
                gold_answer: Some(fact.answer.clone()),
                dataset: Some("simlab".to_string()),
            })
            .collect()
    }

    /// Detector training pairs in one language. Facts homed in a third
    /// language are excluded: the three-way label cannot express them.
    pub fn detector_corpus(&self, lang: &LanguageCode) -> Vec<(String, KnowledgeLabel)> {
        self.facts
            .iter()
            .filter_map(|fact| {
                fact.home
                    .knowledge_label()
                    .map(|label| (self.question(fact, lang), label))
            })
            .collect()
    }

    /// The same corpus as full schema records, for ingest and reuse.
    pub fn labeled_records(&self, lang: &LanguageCode) -> Vec<LabeledRecord> {
        self.facts
            .iter()
            .filter_map(|fact| {
                fact.home.knowledge_label().map(|label| LabeledRecord {
                    id: format!("{}:{lang}", fact.id),
                    text: self.question(fact, lang),
                    lang: lang.clone(),
                    label,
                    gold_answer: Some(fact.answer.clone()),
                    dataset: Some("simlab".to_string()),
                    label_provenance: None,
                    pass1: None,
                    pass2: None,
                    translated_from: None,
                })
            })
            .collect()
    }

    /// Serializes the world to a directory: config file, fact table, and
    /// the bilingual labeled corpus.
    pub fn save(&self, dir: &Path) -> Result<(), SimError> {
        std::fs::create_dir_all(dir)?;
        let config_json = serde_json::to_string_pretty(&self.config)?;
        std::fs::write(dir.join("world.json"), config_json)?;
        crate::datasets::write_jsonl(&self.facts, &dir.join("facts.jsonl"))
            .map_err(|e| SimError::InvalidConfig(e.to_string()))?;
        let mut corpus = self.labeled_records(&self.en);
        corpus.extend(self.labeled_records(&self.zh));
        crate::datasets::write_jsonl(&corpus, &dir.join("corpus.jsonl"))
            .map_err(|e| SimError::InvalidConfig(e.to_string()))?;
        Ok(())
    }

    /// Loads a world saved by [`SimWorld::save`].
    pub fn load(dir: &Path) -> Result<Self, SimError> {
        let config: SimWorldConfig =
            serde_json::from_str(&std::fs::read_to_string(dir.join("world.json"))?)?;
        let mut facts = Vec::new();
        for line in std::fs::read_to_string(dir.join("facts.jsonl"))?.lines() {
            if line.trim().is_empty() {
                continue;
            }
            facts.push(serde_json::from_str::<SimFact>(line)?);
        }
        let by_id = facts
            .iter()
            .enumerate()
            .map(|(i, f)| (f.id.clone(), i))
            .collect();
        Ok(SimWorld {
            config,
            facts,
            by_id,
            en: LanguageCode::parse_code("en").unwrap(),
            zh: LanguageCode::parse_code("zh").unwrap(),
        })
    }
}

/// Synthetic latency: each sim call advances a virtual clock, making
/// wall-time cost reporting deterministic.
#[derive(Clone)]
pub struct SimTiming {
    pub clock: Arc<VirtualClock>,
    pub llm_ms: u64,
    pub translate_ms: u64,
}

impl SimTiming {
    pub fn new(clock: Arc<VirtualClock>) -> Self {
        SimTiming {
            clock,
            llm_ms: 2_000,
            translate_ms: 500,
        }
    }
}

fn display_name(lang: &LanguageCode) -> &'static str {
    match lang.as_str() {
        "en" => "English",
        "zh" => "中文",
        "ja" => "日本語",
        "ko" => "한국어",
        "fr" => "français",
        "de" => "Deutsch",
        "es" => "español",
        "ru" => "русский",
        "pt" => "português",
        "ar" => "العربية",
        _ => "English",
    }
}

/// Oracle chat backend over the fact table. Recognizes selection and
/// integration prompts by their template sentinels, and mock-translation
/// markers by prefix.
pub struct SimBackend {
    world: Arc<SimWorld>,
    timing: Option<SimTiming>,
}

impl SimBackend {
    pub fn new(world: Arc<SimWorld>) -> Self {
        SimBackend {
            world,
            timing: None,
        }
    }

    pub fn with_timing(mut self, timing: SimTiming) -> Self {
        self.timing = Some(timing);
        self
    }

    fn question_lang(&self, payload: &str, fact: &SimFact) -> LanguageCode {
        let zh_question = self.world.question(fact, &self.world.zh);
        if payload.contains(&zh_question) {
            self.world.zh.clone()
        } else {
            self.world.en.clone()
        }
    }
}

const SELECTION_SENTINELS: [&str; 2] = ["most suitable", "最适合"];
const INTEGRATION_SENTINELS: [&str; 2] = ["integrate the Chinese and English answers", "融合中英文答案"];

impl ChatBackend for SimBackend {
    fn chat(&self, req: &ChatRequest) -> Result<ChatResponse, BackendError> {
        if let Some(t) = &self.timing {
            t.clock.advance(t.llm_ms);
        }
        let (marker_lang, payload) = match strip_marker(&req.prompt) {
            Some((lang, payload)) => (Some(lang), payload.to_string()),
            None => (None, req.prompt.clone()),
        };

        if SELECTION_SENTINELS.iter().any(|s| payload.contains(s)) {
            let reply = match self.world.fact_for_text(&payload) {
                Some(fact) => {
                    let lang = match &fact.home {
                        FactHome::Lang(l) => l.clone(),
                        FactHome::Common => self.question_lang(&payload, fact),
                    };
                    format!(
                        "Considering the background of this question, the most suitable language is {}.",
                        display_name(&lang)
                    )
                }
                None => "I considered several options.".to_string(),
            };
            return Ok(ChatResponse::text_only(reply));
        }

        if INTEGRATION_SENTINELS.iter().any(|s| payload.contains(s)) {
            let reply = match self.world.fact_for_text(&payload) {
                Some(fact) if payload.contains(&fact.answer) => self.world.correct_reply(fact),
                Some(fact) => self.world.wrong_reply(fact),
                None => "There is nothing to integrate.".to_string(),
            };
            return Ok(ChatResponse::text_only(reply));
        }

        let reply = match self.world.fact_for_text(&payload) {
            Some(fact) => {
                let lang = marker_lang.unwrap_or_else(|| self.question_lang(&payload, fact));
                if fact.home.covers(&lang) && !self.world.flipped(fact, &lang) {
                    self.world.correct_reply(fact)
                } else {
                    self.world.wrong_reply(fact)
                }
            }
            None => "unknown".to_string(),
        };
        Ok(ChatResponse::text_only(reply))
    }

    fn identity(&self) -> String {
        format!(
            "simlab(seed {}, {} facts)",
            self.world.config.seed,
            self.world.facts.len()
        )
    }
}

/// Mock translator that participates in synthetic timing.
pub struct SimTranslator {
    inner: MockTranslator,
    timing: Option<SimTiming>,
}

impl SimTranslator {
    pub fn new(timing: Option<SimTiming>) -> Self {
        SimTranslator {
            inner: MockTranslator,
            timing,
        }
    }
}

impl Translator for SimTranslator {
    fn translate(&self, req: &TranslationRequest) -> Result<String, BackendError> {
        if let Some(t) = &self.timing {
            t.clock.advance(t.translate_ms);
        }
        self.inner.translate(req)
    }

    fn identity(&self) -> String {
        self.inner.identity()
    }
}

/// Ground-truth detector: a query is low-resource when its fact's home is
/// neither common nor the query's own language.
pub struct OracleDetector {
    world: Arc<SimWorld>,
}

impl OracleDetector {
    pub fn new(world: Arc<SimWorld>) -> Self {
        OracleDetector { world }
    }
}

impl LowResourceDetector for OracleDetector {
    fn detect(&self, query: &Query) -> Result<bool, DetectorError> {
        let fact = self
            .world
            .fact_for_text(&query.text)
            .ok_or_else(|| DetectorError::External(format!("no fact id in query {}", query.id)))?;
        Ok(!fact.home.covers(&query.source_lang))
    }

    fn identity(&self) -> String {
        "oracle".into()
    }
}

/// Exact grader: an answer is correct when its marker-stripped text
/// contains the fact's canonical answer token.
pub struct SimGrader {
    world: Arc<SimWorld>,
}

impl SimGrader {
    pub fn new(world: Arc<SimWorld>) -> Self {
        SimGrader { world }
    }
}

impl Grader for SimGrader {
    fn grade(&self, query: &Query, answer_text: &str) -> Result<bool, EvalError> {
        let fact = self.world.fact_for_text(&query.text).ok_or_else(|| {
            EvalError::MismatchedQuerySets(format!("query {} names no sim fact", query.id))
        })?;
        let payload = match strip_marker(answer_text) {
            Some((_, payload)) => payload,
            None => answer_text,
        };
        Ok(payload.contains(&fact.answer))
    }

    fn identity(&self) -> String {
        "sim-exact".into()
    }
}

/// Expected accuracy and cost for one (language, condition) cell,
/// computed by enumerating the fact table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpectedCell {
    pub lang: LanguageCode,
    /// Closed-form expected accuracy in the noise parameter.
    pub accuracy: f64,
    /// Exact rational accuracy; present when noise is zero.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accuracy_exact: Option<Ratio>,
    /// Remote calls per query; exact regardless of noise because routing
    /// never depends on it.
    pub mean_remote_calls: Ratio,
}

/// Enumerated expectations for one condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpectedReport {
    pub condition: Condition,
    pub mode: PipelineMode,
    pub cells: Vec<ExpectedCell>,
    pub gap: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap_exact: Option<Ratio>,
}

/// Closed-form per-fact remote-call count for one condition.
fn fact_calls(
    fact: &SimFact,
    lang: &LanguageCode,
    opposite: &LanguageCode,
    condition: Condition,
    mode: PipelineMode,
) -> u64 {
    let routed = match condition {
        Condition::Direct => false,
        Condition::NoDetector => true,
        Condition::Full | Condition::NoSelection => !fact.home.covers(lang),
    };
    if !routed {
        return 1;
    }
    // select? + translate + target answer (+ replace: back | integrate:
    // original + possibly slot translation + integrate)
    let select: u64 = match condition {
        Condition::NoSelection => 0,
        _ => 1,
    };
    let answer_lang: LanguageCode = match condition {
        Condition::NoSelection => opposite.clone(),
        _ => match &fact.home {
            FactHome::Lang(l) => l.clone(),
            FactHome::Common => lang.clone(),
        },
    };
    match mode {
        PipelineMode::Replace => select + 3,
        PipelineMode::Integrate => {
            let slot_translation = u64::from(answer_lang != *opposite);
            select + 3 + 1 + slot_translation
        }
    }
}

/// Closed-form probability a fact's final answer is correct.
fn fact_accuracy(
    fact: &SimFact,
    lang: &LanguageCode,
    opposite: &LanguageCode,
    condition: Condition,
    noise: f64,
) -> f64 {
    let in_domain = match condition {
        Condition::Direct => fact.home.covers(lang),
        Condition::Full | Condition::NoDetector => true,
        Condition::NoSelection => {
            if fact.home.covers(lang) {
                true // not routed, answered directly in domain
            } else {
                fact.home.covers(opposite)
            }
        }
    };
    if in_domain {
        1.0 - noise
    } else {
        0.0
    }
}

/// Enumerates the fact table into expected accuracies, gaps, and costs
/// for a condition. Exact rationals accompany the floats when the noise
/// dial is zero.
pub fn expected_report(world: &SimWorld, condition: Condition, mode: PipelineMode) -> ExpectedReport {
    let (en, zh) = world.pair();
    let noise = world.config.noise;
    let mut cells = Vec::with_capacity(2);
    for (lang, opposite) in [(&en, &zh), (&zh, &en)] {
        let n = world.facts.len() as u64;
        let mut covered = 0u64;
        let mut calls = 0u64;
        let mut acc_sum = 0.0f64;
        for fact in &world.facts {
            calls += fact_calls(fact, lang, opposite, condition, mode);
            let p = fact_accuracy(fact, lang, opposite, condition, noise);
            acc_sum += p;
            if p > 0.0 {
                covered += 1;
            }
        }
        cells.push(ExpectedCell {
            lang: lang.clone(),
            accuracy: acc_sum / n as f64,
            accuracy_exact: (noise == 0.0).then(|| Ratio::from_counts(covered, n)),
            mean_remote_calls: Ratio::new(calls as i64, n as i64),
        });
    }
    let gap = (cells[0].accuracy - cells[1].accuracy).abs();
    let gap_exact = match (cells[0].accuracy_exact, cells[1].accuracy_exact) {
        (Some(a), Some(b)) => Some(a.sub(b).abs()),
        _ => None,
    };
    ExpectedReport {
        condition,
        mode,
        cells,
        gap,
        gap_exact,
    }
}

/// Assembles a pipeline over the sim world for one condition.
pub fn sim_pipeline(
    world: &Arc<SimWorld>,
    condition: Condition,
    mode: PipelineMode,
    timing: Option<SimTiming>,
) -> Result<crate::pipeline::Pipeline, crate::pipeline::PipelineError> {
    use crate::detector::ConstVerdict;
    use crate::pipeline::{Ablation, Pipeline, PipelineConfig};

    let pair = world.pair();
    let ablation = match condition {
        Condition::NoDetector => Some(Ablation::NoDetector),
        Condition::NoSelection => Some(Ablation::NoSelection),
        _ => None,
    };
    let config = PipelineConfig::new(mode, pair.clone()).with_ablation(ablation);
    let chat = SimBackend::new(world.clone());
    let chat = match &timing {
        Some(t) => chat.with_timing(t.clone()),
        None => chat,
    };
    let mut builder = Pipeline::builder(config)
        .chat(Arc::new(chat))
        .translator(Arc::new(SimTranslator::new(timing.clone())));
    if let Some(t) = &timing {
        builder = builder.clock(t.clock.clone());
    }
    let detector: Arc<dyn LowResourceDetector> = match condition {
        Condition::Direct => Arc::new(ConstVerdict(false)),
        _ => Arc::new(OracleDetector::new(world.clone())),
    };
    for lang in [&pair.0, &pair.1] {
        builder = builder.detector(lang, detector.clone());
    }
    builder.model_id("sim-oracle").build()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lang(code: &str) -> LanguageCode {
        LanguageCode::parse_code(code).unwrap()
    }

    fn small_world() -> SimWorld {
        build_world(SimWorldConfig::new(4, 2, 4, 11)).unwrap()
    }

    #[test]
    fn generation_is_bit_reproducible() {
        let a = build_world(SimWorldConfig::new(10, 10, 10, 42)).unwrap();
        let b = build_world(SimWorldConfig::new(10, 10, 10, 42)).unwrap();
        assert_eq!(a.facts, b.facts);
        let c = build_world(SimWorldConfig::new(10, 10, 10, 43)).unwrap();
        assert_ne!(a.facts, c.facts);
    }

    #[test]
    fn invalid_configs_rejected() {
        assert!(build_world(SimWorldConfig::new(0, 0, 0, 1)).is_err());
        let mut cfg = SimWorldConfig::new(1, 1, 1, 1);
        cfg.noise = 1.0;
        assert!(build_world(cfg).is_err());
        let mut cfg = SimWorldConfig::new(1, 1, 1, 1);
        cfg.extra.push((lang("en"), 5));
        assert!(build_world(cfg).is_err());
    }

    #[test]
    fn oracle_answers_by_home_coverage() {
        let world = small_world();
        let backend = SimBackend::new(Arc::new(world.clone()));
        let en_fact = world
            .facts
            .iter()
            .find(|f| f.home == FactHome::Lang(lang("en")))
            .unwrap();
        let q_en = world.question(en_fact, &lang("en"));
        let q_zh = world.question(en_fact, &lang("zh"));
        let correct = backend
            .chat(&ChatRequest::deterministic(q_en, "m"))
            .unwrap();
        assert!(correct.text.contains(&en_fact.answer));
        let wrong = backend
            .chat(&ChatRequest::deterministic(q_zh, "m"))
            .unwrap();
        assert!(!wrong.text.contains(&en_fact.answer));
    }

    #[test]
    fn oracle_honors_translation_markers() {
        let world = small_world();
        let backend = SimBackend::new(Arc::new(world.clone()));
        let en_fact = world
            .facts
            .iter()
            .find(|f| f.home == FactHome::Lang(lang("en")))
            .unwrap();
        // zh question translated to en via the mock marker: now in-domain
        let marked = format!("@@en@@{}", world.question(en_fact, &lang("zh")));
        let resp = backend.chat(&ChatRequest::deterministic(marked, "m")).unwrap();
        assert!(resp.text.contains(&en_fact.answer));
    }

    #[test]
    fn selection_reply_names_home_language() {
        let world = small_world();
        let backend = SimBackend::new(Arc::new(world.clone()));
        let zh_fact = world
            .facts
            .iter()
            .find(|f| f.home == FactHome::Lang(lang("zh")))
            .unwrap();
        let prompt = format!(
            "choose the most suitable language for this question. {}",
            world.question(zh_fact, &lang("en"))
        );
        let resp = backend.chat(&ChatRequest::deterministic(prompt, "m")).unwrap();
        assert!(resp.text.contains("中文"), "reply: {}", resp.text);
    }

    #[test]
    fn noise_flip_rate_is_close_to_epsilon() {
        let mut cfg = SimWorldConfig::new(0, 0, 10_000, 99);
        cfg.noise = 0.1;
        let world = build_world(cfg).unwrap();
        let en = lang("en");
        let wrong = world
            .facts
            .iter()
            .filter(|f| world.flipped(f, &en))
            .count() as f64
            / world.facts.len() as f64;
        assert!((wrong - 0.1).abs() <= 0.01, "flip rate {wrong}");
    }

    #[test]
    fn expected_direct_accuracy_matches_hand_arithmetic() {
        // 40% en, 20% zh, 40% common
        let world = build_world(SimWorldConfig::new(400, 200, 400, 7)).unwrap();
        let report = expected_report(&world, Condition::Direct, PipelineMode::Replace);
        let en_cell = report.cells.iter().find(|c| c.lang == lang("en")).unwrap();
        let zh_cell = report.cells.iter().find(|c| c.lang == lang("zh")).unwrap();
        assert_eq!(en_cell.accuracy_exact.unwrap(), Ratio::new(8, 10));
        assert_eq!(zh_cell.accuracy_exact.unwrap(), Ratio::new(6, 10));
        assert_eq!(report.gap_exact.unwrap(), Ratio::new(2, 10));
        assert_eq!(en_cell.mean_remote_calls, Ratio::ONE);
    }

    #[test]
    fn expected_full_closes_the_gap() {
        let world = build_world(SimWorldConfig::new(400, 200, 400, 7)).unwrap();
        let report = expected_report(&world, Condition::Full, PipelineMode::Replace);
        for cell in &report.cells {
            assert_eq!(cell.accuracy_exact.unwrap(), Ratio::ONE);
        }
        assert_eq!(report.gap_exact.unwrap(), Ratio::ZERO);
        // en: 60% of facts are low-resource (zh + nothing extra? no: zh 200 + common 400 covered)
        let en_cell = report.cells.iter().find(|c| c.lang == lang("en")).unwrap();
        // 200 zh-homed facts are routed: (200*4 + 800*1) / 1000
        assert_eq!(en_cell.mean_remote_calls, Ratio::new(1600, 1000));
    }

    #[test]
    fn expected_no_selection_loses_only_third_language_facts() {
        let mut cfg = SimWorldConfig::new(40, 40, 40, 5);
        cfg.extra.push((lang("ja"), 30));
        let world = build_world(cfg).unwrap();
        let full = expected_report(&world, Condition::Full, PipelineMode::Replace);
        let no_sel = expected_report(&world, Condition::NoSelection, PipelineMode::Replace);
        for (f, n) in full.cells.iter().zip(&no_sel.cells) {
            assert_eq!(f.accuracy_exact.unwrap(), Ratio::ONE);
            assert_eq!(n.accuracy_exact.unwrap(), Ratio::new(120, 150));
            assert!(n.accuracy_exact.unwrap() < f.accuracy_exact.unwrap());
        }
    }

    #[test]
    fn world_save_load_round_trip() {
        let world = small_world();
        let dir = tempfile::tempdir().unwrap();
        world.save(dir.path()).unwrap();
        let loaded = SimWorld::load(dir.path()).unwrap();
        assert_eq!(world.facts, loaded.facts);
        assert_eq!(world.config, loaded.config);
    }

    #[test]
    fn detector_corpus_excludes_third_language_homes() {
        let mut cfg = SimWorldConfig::new(5, 5, 5, 3);
        cfg.extra.push((lang("ja"), 7));
        let world = build_world(cfg).unwrap();
        assert_eq!(world.fact_count(), 22);
        assert_eq!(world.detector_corpus(&lang("en")).len(), 15);
        assert_eq!(world.queries(&lang("en")).len(), 22);
    }
}
