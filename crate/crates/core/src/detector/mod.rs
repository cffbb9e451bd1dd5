//! The per-language low-resource knowledge detector: a hashed-n-gram
//! logistic-regression classifier trained from three-way knowledge
//! labels, plus the entropy-feature selection baseline.

pub mod entropy;
pub mod features;
pub mod metrics;

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::backends::sha256_hex;
use crate::lang::LanguageCode;
use crate::types::{KnowledgeLabel, Query};
use features::{term_counts, FeatureVector, IdfTable, NgramConfig};
pub use metrics::DetectorMetrics;

#[derive(Debug, thiserror::Error)]
pub enum DetectorError {
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("corpus maps to a single class; both classes are required")]
    DegenerateCorpus,
    #[error("empty text")]
    EmptyText,
    #[error("empty test set")]
    EmptyTestSet,
    #[error("no low-resource mapping for source language {0}")]
    UnmappedLanguage(String),
    #[error("model file: {0}")]
    BadModelFile(String),
    #[error("model io: {0}")]
    Io(#[from] std::io::Error),
    #[error("detector: {0}")]
    External(String),
}

/// Which three-way label counts as low-resource for each source language.
/// The shipped mapping covers the bilingual pair; more languages can be
/// registered from config.
#[derive(Debug, Clone)]
pub struct LowResourceMapping {
    low_label: HashMap<String, KnowledgeLabel>,
}

impl Default for LowResourceMapping {
    fn default() -> Self {
        let mut low_label = HashMap::new();
        low_label.insert("en".to_string(), KnowledgeLabel::ChSpecific);
        low_label.insert("zh".to_string(), KnowledgeLabel::EnSpecific);
        LowResourceMapping { low_label }
    }
}

impl LowResourceMapping {
    pub fn register(&mut self, source: LanguageCode, low_label: KnowledgeLabel) {
        self.low_label.insert(source.as_str().to_string(), low_label);
    }

    /// 1 iff the label is the other language's specific class; common
    /// knowledge and own-language knowledge stay in the normal pipeline.
    pub fn binary(&self, label: KnowledgeLabel, source: &LanguageCode) -> Result<u8, DetectorError> {
        match self.low_label.get(source.as_str()) {
            Some(low) => Ok(u8::from(label == *low)),
            None => Err(DetectorError::UnmappedLanguage(source.as_str().to_string())),
        }
    }
}

/// Shipped-mapping shorthand for [`LowResourceMapping::binary`].
pub fn label_to_binary(label: KnowledgeLabel, source: &LanguageCode) -> Result<u8, DetectorError> {
    LowResourceMapping::default().binary(label, source)
}

/// A labeled training/evaluation row.
pub type LabeledRow = (String, KnowledgeLabel);

/// Seeded, label-stratified split: each three-way class contributes the
/// same held-out fraction. Returns (train, holdout).
pub fn split_corpus(
    rows: Vec<LabeledRow>,
    holdout: f64,
    seed: u64,
) -> (Vec<LabeledRow>, Vec<LabeledRow>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let holdout = holdout.clamp(0.0, 1.0);
    let mut by_label: HashMap<KnowledgeLabel, Vec<LabeledRow>> = HashMap::new();
    for row in rows {
        by_label.entry(row.1).or_default().push(row);
    }
    let mut train_rows = Vec::new();
    let mut test_rows = Vec::new();
    for label in KnowledgeLabel::ALL {
        let Some(mut group) = by_label.remove(&label) else {
            continue;
        };
        group.shuffle(&mut rng);
        let holdout_len = ((group.len() as f64) * holdout) as usize;
        let rest = group.split_off(holdout_len);
        test_rows.extend(group);
        train_rows.extend(rest);
    }
    train_rows.shuffle(&mut rng);
    test_rows.shuffle(&mut rng);
    (train_rows, test_rows)
}

/// Training hyperparameters. The seed makes runs reproducible end to end.
#[derive(Debug, Clone, Copy)]
pub struct TrainConfig {
    pub seed: u64,
    pub epochs: u32,
    pub learning_rate: f64,
    pub l2: f64,
    pub threshold: f64,
    pub ngram: NgramConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            seed: 0,
            epochs: 12,
            learning_rate: 0.5,
            l2: 1e-6,
            threshold: 0.5,
            ngram: NgramConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn with_seed(seed: u64) -> Self {
        TrainConfig {
            seed,
            ..Default::default()
        }
    }
}

/// Training provenance embedded in the model file.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingMeta {
    pub corpus_hash: String,
    pub seed: u64,
    pub epochs: u32,
    /// Full-set mean log-loss per epoch; non-increasing by construction.
    pub loss_curve: Vec<f64>,
}

/// A trained per-language detector. Immutable after training; safe to
/// share across threads for prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorModel {
    pub language: LanguageCode,
    weights: Vec<f64>,
    bias: f64,
    threshold: f64,
    ngram: NgramConfig,
    idf: IdfTable,
    pub meta: TrainingMeta,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn mean_log_loss(vectors: &[FeatureVector], labels: &[u8], weights: &[f64], bias: f64) -> f64 {
    let mut loss = 0.0;
    for (x, &y) in vectors.iter().zip(labels) {
        let p = sigmoid(x.dot_dense(weights) + bias).clamp(1e-12, 1.0 - 1e-12);
        loss -= if y == 1 { p.ln() } else { (1.0 - p).ln() };
    }
    loss / vectors.len() as f64
}

fn corpus_hash(corpus: &[(String, KnowledgeLabel)]) -> String {
    let mut acc = String::new();
    for (text, label) in corpus {
        acc.push_str(&format!("{}:{}\u{1f}{}\u{1e}", text.len(), text, label));
    }
    sha256_hex(acc.as_bytes())
}

/// Fits a logistic-regression detector by seeded SGD with a fixed epoch
/// count. If an epoch would increase the full-set loss, its update is
/// rolled back and the learning rate halved, so the recorded loss curve
/// is non-increasing at epoch granularity.
pub fn train(
    corpus: &[(String, KnowledgeLabel)],
    source: &LanguageCode,
    config: &TrainConfig,
) -> Result<DetectorModel, DetectorError> {
    train_with_mapping(corpus, source, config, &LowResourceMapping::default())
}

pub fn train_with_mapping(
    corpus: &[(String, KnowledgeLabel)],
    source: &LanguageCode,
    config: &TrainConfig,
    mapping: &LowResourceMapping,
) -> Result<DetectorModel, DetectorError> {
    if corpus.is_empty() {
        return Err(DetectorError::EmptyCorpus);
    }
    let mut labels = Vec::with_capacity(corpus.len());
    for (text, label) in corpus {
        if text.trim().is_empty() {
            return Err(DetectorError::EmptyText);
        }
        labels.push(mapping.binary(*label, source)?);
    }
    if labels.iter().all(|&y| y == 1) || labels.iter().all(|&y| y == 0) {
        return Err(DetectorError::DegenerateCorpus);
    }

    let counts: Vec<HashMap<u32, f64>> = corpus
        .iter()
        .map(|(text, _)| term_counts(text, &config.ngram))
        .collect();
    let idf = IdfTable::fit(&counts);
    let vectors: Vec<FeatureVector> = corpus
        .iter()
        .map(|(text, _)| {
            FeatureVector::build(text, &config.ngram, &idf).ok_or(DetectorError::EmptyText)
        })
        .collect::<Result<_, _>>()?;

    let dim = config.ngram.feature_space();
    let mut weights = vec![0.0f64; dim];
    let mut bias = 0.0f64;
    let mut lr = config.learning_rate;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..vectors.len()).collect();
    let mut prev_loss = mean_log_loss(&vectors, &labels, &weights, bias);
    let mut loss_curve = Vec::with_capacity(config.epochs as usize + 1);
    loss_curve.push(prev_loss);

    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        let snapshot_w = weights.clone();
        let snapshot_b = bias;
        for &i in &order {
            let x = &vectors[i];
            let y = labels[i] as f64;
            let p = sigmoid(x.dot_dense(&weights) + bias);
            let g = p - y;
            for &(id, v) in x.entries() {
                let w = &mut weights[id as usize];
                *w -= lr * (g * v + config.l2 * *w);
            }
            bias -= lr * g;
        }
        let loss = mean_log_loss(&vectors, &labels, &weights, bias);
        if loss > prev_loss {
            weights = snapshot_w;
            bias = snapshot_b;
            lr *= 0.5;
            loss_curve.push(prev_loss);
        } else {
            prev_loss = loss;
            loss_curve.push(loss);
        }
    }

    Ok(DetectorModel {
        language: source.clone(),
        weights,
        bias,
        threshold: config.threshold,
        ngram: config.ngram,
        idf,
        meta: TrainingMeta {
            corpus_hash: corpus_hash(corpus),
            seed: config.seed,
            epochs: config.epochs,
            loss_curve,
        },
    })
}

impl DetectorModel {
    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    /// Overrides the decision threshold. Values 0 and 1 are allowed to
    /// express the force-all / force-none boundary behavior.
    pub fn set_threshold(&mut self, threshold: f64) {
        self.threshold = threshold.clamp(0.0, 1.0);
    }

    /// Sigmoid score in (0, 1) plus the thresholded verdict. A score
    /// exactly at the threshold resolves to 1: erring toward the enhanced
    /// path costs latency, not correctness.
    pub fn predict(&self, text: &str) -> Result<(u8, f64), DetectorError> {
        if text.trim().is_empty() {
            return Err(DetectorError::EmptyText);
        }
        let x = FeatureVector::build(text, &self.ngram, &self.idf)
            .ok_or(DetectorError::EmptyText)?;
        let score = sigmoid(x.dot_dense(&self.weights) + self.bias);
        Ok((u8::from(score >= self.threshold), score))
    }

    /// Confusion-exact metrics over a labeled test set.
    pub fn evaluate(
        &self,
        test: &[(String, KnowledgeLabel)],
    ) -> Result<DetectorMetrics, DetectorError> {
        self.evaluate_with_mapping(test, &LowResourceMapping::default())
    }

    pub fn evaluate_with_mapping(
        &self,
        test: &[(String, KnowledgeLabel)],
        mapping: &LowResourceMapping,
    ) -> Result<DetectorMetrics, DetectorError> {
        if test.is_empty() {
            return Err(DetectorError::EmptyTestSet);
        }
        let (mut tp, mut fp, mut tn, mut fn_) = (0u64, 0u64, 0u64, 0u64);
        for (text, label) in test {
            let truth = mapping.binary(*label, &self.language)?;
            let (pred, _) = self.predict(text)?;
            match (truth, pred) {
                (1, 1) => tp += 1,
                (0, 1) => fp += 1,
                (0, 0) => tn += 1,
                (1, 0) => fn_ += 1,
                _ => unreachable!(),
            }
        }
        Ok(DetectorMetrics::from_counts(tp, fp, tn, fn_))
    }
}

/// The detection interface the pipeline consumes. Implemented by trained
/// models and by oracles (sim world ground truth, constant verdicts).
pub trait LowResourceDetector: Send + Sync {
    fn detect(&self, query: &Query) -> Result<bool, DetectorError>;
    fn identity(&self) -> String;
}

impl LowResourceDetector for DetectorModel {
    fn detect(&self, query: &Query) -> Result<bool, DetectorError> {
        let (verdict, _) = self.predict(&query.text)?;
        Ok(verdict == 1)
    }

    fn identity(&self) -> String {
        format!("trained({}, corpus {})", self.language, &self.meta.corpus_hash[..12])
    }
}

/// Fixed-verdict detector: `ConstVerdict(false)` routes everything to the
/// direct path (the baseline condition), `ConstVerdict(true)` routes
/// everything to the enhanced path.
#[derive(Debug, Clone, Copy)]
pub struct ConstVerdict(pub bool);

impl LowResourceDetector for ConstVerdict {
    fn detect(&self, _query: &Query) -> Result<bool, DetectorError> {
        Ok(self.0)
    }

    fn identity(&self) -> String {
        format!("const({})", u8::from(self.0))
    }
}

// ── model file format ──────────────────────────────────────────────────
//
// Versioned little-endian binary container:
//   magic "LBDM", u32 version, language, threshold, bias, n-gram config,
//   sparse idf, sparse non-zero weights, training metadata.

const MODEL_MAGIC: &[u8; 4] = b"LBDM";
const MODEL_VERSION: u32 = 1;

struct ByteWriter<W: Write>(W);

impl<W: Write> ByteWriter<W> {
    fn u8(&mut self, v: u8) -> std::io::Result<()> {
        self.0.write_all(&[v])
    }
    fn u32(&mut self, v: u32) -> std::io::Result<()> {
        self.0.write_all(&v.to_le_bytes())
    }
    fn u64(&mut self, v: u64) -> std::io::Result<()> {
        self.0.write_all(&v.to_le_bytes())
    }
    fn f64(&mut self, v: f64) -> std::io::Result<()> {
        self.0.write_all(&v.to_le_bytes())
    }
    fn str(&mut self, s: &str) -> std::io::Result<()> {
        self.u32(s.len() as u32)?;
        self.0.write_all(s.as_bytes())
    }
}

struct ByteReader<R: Read>(R);

impl<R: Read> ByteReader<R> {
    fn u8(&mut self) -> std::io::Result<u8> {
        let mut b = [0u8; 1];
        self.0.read_exact(&mut b)?;
        Ok(b[0])
    }
    fn u32(&mut self) -> std::io::Result<u32> {
        let mut b = [0u8; 4];
        self.0.read_exact(&mut b)?;
        Ok(u32::from_le_bytes(b))
    }
    fn u64(&mut self) -> std::io::Result<u64> {
        let mut b = [0u8; 8];
        self.0.read_exact(&mut b)?;
        Ok(u64::from_le_bytes(b))
    }
    fn f64(&mut self) -> std::io::Result<f64> {
        let mut b = [0u8; 8];
        self.0.read_exact(&mut b)?;
        Ok(f64::from_le_bytes(b))
    }
    fn str(&mut self) -> Result<String, DetectorError> {
        let len = self.u32()? as usize;
        if len > 1 << 24 {
            return Err(DetectorError::BadModelFile("oversized string".into()));
        }
        let mut buf = vec![0u8; len];
        self.0.read_exact(&mut buf)?;
        String::from_utf8(buf).map_err(|e| DetectorError::BadModelFile(e.to_string()))
    }
}

impl DetectorModel {
    pub fn save(&self, path: &Path) -> Result<(), DetectorError> {
        let file = std::fs::File::create(path)?;
        let mut w = ByteWriter(std::io::BufWriter::new(file));
        w.0.write_all(MODEL_MAGIC)?;
        w.u32(MODEL_VERSION)?;
        w.str(self.language.as_str())?;
        w.f64(self.threshold)?;
        w.f64(self.bias)?;
        w.u8(self.ngram.char_min)?;
        w.u8(self.ngram.char_max)?;
        w.u8(u8::from(self.ngram.word_unigrams))?;
        w.u8(self.ngram.hash_bits)?;
        w.u64(self.idf.doc_count)?;
        let mut idf_entries: Vec<(u32, f64)> =
            self.idf.idf.iter().map(|(&id, &v)| (id, v)).collect();
        idf_entries.sort_unstable_by_key(|&(id, _)| id);
        w.u32(idf_entries.len() as u32)?;
        for (id, v) in idf_entries {
            w.u32(id)?;
            w.f64(v)?;
        }
        let nonzero: Vec<(u32, f64)> = self
            .weights
            .iter()
            .enumerate()
            .filter(|&(_, &v)| v != 0.0)
            .map(|(id, &v)| (id as u32, v))
            .collect();
        w.u32(nonzero.len() as u32)?;
        for (id, v) in nonzero {
            w.u32(id)?;
            w.f64(v)?;
        }
        w.str(&self.meta.corpus_hash)?;
        w.u64(self.meta.seed)?;
        w.u32(self.meta.epochs)?;
        w.u32(self.meta.loss_curve.len() as u32)?;
        for &v in &self.meta.loss_curve {
            w.f64(v)?;
        }
        w.0.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, DetectorError> {
        let file = std::fs::File::open(path)?;
        let mut r = ByteReader(std::io::BufReader::new(file));
        let mut magic = [0u8; 4];
        r.0.read_exact(&mut magic)?;
        if &magic != MODEL_MAGIC {
            return Err(DetectorError::BadModelFile("bad magic".into()));
        }
        let version = r.u32()?;
        if version != MODEL_VERSION {
            return Err(DetectorError::BadModelFile(format!(
                "unsupported version {version}"
            )));
        }
        let language = LanguageCode::parse_code(&r.str()?)
            .map_err(|e| DetectorError::BadModelFile(e.to_string()))?;
        let threshold = r.f64()?;
        let bias = r.f64()?;
        let ngram = NgramConfig {
            char_min: r.u8()?,
            char_max: r.u8()?,
            word_unigrams: r.u8()? != 0,
            hash_bits: r.u8()?,
        };
        if ngram.hash_bits > 26 {
            return Err(DetectorError::BadModelFile("hash space too large".into()));
        }
        let doc_count = r.u64()?;
        let idf_len = r.u32()? as usize;
        let mut idf = HashMap::with_capacity(idf_len);
        for _ in 0..idf_len {
            let id = r.u32()?;
            let v = r.f64()?;
            idf.insert(id, v);
        }
        let dim = ngram.feature_space();
        let nonzero = r.u32()? as usize;
        let mut weights = vec![0.0f64; dim];
        for _ in 0..nonzero {
            let id = r.u32()? as usize;
            let v = r.f64()?;
            if id >= dim {
                return Err(DetectorError::BadModelFile("weight index out of range".into()));
            }
            weights[id] = v;
        }
        let corpus_hash = r.str()?;
        let seed = r.u64()?;
        let epochs = r.u32()?;
        let curve_len = r.u32()? as usize;
        let mut loss_curve = Vec::with_capacity(curve_len);
        for _ in 0..curve_len {
            loss_curve.push(r.f64()?);
        }
        Ok(DetectorModel {
            language,
            weights,
            bias,
            threshold,
            ngram,
            idf: IdfTable { doc_count, idf },
            meta: TrainingMeta {
                corpus_hash,
                seed,
                epochs,
                loss_curve,
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::LanguageRegistry;

    fn lang(code: &str) -> LanguageCode {
        LanguageRegistry::builtin().normalize(code).unwrap()
    }

    fn toy_corpus() -> Vec<(String, KnowledgeLabel)> {
        let mut corpus = Vec::new();
        for i in 0..30 {
            corpus.push((
                format!("famous dishes cuisine from guangdong cantonese province {i}"),
                KnowledgeLabel::ChSpecific,
            ));
            corpus.push((
                format!("byte codes generated binary encoding arithmetic {i}"),
                KnowledgeLabel::Common,
            ));
            corpus.push((
                format!("baseball thanksgiving turnpike redwood holiday {i}"),
                KnowledgeLabel::EnSpecific,
            ));
        }
        corpus
    }

    #[test]
    fn label_mapping_matches_definition() {
        let en = lang("en");
        let zh = lang("zh");
        assert_eq!(label_to_binary(KnowledgeLabel::ChSpecific, &en).unwrap(), 1);
        assert_eq!(label_to_binary(KnowledgeLabel::Common, &zh).unwrap(), 0);
        assert_eq!(label_to_binary(KnowledgeLabel::EnSpecific, &en).unwrap(), 0);
        assert_eq!(label_to_binary(KnowledgeLabel::EnSpecific, &zh).unwrap(), 1);
        assert!(matches!(
            label_to_binary(KnowledgeLabel::Common, &lang("fr")),
            Err(DetectorError::UnmappedLanguage(_))
        ));
    }

    #[test]
    fn single_class_corpus_is_degenerate() {
        let corpus: Vec<_> = (0..10)
            .map(|i| (format!("common question {i}"), KnowledgeLabel::Common))
            .collect();
        assert!(matches!(
            train(&corpus, &lang("en"), &TrainConfig::with_seed(1)),
            Err(DetectorError::DegenerateCorpus)
        ));
        assert!(matches!(
            train(&[], &lang("en"), &TrainConfig::with_seed(1)),
            Err(DetectorError::EmptyCorpus)
        ));
    }

    #[test]
    fn same_seed_trains_byte_identical_models() {
        let corpus = toy_corpus();
        let config = TrainConfig::with_seed(7);
        let a = train(&corpus, &lang("en"), &config).unwrap();
        let b = train(&corpus, &lang("en"), &config).unwrap();
        assert_eq!(a, b);

        let dir = tempfile::tempdir().unwrap();
        let pa = dir.path().join("a.bin");
        let pb = dir.path().join("b.bin");
        a.save(&pa).unwrap();
        b.save(&pb).unwrap();
        assert_eq!(std::fs::read(&pa).unwrap(), std::fs::read(&pb).unwrap());
    }

    #[test]
    fn loss_curve_is_non_increasing() {
        let corpus = toy_corpus();
        let model = train(&corpus, &lang("en"), &TrainConfig::with_seed(3)).unwrap();
        for pair in model.meta.loss_curve.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-12, "loss went up: {pair:?}");
        }
    }

    #[test]
    fn predict_separates_toy_classes() {
        let corpus = toy_corpus();
        let model = train(&corpus, &lang("en"), &TrainConfig::with_seed(7)).unwrap();
        let (v1, s1) = model
            .predict("What are some famous dishes from Guangdong?")
            .unwrap();
        assert_eq!(v1, 1, "score {s1}");
        let (v0, s0) = model
            .predict("With one byte, how many different codes can be generated at most?")
            .unwrap();
        assert_eq!(v0, 0, "score {s0}");
    }

    #[test]
    fn predict_rejects_empty_and_ignores_padding() {
        let corpus = toy_corpus();
        let model = train(&corpus, &lang("en"), &TrainConfig::with_seed(7)).unwrap();
        assert!(matches!(model.predict("  "), Err(DetectorError::EmptyText)));
        let (_, a) = model.predict("baseball turnpike question").unwrap();
        let (_, b) = model.predict("\n  baseball turnpike question \t ").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn threshold_boundaries_force_verdicts() {
        let corpus = toy_corpus();
        let mut model = train(&corpus, &lang("en"), &TrainConfig::with_seed(7)).unwrap();
        model.set_threshold(0.0);
        for text in ["anything", "无论什么", "baseball", "teahouse"] {
            assert_eq!(model.predict(text).unwrap().0, 1);
        }
        model.set_threshold(1.0);
        for text in ["anything", "无论什么", "baseball", "teahouse"] {
            assert_eq!(model.predict(text).unwrap().0, 0);
        }
    }

    #[test]
    fn save_load_round_trip() {
        let corpus = toy_corpus();
        let model = train(&corpus, &lang("en"), &TrainConfig::with_seed(7)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.bin");
        model.save(&path).unwrap();
        let loaded = DetectorModel::load(&path).unwrap();
        assert_eq!(model, loaded);
        let (v, s) = model.predict("famous dishes from guangdong").unwrap();
        let (lv, ls) = loaded.predict("famous dishes from guangdong").unwrap();
        assert_eq!((v, s), (lv, ls));
    }

    #[test]
    fn split_is_stratified_and_deterministic() {
        let mut rows = Vec::new();
        for i in 0..100 {
            rows.push((format!("ch {i}"), KnowledgeLabel::ChSpecific));
        }
        for i in 0..50 {
            rows.push((format!("co {i}"), KnowledgeLabel::Common));
        }
        for i in 0..10 {
            rows.push((format!("en {i}"), KnowledgeLabel::EnSpecific));
        }
        let (train_rows, test_rows) = split_corpus(rows.clone(), 0.2, 9);
        assert_eq!(train_rows.len(), 128);
        assert_eq!(test_rows.len(), 32);
        let count = |set: &[(String, KnowledgeLabel)], label: KnowledgeLabel| {
            set.iter().filter(|(_, l)| *l == label).count()
        };
        assert_eq!(count(&test_rows, KnowledgeLabel::ChSpecific), 20);
        assert_eq!(count(&test_rows, KnowledgeLabel::Common), 10);
        assert_eq!(count(&test_rows, KnowledgeLabel::EnSpecific), 2);
        let again = split_corpus(rows, 0.2, 9);
        assert_eq!((train_rows, test_rows), again);
    }

    #[test]
    fn evaluate_counts_are_exact() {
        let corpus = toy_corpus();
        let model = train(&corpus, &lang("en"), &TrainConfig::with_seed(7)).unwrap();
        let metrics = model.evaluate(&corpus).unwrap();
        assert_eq!(metrics.total(), corpus.len() as u64);
        assert!(metrics.f1_identity_holds(1e-9));
        assert!(matches!(
            model.evaluate(&[]),
            Err(DetectorError::EmptyTestSet)
        ));
    }
}
