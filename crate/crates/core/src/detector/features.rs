//! Hashed character n-gram + word unigram featurizer with TF-IDF
//! weighting. Character n-grams make the same featurizer work for text
//! with and without whitespace segmentation.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

/// N-gram extraction settings. `hash_bits` sets the feature space to
/// `2^hash_bits` buckets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NgramConfig {
    pub char_min: u8,
    pub char_max: u8,
    pub word_unigrams: bool,
    pub hash_bits: u8,
}

impl Default for NgramConfig {
    fn default() -> Self {
        NgramConfig {
            char_min: 1,
            char_max: 3,
            word_unigrams: true,
            hash_bits: 20,
        }
    }
}

impl NgramConfig {
    pub fn feature_space(&self) -> usize {
        1usize << self.hash_bits
    }
}

/// FNV-1a, fixed so hashed feature ids are stable across runs and
/// platforms.
fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

/// Raw term-frequency counts for one document, keyed by hashed feature id.
pub fn term_counts(text: &str, config: &NgramConfig) -> HashMap<u32, f64> {
    let mask = (config.feature_space() - 1) as u64;
    let normalized = text.trim().to_lowercase();
    let chars: Vec<char> = normalized.chars().collect();
    let mut counts: HashMap<u32, f64> = HashMap::new();
    let mut buf = String::new();
    for n in config.char_min..=config.char_max {
        let n = n as usize;
        if n == 0 || chars.len() < n {
            continue;
        }
        for window in chars.windows(n) {
            buf.clear();
            buf.push('c');
            buf.push((b'0' + n as u8) as char);
            buf.push(':');
            buf.extend(window.iter());
            let id = (fnv1a(buf.as_bytes()) & mask) as u32;
            *counts.entry(id).or_insert(0.0) += 1.0;
        }
    }
    if config.word_unigrams {
        for token in normalized.split_whitespace() {
            buf.clear();
            buf.push_str("w:");
            buf.push_str(token);
            let id = (fnv1a(buf.as_bytes()) & mask) as u32;
            *counts.entry(id).or_insert(0.0) += 1.0;
        }
    }
    counts
}

/// Inverse document frequencies learned from a training corpus. Unseen
/// features default to the maximum (rarest) idf.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdfTable {
    pub doc_count: u64,
    pub idf: HashMap<u32, f64>,
}

impl IdfTable {
    pub fn fit(docs: &[HashMap<u32, f64>]) -> Self {
        let mut df: HashMap<u32, u64> = HashMap::new();
        for doc in docs {
            for &id in doc.keys() {
                *df.entry(id).or_insert(0) += 1;
            }
        }
        let n = docs.len() as u64;
        let idf = df
            .into_iter()
            .map(|(id, d)| (id, Self::idf_value(n, d)))
            .collect();
        IdfTable {
            doc_count: n,
            idf,
        }
    }

    fn idf_value(docs: u64, df: u64) -> f64 {
        ((1.0 + docs as f64) / (1.0 + df as f64)).ln() + 1.0
    }

    pub fn lookup(&self, id: u32) -> f64 {
        match self.idf.get(&id) {
            Some(&v) => v,
            None => Self::idf_value(self.doc_count, 0),
        }
    }
}

/// A sparse, L2-normalized TF-IDF vector. Entries are sorted by feature
/// id so downstream arithmetic is order-deterministic.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    entries: Vec<(u32, f64)>,
}

impl FeatureVector {
    /// Builds the TF-IDF vector for one document. Returns `None` for text
    /// that produces no features (empty after trimming).
    pub fn build(text: &str, config: &NgramConfig, idf: &IdfTable) -> Option<Self> {
        let counts = term_counts(text, config);
        if counts.is_empty() {
            return None;
        }
        let mut entries: Vec<(u32, f64)> = counts
            .into_iter()
            .map(|(id, tf)| (id, tf * idf.lookup(id)))
            .collect();
        entries.sort_unstable_by_key(|&(id, _)| id);
        let norm = entries.iter().map(|&(_, v)| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            for (_, v) in &mut entries {
                *v /= norm;
            }
        }
        Some(FeatureVector { entries })
    }

    pub fn entries(&self) -> &[(u32, f64)] {
        &self.entries
    }

    pub fn l2_norm(&self) -> f64 {
        self.entries.iter().map(|&(_, v)| v * v).sum::<f64>().sqrt()
    }

    pub fn dot_dense(&self, dense: &[f64]) -> f64 {
        self.entries
            .iter()
            .map(|&(id, v)| v * dense[id as usize])
            .sum()
    }
}
