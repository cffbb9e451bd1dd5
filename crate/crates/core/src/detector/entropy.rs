//! Entropy/perplexity-feature language selection baseline.
//!
//! Per candidate language the features are query entropy, response
//! entropy, query perplexity, and response perplexity, estimated from
//! token log-probabilities. A small softmax classifier maps the stacked
//! features to a language choice. On real model confidence this approach
//! tops out near random — the harness exists to demonstrate that — but it
//! does learn cleanly separable synthetic features, which is what the
//! tests pin.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::DetectorError;
use crate::lang::LanguageCode;

/// Entropy and perplexity statistics for one (query, response) pair in
/// one language. Entropies are non-negative; perplexities are `exp` of
/// the matching entropy, hence >= 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LangStats {
    pub query_entropy: f64,
    pub response_entropy: f64,
    pub query_perplexity: f64,
    pub response_perplexity: f64,
}

impl LangStats {
    /// Mean negative log-probability as the entropy estimate, and its
    /// exponential as perplexity. Empty logprob lists degenerate to
    /// entropy 0 / perplexity 1.
    pub fn from_logprobs(query_lps: &[f64], response_lps: &[f64]) -> Result<Self, DetectorError> {
        fn entropy(lps: &[f64]) -> Result<f64, DetectorError> {
            if lps.is_empty() {
                return Ok(0.0);
            }
            let mut sum = 0.0;
            for &lp in lps {
                if !lp.is_finite() || lp > 0.0 {
                    return Err(DetectorError::BadModelFile(format!(
                        "logprob {lp} out of range"
                    )));
                }
                sum -= lp;
            }
            Ok(sum / lps.len() as f64)
        }
        let query_entropy = entropy(query_lps)?;
        let response_entropy = entropy(response_lps)?;
        Ok(LangStats {
            query_entropy,
            response_entropy,
            query_perplexity: query_entropy.exp(),
            response_perplexity: response_entropy.exp(),
        })
    }

    fn as_array(&self) -> [f64; 4] {
        [
            self.query_entropy,
            self.response_entropy,
            self.query_perplexity,
            self.response_perplexity,
        ]
    }
}

/// The per-candidate-language feature bundle for one query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyFeatures {
    pub per_lang: Vec<(LanguageCode, LangStats)>,
}

impl EntropyFeatures {
    fn flat(&self, candidates: &[LanguageCode]) -> Result<Vec<f64>, DetectorError> {
        let mut out = Vec::with_capacity(candidates.len() * 4);
        for cand in candidates {
            let stats = self
                .per_lang
                .iter()
                .find(|(l, _)| l == cand)
                .map(|(_, s)| s)
                .ok_or_else(|| {
                    DetectorError::UnmappedLanguage(format!("no stats for {cand}"))
                })?;
            out.extend_from_slice(&stats.as_array());
        }
        Ok(out)
    }
}

/// Softmax classifier over standardized entropy features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectorModel {
    pub candidates: Vec<LanguageCode>,
    feature_mean: Vec<f64>,
    feature_std: Vec<f64>,
    // class-major weight matrix, candidates.len() x feature dim
    weights: Vec<Vec<f64>>,
    bias: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct SelectorTrainConfig {
    pub seed: u64,
    pub epochs: u32,
    pub learning_rate: f64,
}

impl Default for SelectorTrainConfig {
    fn default() -> Self {
        SelectorTrainConfig {
            seed: 0,
            epochs: 200,
            learning_rate: 0.1,
        }
    }
}

fn standardize(x: &mut [f64], mean: &[f64], std: &[f64]) {
    for ((v, &m), &s) in x.iter_mut().zip(mean).zip(std) {
        *v = (*v - m) / s;
    }
}

/// Trains the selector on (features, correct language) rows.
pub fn entropy_selector_train(
    rows: &[(EntropyFeatures, LanguageCode)],
    config: &SelectorTrainConfig,
) -> Result<SelectorModel, DetectorError> {
    if rows.is_empty() {
        return Err(DetectorError::EmptyCorpus);
    }
    let mut candidates: Vec<LanguageCode> = Vec::new();
    for (features, _) in rows {
        for (lang, _) in &features.per_lang {
            if !candidates.contains(lang) {
                candidates.push(lang.clone());
            }
        }
    }
    candidates.sort();
    let mut seen_targets: Vec<&LanguageCode> = rows.iter().map(|(_, y)| y).collect();
    seen_targets.sort();
    seen_targets.dedup();
    if seen_targets.len() < 2 {
        return Err(DetectorError::DegenerateCorpus);
    }

    let dim = candidates.len() * 4;
    let mut xs = Vec::with_capacity(rows.len());
    let mut ys = Vec::with_capacity(rows.len());
    for (features, target) in rows {
        xs.push(features.flat(&candidates)?);
        let class = candidates
            .iter()
            .position(|c| c == target)
            .ok_or_else(|| DetectorError::UnmappedLanguage(target.as_str().to_string()))?;
        ys.push(class);
    }

    let mut mean = vec![0.0; dim];
    for x in &xs {
        for (m, v) in mean.iter_mut().zip(x) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= xs.len() as f64;
    }
    let mut std = vec![0.0; dim];
    for x in &xs {
        for ((s, v), m) in std.iter_mut().zip(x).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    for s in &mut std {
        *s = (*s / xs.len() as f64).sqrt().max(1e-9);
    }
    for x in &mut xs {
        standardize(x, &mean, &std);
    }

    let k = candidates.len();
    let mut weights = vec![vec![0.0f64; dim]; k];
    let mut bias = vec![0.0f64; k];
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..xs.len()).collect();
    let mut logits = vec![0.0f64; k];
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let x = &xs[i];
            for (c, l) in logits.iter_mut().enumerate() {
                *l = bias[c] + weights[c].iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
            }
            let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut z = 0.0;
            for l in logits.iter_mut() {
                *l = (*l - max).exp();
                z += *l;
            }
            for (c, l) in logits.iter().enumerate() {
                let p = l / z;
                let g = p - f64::from(u8::from(c == ys[i]));
                for (w, v) in weights[c].iter_mut().zip(x) {
                    *w -= config.learning_rate * g * v;
                }
                bias[c] -= config.learning_rate * g;
            }
        }
    }

    Ok(SelectorModel {
        candidates,
        feature_mean: mean,
        feature_std: std,
        weights,
        bias,
    })
}

/// Picks the language with the highest score for the given features.
pub fn entropy_selector_predict(
    model: &SelectorModel,
    features: &EntropyFeatures,
) -> Result<LanguageCode, DetectorError> {
    let mut x = features.flat(&model.candidates)?;
    standardize(&mut x, &model.feature_mean, &model.feature_std);
    let mut best = (f64::NEG_INFINITY, 0usize);
    for (c, w) in model.weights.iter().enumerate() {
        let score = model.bias[c] + w.iter().zip(&x).map(|(w, v)| w * v).sum::<f64>();
        if score > best.0 {
            best = (score, c);
        }
    }
    Ok(model.candidates[best.1].clone())
}

/// Held-out accuracy of a trained selector.
pub fn selector_accuracy(
    model: &SelectorModel,
    rows: &[(EntropyFeatures, LanguageCode)],
) -> Result<f64, DetectorError> {
    if rows.is_empty() {
        return Err(DetectorError::EmptyTestSet);
    }
    let mut correct = 0usize;
    for (features, target) in rows {
        if entropy_selector_predict(model, features)? == *target {
            correct += 1;
        }
    }
    Ok(correct as f64 / rows.len() as f64)
}

/// Synthetic rows in which both languages' statistics are drawn from the
/// same distribution: nothing to learn, accuracy lands at chance.
pub fn synthetic_uninformative(
    n: usize,
    pair: (&LanguageCode, &LanguageCode),
    seed: u64,
) -> Vec<(EntropyFeatures, LanguageCode)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha8Rng| {
        let qe: f64 = rng.random_range(0.5..4.0);
        let re: f64 = rng.random_range(0.5..4.0);
        LangStats {
            query_entropy: qe,
            response_entropy: re,
            query_perplexity: qe.exp(),
            response_perplexity: re.exp(),
        }
    };
    (0..n)
        .map(|_| {
            let features = EntropyFeatures {
                per_lang: vec![
                    (pair.0.clone(), draw(&mut rng)),
                    (pair.1.clone(), draw(&mut rng)),
                ],
            };
            let target = if rng.random_bool(0.5) {
                pair.0.clone()
            } else {
                pair.1.clone()
            };
            (features, target)
        })
        .collect()
}

/// Synthetic rows in which the correct language's query entropy sits
/// `gap_nats` below the other's: linearly separable by construction.
pub fn synthetic_separable(
    n: usize,
    pair: (&LanguageCode, &LanguageCode),
    gap_nats: f64,
    seed: u64,
) -> Vec<(EntropyFeatures, LanguageCode)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let low: f64 = rng.random_range(0.2..1.0);
            let high = low + gap_nats + rng.random_range(0.0..0.5);
            let stats = |e: f64, rng: &mut ChaCha8Rng| {
                let re: f64 = rng.random_range(0.5..2.0);
                LangStats {
                    query_entropy: e,
                    response_entropy: re,
                    query_perplexity: e.exp(),
                    response_perplexity: re.exp(),
                }
            };
            let first_is_correct = rng.random_bool(0.5);
            let (a, b, target) = if first_is_correct {
                (
                    stats(low, &mut rng),
                    stats(high, &mut rng),
                    pair.0.clone(),
                )
            } else {
                (
                    stats(high, &mut rng),
                    stats(low, &mut rng),
                    pair.1.clone(),
                )
            };
            (
                EntropyFeatures {
                    per_lang: vec![(pair.0.clone(), a), (pair.1.clone(), b)],
                },
                target,
            )
        })
        .collect()
}
