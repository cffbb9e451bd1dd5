//! Language codes and the alias registry used to normalize free-form
//! language mentions ("Chinese", "中文", "chinese (simplified)") into
//! registry codes.
//!
//! The registry is data, not code: it ships as an embedded JSON document
//! and can be replaced by a config file so that deployments can register
//! more languages than the default pair plus majors.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

/// Embedded default registry: en, zh and a small set of major languages.
const DEFAULT_REGISTRY_JSON: &str = include_str!("../data/languages.json");

/// Errors from language parsing and registry handling.
#[derive(Debug, thiserror::Error)]
pub enum LangError {
    #[error("unknown language: {0:?}")]
    UnknownLanguage(String),
    #[error("empty language string")]
    Empty,
    #[error("malformed language code: {0:?}")]
    MalformedCode(String),
    #[error("malformed registry: {0}")]
    MalformedRegistry(String),
    #[error("registry io: {0}")]
    Io(#[from] std::io::Error),
}

/// A normalized, registry-backed language tag such as `en` or `zh`.
///
/// Construction goes through [`LanguageCode::parse_code`] or
/// [`LanguageRegistry::normalize`], so a value of this type is always
/// non-empty lowercase ASCII.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LanguageCode(String);

impl LanguageCode {
    /// Validates the shape of a bare code (lowercase ASCII letters,
    /// optionally one dash-separated subtag). Does not consult a registry;
    /// use [`LanguageRegistry::normalize`] to resolve aliases.
    pub fn parse_code(raw: &str) -> Result<Self, LangError> {
        let s = raw.trim();
        if s.is_empty() {
            return Err(LangError::Empty);
        }
        let lower = s.to_ascii_lowercase();
        let ok = lower.len() <= 16
            && lower
                .chars()
                .all(|c| c.is_ascii_lowercase() || c == '-')
            && !lower.starts_with('-')
            && !lower.ends_with('-');
        if !ok {
            return Err(LangError::MalformedCode(raw.to_string()));
        }
        Ok(LanguageCode(lower))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for LanguageCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl Serialize for LanguageCode {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for LanguageCode {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(d)?;
        LanguageCode::parse_code(&raw).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RegistryEntry {
    code: String,
    #[serde(default)]
    aliases: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RegistryFile {
    languages: Vec<RegistryEntry>,
}

/// Alias table mapping language names in multiple scripts to registry codes.
#[derive(Debug, Clone)]
pub struct LanguageRegistry {
    codes: Vec<LanguageCode>,
    /// lowercase alias -> index into `codes`; includes each code itself.
    aliases: HashMap<String, usize>,
}

impl LanguageRegistry {
    /// The embedded default registry.
    pub fn builtin() -> Self {
        Self::from_json(DEFAULT_REGISTRY_JSON).expect("embedded registry is valid")
    }

    pub fn from_json(json: &str) -> Result<Self, LangError> {
        let file: RegistryFile =
            serde_json::from_str(json).map_err(|e| LangError::MalformedRegistry(e.to_string()))?;
        if file.languages.is_empty() {
            return Err(LangError::MalformedRegistry("no languages defined".into()));
        }
        let mut codes = Vec::with_capacity(file.languages.len());
        let mut aliases = HashMap::new();
        for (idx, entry) in file.languages.iter().enumerate() {
            let code = LanguageCode::parse_code(&entry.code)?;
            aliases.insert(code.as_str().to_string(), idx);
            for alias in &entry.aliases {
                let key = alias.trim().to_lowercase();
                if key.is_empty() {
                    return Err(LangError::MalformedRegistry(format!(
                        "empty alias for {}",
                        entry.code
                    )));
                }
                aliases.insert(key, idx);
            }
            codes.push(code);
        }
        Ok(LanguageRegistry { codes, aliases })
    }

    pub fn from_path(path: &Path) -> Result<Self, LangError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn codes(&self) -> &[LanguageCode] {
        &self.codes
    }

    pub fn contains(&self, code: &LanguageCode) -> bool {
        self.aliases.get(code.as_str()).is_some_and(|&i| self.codes[i] == *code)
    }

    /// Resolves a free-form language mention to a registry code.
    ///
    /// Matching is case-insensitive; the whole (trimmed) input must be a
    /// known alias or code. Idempotent: normalizing an already-normalized
    /// code returns the same code.
    pub fn normalize(&self, raw: &str) -> Result<LanguageCode, LangError> {
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            return Err(LangError::Empty);
        }
        let key = trimmed.to_lowercase();
        match self.aliases.get(&key) {
            Some(&idx) => Ok(self.codes[idx].clone()),
            None => Err(LangError::UnknownLanguage(raw.to_string())),
        }
    }

    /// Scans `text` for alias mentions and returns the code of the match
    /// that starts last, which is how selection replies are interpreted
    /// (the prompt asks the model to state its choice at the end).
    ///
    /// ASCII aliases match on word boundaries only; CJK and other
    /// non-ASCII aliases match as plain substrings. Ties on start
    /// position go to the longer alias.
    pub fn find_last_mention(&self, text: &str) -> Option<LanguageCode> {
        let lower = text.to_lowercase();
        let mut best: Option<(usize, usize, usize)> = None; // (start, len, idx)
        for (alias, &idx) in &self.aliases {
            let ascii = alias.is_ascii();
            let mut from = 0;
            while let Some(pos) = lower[from..].find(alias.as_str()) {
                let start = from + pos;
                let end = start + alias.len();
                let bounded = !ascii || {
                    let before_ok = start == 0
                        || !lower[..start]
                            .chars()
                            .next_back()
                            .is_some_and(|c| c.is_ascii_alphanumeric());
                    let after_ok = end >= lower.len()
                        || !lower[end..]
                            .chars()
                            .next()
                            .is_some_and(|c| c.is_ascii_alphanumeric());
                    before_ok && after_ok
                };
                if bounded {
                    let candidate = (start, alias.len(), idx);
                    best = match best {
                        None => Some(candidate),
                        Some(cur) if (candidate.0, candidate.1) > (cur.0, cur.1) => Some(candidate),
                        Some(cur) => Some(cur),
                    };
                }
                from = start
                    + lower[start..]
                        .chars()
                        .next()
                        .map_or(1, |c| c.len_utf8());
                if from >= lower.len() {
                    break;
                }
            }
        }
        best.map(|(_, _, idx)| self.codes[idx].clone())
    }
}

impl Default for LanguageRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalizes_aliases_in_multiple_scripts() {
        let reg = LanguageRegistry::builtin();
        assert_eq!(reg.normalize("中文").unwrap().as_str(), "zh");
        assert_eq!(reg.normalize("English").unwrap().as_str(), "en");
        assert_eq!(reg.normalize("chinese (simplified)").unwrap().as_str(), "zh");
        assert_eq!(reg.normalize("英文").unwrap().as_str(), "en");
        assert_eq!(reg.normalize("日本語").unwrap().as_str(), "ja");
    }

    #[test]
    fn unknown_language_is_an_error() {
        let reg = LanguageRegistry::builtin();
        assert!(matches!(
            reg.normalize("Klingon"),
            Err(LangError::UnknownLanguage(_))
        ));
    }

    #[test]
    fn normalize_is_idempotent() {
        let reg = LanguageRegistry::builtin();
        for raw in ["Chinese", "EN", "  français ", "中文"] {
            let once = reg.normalize(raw).unwrap();
            let twice = reg.normalize(once.as_str()).unwrap();
            assert_eq!(once, twice);
        }
    }

    #[test]
    fn last_mention_wins() {
        let reg = LanguageRegistry::builtin();
        let reply = "English came to mind first, but 最适合回答该问题的语言是中文";
        assert_eq!(reg.find_last_mention(reply).unwrap().as_str(), "zh");
        let reply = "考虑过中文，but the most suitable language is English.";
        assert_eq!(reg.find_last_mention(reply).unwrap().as_str(), "en");
    }

    #[test]
    fn ascii_aliases_respect_word_boundaries() {
        let reg = LanguageRegistry::builtin();
        // "englishman" must not count as a mention of English.
        assert!(reg.find_last_mention("He is an englishman-ish word").is_none());
        assert_eq!(
            reg.find_last_mention("answer in english!").unwrap().as_str(),
            "en"
        );
    }

    #[test]
    fn no_mention_yields_none() {
        let reg = LanguageRegistry::builtin();
        assert!(reg.find_last_mention("I considered several options.").is_none());
    }

    #[test]
    fn malformed_codes_rejected() {
        assert!(LanguageCode::parse_code("").is_err());
        assert!(LanguageCode::parse_code("-en").is_err());
        assert!(LanguageCode::parse_code("e n").is_err());
        assert!(LanguageCode::parse_code("zh-hans").is_ok());
    }
}
