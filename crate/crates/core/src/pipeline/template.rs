//! Prompt templates with declared placeholders.
//!
//! The shipped templates live under `templates/` and are treated as fixed
//! text: loading validates the declared placeholder set, and rendering
//! binds every declared placeholder exactly once. Selection templates
//! declare no placeholders; callers append the question after the body.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use crate::lang::LanguageCode;

macro_rules! shipped {
    ($name:literal) => {
        include_str!(concat!("../../templates/", $name))
    };
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum TemplateError {
    #[error("template {template}: placeholder {placeholder} occurs {count} times, expected exactly once")]
    PlaceholderCount {
        template: String,
        placeholder: String,
        count: usize,
    },
    #[error("template {template}: no binding for {placeholder}")]
    MissingBinding {
        template: String,
        placeholder: String,
    },
    #[error("template {template}: binding {binding} is not a declared placeholder")]
    UnknownBinding { template: String, binding: String },
    #[error("template {template}: duplicate binding for {binding}")]
    DuplicateBinding { template: String, binding: String },
    #[error("no {kind} template for language {lang}")]
    NotFound { kind: TemplateKind, lang: String },
    #[error("unrecognized template file name {0:?} (expected <kind>.<lang>.txt)")]
    BadFileName(String),
    #[error("template io: {0}")]
    Io(String),
}

/// The template families used across the pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TemplateKind {
    /// Target-language selection; the query is appended after the body.
    Selection,
    /// Answer integration across the two answer slots.
    Integration,
    /// LLM-as-judge correctness rubric.
    Judge,
    /// Attribute-guided question generation.
    Generation,
    /// Three-way knowledge labeling (artifact-defined, not a shipped
    /// rubric from elsewhere).
    Labeling,
}

impl TemplateKind {
    pub const ALL: [TemplateKind; 5] = [
        TemplateKind::Selection,
        TemplateKind::Integration,
        TemplateKind::Judge,
        TemplateKind::Generation,
        TemplateKind::Labeling,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            TemplateKind::Selection => "selection",
            TemplateKind::Integration => "integration",
            TemplateKind::Judge => "judge",
            TemplateKind::Generation => "generation",
            TemplateKind::Labeling => "labeling",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "selection" => TemplateKind::Selection,
            "integration" => TemplateKind::Integration,
            "judge" => TemplateKind::Judge,
            "generation" => TemplateKind::Generation,
            "labeling" => TemplateKind::Labeling,
            _ => return None,
        })
    }

    /// Placeholders each kind declares.
    pub fn placeholders(&self) -> &'static [&'static str] {
        match self {
            TemplateKind::Selection => &[],
            TemplateKind::Integration => &["[[Q]]", "[[CH_RES]]", "[[EN_RES]]"],
            TemplateKind::Judge => &["[QUESTION]", "[ANSWER]", "[RES]"],
            TemplateKind::Generation => &["[TOPIC]"],
            TemplateKind::Labeling => &["[QUESTION]"],
        }
    }
}

impl fmt::Display for TemplateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A named prompt body plus its declared placeholder set.
#[derive(Debug, Clone)]
pub struct PromptTemplate {
    pub name: String,
    pub language: LanguageCode,
    body: String,
    placeholders: Vec<&'static str>,
}

impl PromptTemplate {
    pub fn new(
        kind: TemplateKind,
        language: LanguageCode,
        body: impl Into<String>,
    ) -> Result<Self, TemplateError> {
        let body = body.into();
        let name = format!("{}.{}", kind.as_str(), language);
        let placeholders = kind.placeholders().to_vec();
        for ph in &placeholders {
            let count = body.matches(ph).count();
            if count != 1 {
                return Err(TemplateError::PlaceholderCount {
                    template: name,
                    placeholder: (*ph).to_string(),
                    count,
                });
            }
        }
        Ok(PromptTemplate {
            name,
            language,
            body,
            placeholders,
        })
    }

    pub fn body(&self) -> &str {
        &self.body
    }

    /// Substitutes every declared placeholder. The binding set must cover
    /// the declared set exactly — no more, no less, no repeats. Values are
    /// spliced in a single pass, so placeholder-shaped text inside a value
    /// is left untouched.
    pub fn render(&self, bindings: &[(&str, &str)]) -> Result<String, TemplateError> {
        let mut by_key: BTreeMap<&str, &str> = BTreeMap::new();
        for (key, value) in bindings {
            if !self.placeholders.contains(key) {
                return Err(TemplateError::UnknownBinding {
                    template: self.name.clone(),
                    binding: (*key).to_string(),
                });
            }
            if by_key.insert(key, value).is_some() {
                return Err(TemplateError::DuplicateBinding {
                    template: self.name.clone(),
                    binding: (*key).to_string(),
                });
            }
        }
        let mut cuts: Vec<(usize, &str, &str)> = Vec::with_capacity(self.placeholders.len());
        for ph in &self.placeholders {
            let value = by_key
                .get(ph)
                .ok_or_else(|| TemplateError::MissingBinding {
                    template: self.name.clone(),
                    placeholder: (*ph).to_string(),
                })?;
            let pos = self.body.find(ph).expect("validated at construction");
            cuts.push((pos, ph, value));
        }
        cuts.sort_by_key(|&(pos, _, _)| pos);
        let mut out = String::with_capacity(self.body.len());
        let mut cursor = 0;
        for (pos, ph, value) in cuts {
            out.push_str(&self.body[cursor..pos]);
            out.push_str(value);
            cursor = pos + ph.len();
        }
        out.push_str(&self.body[cursor..]);
        Ok(out)
    }
}

/// A loaded set of templates, looked up by kind and language with
/// fallback to the English variant.
#[derive(Debug, Clone)]
pub struct TemplateSet {
    templates: BTreeMap<(TemplateKind, String), PromptTemplate>,
}

impl TemplateSet {
    /// The templates shipped with the crate.
    pub fn builtin() -> Self {
        let en = LanguageCode::parse_code("en").unwrap();
        let zh = LanguageCode::parse_code("zh").unwrap();
        let entries = [
            (TemplateKind::Selection, en.clone(), shipped!("selection.en.txt")),
            (TemplateKind::Selection, zh.clone(), shipped!("selection.zh.txt")),
            (TemplateKind::Integration, en.clone(), shipped!("integration.en.txt")),
            (TemplateKind::Integration, zh.clone(), shipped!("integration.zh.txt")),
            (TemplateKind::Judge, en.clone(), shipped!("judge.en.txt")),
            (TemplateKind::Generation, en.clone(), shipped!("generation.en.txt")),
            (TemplateKind::Labeling, en, shipped!("labeling.en.txt")),
        ];
        let mut templates = BTreeMap::new();
        for (kind, lang, body) in entries {
            let t = PromptTemplate::new(kind, lang.clone(), body).expect("shipped template valid");
            templates.insert((kind, lang.as_str().to_string()), t);
        }
        TemplateSet { templates }
    }

    /// Loads every `<kind>.<lang>.txt` file in a directory. Files with
    /// other extensions are ignored; files with unrecognized kinds error.
    pub fn from_dir(dir: &Path) -> Result<Self, TemplateError> {
        let mut templates = BTreeMap::new();
        let entries = std::fs::read_dir(dir).map_err(|e| TemplateError::Io(e.to_string()))?;
        for entry in entries {
            let entry = entry.map_err(|e| TemplateError::Io(e.to_string()))?;
            let path = entry.path();
            let Some(file_name) = path.file_name().and_then(|n| n.to_str()) else {
                continue;
            };
            let Some(stem) = file_name.strip_suffix(".txt") else {
                continue;
            };
            let Some((kind_str, lang_str)) = stem.split_once('.') else {
                return Err(TemplateError::BadFileName(file_name.to_string()));
            };
            let kind = TemplateKind::parse(kind_str)
                .ok_or_else(|| TemplateError::BadFileName(file_name.to_string()))?;
            let lang = LanguageCode::parse_code(lang_str)
                .map_err(|_| TemplateError::BadFileName(file_name.to_string()))?;
            let body = std::fs::read_to_string(&path).map_err(|e| TemplateError::Io(e.to_string()))?;
            let t = PromptTemplate::new(kind, lang.clone(), body)?;
            templates.insert((kind, lang.as_str().to_string()), t);
        }
        Ok(TemplateSet { templates })
    }

    /// Exact-language lookup, falling back to the English variant for
    /// kinds that ship a single body.
    pub fn get(&self, kind: TemplateKind, lang: &LanguageCode) -> Result<&PromptTemplate, TemplateError> {
        self.templates
            .get(&(kind, lang.as_str().to_string()))
            .or_else(|| self.templates.get(&(kind, "en".to_string())))
            .ok_or_else(|| TemplateError::NotFound {
                kind,
                lang: lang.as_str().to_string(),
            })
    }

    /// Exact-language lookup with no fallback.
    pub fn get_exact(&self, kind: TemplateKind, lang: &LanguageCode) -> Option<&PromptTemplate> {
        self.templates.get(&(kind, lang.as_str().to_string()))
    }

    pub fn iter(&self) -> impl Iterator<Item = &PromptTemplate> {
        self.templates.values()
    }
}
