//! Cross-lingual knowledge routing for LLMs.
//!
//! When a query concerns knowledge that is low-resource in its source
//! language, this crate detects it, picks a better-resourced target
//! language, routes the query through translation and the model's own
//! ability in that language, and returns a replaced or integrated answer
//! in the original language — plus the evaluation machinery to measure
//! how much the cross-lingual accuracy gap shrinks.
//!
//! Module map:
//!
//! - [`lang`] / [`types`] — language registry and shared domain types
//! - [`backends`] — chat + translation clients (HTTP, scripted, mock),
//!   with caching, retry, and rate limiting
//! - [`detector`] — per-language low-resource query classifier and the
//!   entropy-feature selection baseline
//! - [`pipeline`] — detect → select → translate → generate → replace or
//!   integrate, with full tracing
//! - [`evaluation`] — LLM-as-judge parsing, accuracy/gap reports, ablations
//! - [`datasets`] — corpus ingestion, translation augmentation, two-pass
//!   labeling with a review queue, synthetic generation
//! - [`simlab`] — synthetic bilingual knowledge world whose metrics are
//!   exactly enumerable, for offline verification

pub mod backends;
pub mod datasets;
pub mod detector;
pub mod evaluation;
pub mod lang;
pub mod pipeline;
pub mod ratio;
pub mod simlab;
pub(crate) mod textmatch;
pub mod types;

pub use lang::{LangError, LanguageCode, LanguageRegistry};
pub use types::{
    Answer, AnswerProvenance, BackendCall, CallKind, CallPurpose, KnowledgeLabel, PipelineTrace,
    Query, TokenUsage,
};
