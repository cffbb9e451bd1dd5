//! Marker-based mock translator: `@@<lang>@@<payload>`.
//!
//! The format is bit-exact and invertible, which lets offline runs assert
//! output-language invariants and lets the sim backend recognize what
//! language a "translated" prompt is in.

use super::{BackendError, TranslationRequest, Translator};
use crate::lang::LanguageCode;

/// Splits `@@<lang>@@<payload>` into its parts. Returns `None` when the
/// text does not start with a well-formed marker.
pub fn strip_marker(text: &str) -> Option<(LanguageCode, &str)> {
    let rest = text.strip_prefix("@@")?;
    let end = rest.find("@@")?;
    let code = LanguageCode::parse_code(&rest[..end]).ok()?;
    Some((code, &rest[end + 2..]))
}

/// Lossless mock translator. Translating re-marks the payload with the
/// target language; the payload itself never changes.
#[derive(Debug, Default, Clone)]
pub struct MockTranslator;

impl Translator for MockTranslator {
    fn translate(&self, req: &TranslationRequest) -> Result<String, BackendError> {
        if req.text.is_empty() {
            return Err(BackendError::EmptyText);
        }
        let payload = match strip_marker(&req.text) {
            Some((_, payload)) => payload,
            None => req.text.as_str(),
        };
        Ok(format!("@@{}@@{}", req.target, payload))
    }

    fn identity(&self) -> String {
        "mock-translator".into()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::LanguageRegistry;

    fn lang(code: &str) -> LanguageCode {
        LanguageRegistry::builtin().normalize(code).unwrap()
    }

    #[test]
    fn marks_plain_text() {
        let t = MockTranslator;
        let req = TranslationRequest::new("hello", lang("zh")).unwrap();
        assert_eq!(t.translate(&req).unwrap(), "@@zh@@hello");
    }

    #[test]
    fn round_trip_recovers_payload() {
        let t = MockTranslator;
        let once = t
            .translate(&TranslationRequest::new("天空为什么是蓝色的", lang("en")).unwrap())
            .unwrap();
        let back = t
            .translate(&TranslationRequest::new(once, lang("zh")).unwrap())
            .unwrap();
        let (code, payload) = strip_marker(&back).unwrap();
        assert_eq!(code.as_str(), "zh");
        assert_eq!(payload, "天空为什么是蓝色的");
    }

    #[test]
    fn empty_text_rejected() {
        let t = MockTranslator;
        let req = TranslationRequest {
            text: String::new(),
            target: lang("zh"),
            source: None,
        };
        assert!(matches!(t.translate(&req), Err(BackendError::EmptyText)));
    }

    #[test]
    fn malformed_markers_treated_as_plain_text() {
        assert!(strip_marker("@@zh@hello").is_none());
        assert!(strip_marker("@@ZH!@@hello").is_none());
        assert!(strip_marker("no marker").is_none());
        let (code, payload) = strip_marker("@@ja@@text").unwrap();
        assert_eq!(code.as_str(), "ja");
        assert_eq!(payload, "text");
    }
}
