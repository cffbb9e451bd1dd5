//! Deterministic scripted chat backend for offline tests.

use std::collections::HashMap;
use std::sync::Mutex;

use super::{BackendError, ChatBackend, ChatRequest, ChatResponse};

/// How a script rule matches an incoming prompt.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Matcher {
    /// Whole-prompt equality. Always wins over substring rules.
    Exact(String),
    /// Prompt contains the needle. When several substring rules match at
    /// runtime, the longest needle wins.
    Substring(String),
}

/// The reply side of a rule.
#[derive(Debug, Clone)]
pub enum Reply {
    /// Same reply every time the rule fires.
    Fixed(ChatResponse),
    /// Replies consumed in order; the last one repeats.
    Sequence(Vec<ChatResponse>),
}

impl Reply {
    pub fn text(text: impl Into<String>) -> Self {
        Reply::Fixed(ChatResponse::text_only(text))
    }

    pub fn texts<I: IntoIterator<Item = S>, S: Into<String>>(texts: I) -> Self {
        Reply::Sequence(texts.into_iter().map(ChatResponse::text_only).collect())
    }
}

struct Rule {
    matcher: Matcher,
    reply: Reply,
}

/// Chat backend that answers from a fixed script. Exact rules are indexed
/// by prompt hash; substring rules are validated to be unambiguous at
/// construction (no needle may contain another).
pub struct ScriptedChat {
    exact: HashMap<String, usize>,
    substrings: Vec<usize>,
    rules: Vec<Rule>,
    default_reply: Option<ChatResponse>,
    // rule index -> how many times it has fired (for Reply::Sequence)
    fire_counts: Mutex<HashMap<usize, usize>>,
}

impl ScriptedChat {
    pub fn new(rules: Vec<(Matcher, Reply)>) -> Result<Self, BackendError> {
        let rules: Vec<Rule> = rules
            .into_iter()
            .map(|(matcher, reply)| Rule { matcher, reply })
            .collect();
        let mut exact = HashMap::new();
        let mut substrings = Vec::new();
        for (idx, rule) in rules.iter().enumerate() {
            match &rule.matcher {
                Matcher::Exact(p) => {
                    exact.insert(p.clone(), idx);
                }
                Matcher::Substring(_) => substrings.push(idx),
            }
        }
        // Validation probe: each substring needle, fed back as a prompt,
        // must match exactly one substring rule. Needle containment is the
        // only way two such rules can collide on a probe.
        for &i in &substrings {
            let Matcher::Substring(probe) = &rules[i].matcher else {
                unreachable!()
            };
            let hits: Vec<&str> = substrings
                .iter()
                .filter_map(|&j| match &rules[j].matcher {
                    Matcher::Substring(needle) if probe.contains(needle.as_str()) => {
                        Some(needle.as_str())
                    }
                    _ => None,
                })
                .collect();
            if hits.len() > 1 {
                return Err(BackendError::AmbiguousScript(
                    hits[0].to_string(),
                    hits[1].to_string(),
                ));
            }
        }
        Ok(ScriptedChat {
            exact,
            substrings,
            rules,
            default_reply: None,
            fire_counts: Mutex::new(HashMap::new()),
        })
    }

    /// Reply used when no rule matches, instead of a `ScriptMiss` error.
    pub fn with_default(mut self, reply: ChatResponse) -> Self {
        self.default_reply = Some(reply);
        self
    }

    fn fire(&self, idx: usize) -> ChatResponse {
        let mut counts = self.fire_counts.lock().expect("script state poisoned");
        let n = counts.entry(idx).or_insert(0);
        let fired = *n;
        *n += 1;
        match &self.rules[idx].reply {
            Reply::Fixed(resp) => resp.clone(),
            Reply::Sequence(seq) => {
                let i = fired.min(seq.len().saturating_sub(1));
                seq[i].clone()
            }
        }
    }
}

impl ChatBackend for ScriptedChat {
    fn chat(&self, req: &ChatRequest) -> Result<ChatResponse, BackendError> {
        if let Some(&idx) = self.exact.get(&req.prompt) {
            return Ok(self.fire(idx));
        }
        // Longest matching needle wins; construction rules make this
        // deterministic.
        let mut hit: Option<(usize, usize)> = None; // (needle len, rule idx)
        for &idx in &self.substrings {
            if let Matcher::Substring(needle) = &self.rules[idx].matcher {
                if req.prompt.contains(needle.as_str()) {
                    let cand = (needle.len(), idx);
                    hit = Some(match hit {
                        None => cand,
                        Some(cur) if cand.0 > cur.0 => cand,
                        Some(cur) => cur,
                    });
                }
            }
        }
        if let Some((_, idx)) = hit {
            return Ok(self.fire(idx));
        }
        match &self.default_reply {
            Some(resp) => Ok(resp.clone()),
            None => {
                let snippet: String = req.prompt.chars().take(80).collect();
                Err(BackendError::ScriptMiss(snippet))
            }
        }
    }

    fn identity(&self) -> String {
        format!("scripted({} rules)", self.rules.len())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn req(prompt: &str) -> ChatRequest {
        ChatRequest::deterministic(prompt, "test-model")
    }

    #[test]
    fn exact_reply_is_byte_exact() {
        let script = ScriptedChat::new(vec![(
            Matcher::Exact("What is a byte?".into()),
            Reply::text("8 bits\u{00a0}exactly"),
        )])
        .unwrap();
        let resp = script.chat(&req("What is a byte?")).unwrap();
        assert_eq!(resp.text, "8 bits\u{00a0}exactly");
    }

    #[test]
    fn temperature_zero_is_deterministic() {
        let script = ScriptedChat::new(vec![(
            Matcher::Substring("suitable language".into()),
            Reply::text("中文"),
        )])
        .unwrap();
        let a = script.chat(&req("choose the most suitable language for it")).unwrap();
        let b = script.chat(&req("choose the most suitable language for it")).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn exact_overrides_overlapping_substring() {
        let script = ScriptedChat::new(vec![
            (Matcher::Exact("ping pong".into()), Reply::text("exact")),
            (Matcher::Substring("ping".into()), Reply::text("sub")),
        ])
        .unwrap();
        assert_eq!(script.chat(&req("ping pong")).unwrap().text, "exact");
        assert_eq!(script.chat(&req("ping elsewhere")).unwrap().text, "sub");
    }

    #[test]
    fn unmatched_prompt_without_default_is_script_miss() {
        let script = ScriptedChat::new(vec![(
            Matcher::Substring("known".into()),
            Reply::text("yes"),
        )])
        .unwrap();
        assert!(matches!(
            script.chat(&req("something else")),
            Err(BackendError::ScriptMiss(_))
        ));
    }

    #[test]
    fn unmatched_prompt_with_default() {
        let script = ScriptedChat::new(vec![])
            .unwrap()
            .with_default(ChatResponse::text_only("fallback"));
        assert_eq!(script.chat(&req("anything")).unwrap().text, "fallback");
    }

    #[test]
    fn overlapping_substring_rules_rejected_at_construction() {
        let result = ScriptedChat::new(vec![
            (Matcher::Substring("language".into()), Reply::text("a")),
            (Matcher::Substring("suitable language".into()), Reply::text("b")),
        ]);
        assert!(matches!(result, Err(BackendError::AmbiguousScript(_, _))));
    }

    #[test]
    fn sequence_replies_fire_in_order_then_repeat() {
        let script = ScriptedChat::new(vec![(
            Matcher::Substring("label this".into()),
            Reply::texts(["English knowledge", "common"]),
        )])
        .unwrap();
        assert_eq!(script.chat(&req("label this: q")).unwrap().text, "English knowledge");
        assert_eq!(script.chat(&req("label this: q")).unwrap().text, "common");
        assert_eq!(script.chat(&req("label this: q")).unwrap().text, "common");
    }
}
