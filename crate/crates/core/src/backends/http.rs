//! HTTP backends: an OpenAI-compatible chat-completions client and a
//! small JSON translation contract, both single-attempt. Compose with
//! [`super::RetryingChat`], [`super::RateLimiter`], and
//! [`super::CachedChat`] for production stacks.

use std::time::Duration;

use serde_json::{json, Value};
use ureq::Agent;

use super::{BackendConfig, BackendError, ChatBackend, ChatRequest, ChatResponse, TranslationRequest, Translator};
use crate::types::TokenUsage;

fn build_agent(config: &BackendConfig) -> Agent {
    let cfg = Agent::config_builder()
        .timeout_global(Some(Duration::from_millis(config.timeout_ms)))
        .http_status_as_error(false)
        .build();
    Agent::new_with_config(cfg)
}

fn bearer(config: &BackendConfig) -> Result<Option<String>, BackendError> {
    match &config.auth_env {
        None => Ok(None),
        Some(var) => match std::env::var(var) {
            Ok(secret) => Ok(Some(format!("Bearer {secret}"))),
            Err(_) => Err(BackendError::AuthFailure(format!(
                "environment variable {var} is not set"
            ))),
        },
    }
}

fn classify_transport(e: ureq::Error) -> BackendError {
    match e {
        ureq::Error::Timeout(_) => BackendError::Timeout { attempts: 1 },
        other => BackendError::Transport(other.to_string()),
    }
}

fn classify_status(status: u16, body: &str) -> Option<BackendError> {
    match status {
        200..=299 => None,
        401 | 403 => Some(BackendError::AuthFailure(format!("status {status}"))),
        429 => Some(BackendError::RateLimited { attempts: 1 }),
        408 | 500..=599 => Some(BackendError::Transport(format!("status {status}: {body}"))),
        other => Some(BackendError::MalformedResponse(format!(
            "unexpected status {other}: {body}"
        ))),
    }
}

/// OpenAI-compatible `/chat/completions` client.
pub struct HttpChat {
    config: BackendConfig,
    agent: Agent,
    url: String,
}

impl HttpChat {
    pub fn new(config: BackendConfig) -> Self {
        let base = config.endpoint.trim_end_matches('/');
        let url = if base.ends_with("/chat/completions") {
            base.to_string()
        } else {
            format!("{base}/chat/completions")
        };
        let agent = build_agent(&config);
        HttpChat { config, agent, url }
    }

    fn parse_response(value: Value) -> Result<ChatResponse, BackendError> {
        let text = value
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .ok_or_else(|| {
                BackendError::MalformedResponse("missing choices[0].message.content".into())
            })?
            .to_string();
        let token_logprobs = value
            .pointer("/choices/0/logprobs/content")
            .and_then(Value::as_array)
            .map(|entries| {
                entries
                    .iter()
                    .filter_map(|e| e.get("logprob").and_then(Value::as_f64))
                    .collect::<Vec<f64>>()
            })
            .filter(|v| !v.is_empty());
        let usage = value.get("usage").and_then(|u| {
            Some(TokenUsage {
                prompt_tokens: u.get("prompt_tokens")?.as_u64()? as u32,
                completion_tokens: u.get("completion_tokens")?.as_u64()? as u32,
            })
        });
        let resp = ChatResponse {
            text,
            token_logprobs,
            usage,
        };
        resp.check_logprobs()?;
        Ok(resp)
    }
}

impl ChatBackend for HttpChat {
    fn chat(&self, req: &ChatRequest) -> Result<ChatResponse, BackendError> {
        let body = json!({
            "model": req.model_id,
            "messages": [{"role": "user", "content": req.prompt}],
            "temperature": req.temperature,
            "max_tokens": req.max_tokens,
        });
        let mut builder = self.agent.post(&self.url);
        if let Some(auth) = bearer(&self.config)? {
            builder = builder.header("authorization", auth);
        }
        let mut resp = builder.send_json(&body).map_err(classify_transport)?;
        let status = resp.status().as_u16();
        if !(200..300).contains(&status) {
            let text = resp.body_mut().read_to_string().unwrap_or_default();
            if let Some(err) = classify_status(status, &text) {
                return Err(err);
            }
        }
        let value: Value = resp
            .body_mut()
            .read_json()
            .map_err(|e| BackendError::MalformedResponse(e.to_string()))?;
        Self::parse_response(value)
    }

    fn identity(&self) -> String {
        self.config.identity()
    }
}

/// Translation-over-HTTP client.
///
/// Contract: `POST <endpoint>` with `{"text", "source"?, "target"}`,
/// response `{"text": "<translated>"}`. Same auth and retry family as the
/// chat client.
pub struct HttpTranslator {
    config: BackendConfig,
    agent: Agent,
}

impl HttpTranslator {
    pub fn new(config: BackendConfig) -> Self {
        let agent = build_agent(&config);
        HttpTranslator { config, agent }
    }
}

impl Translator for HttpTranslator {
    fn translate(&self, req: &TranslationRequest) -> Result<String, BackendError> {
        if req.text.is_empty() {
            return Err(BackendError::EmptyText);
        }
        let mut body = json!({
            "text": req.text,
            "target": req.target.as_str(),
        });
        if let Some(source) = &req.source {
            body["source"] = Value::String(source.as_str().to_string());
        }
        let mut builder = self.agent.post(&self.config.endpoint);
        if let Some(auth) = bearer(&self.config)? {
            builder = builder.header("authorization", auth);
        }
        let mut resp = builder.send_json(&body).map_err(classify_transport)?;
        let status = resp.status().as_u16();
        if !(200..300).contains(&status) {
            let text = resp.body_mut().read_to_string().unwrap_or_default();
            if let Some(err) = classify_status(status, &text) {
                return Err(err);
            }
        }
        let value: Value = resp
            .body_mut()
            .read_json()
            .map_err(|e| BackendError::MalformedResponse(e.to_string()))?;
        value
            .get("text")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| BackendError::MalformedResponse("missing \"text\" field".into()))
    }

    fn identity(&self) -> String {
        self.config.identity()
    }
}
