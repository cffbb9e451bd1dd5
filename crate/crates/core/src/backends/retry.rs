//! Exponential-backoff retry wrapper for chat backends.

use std::sync::Arc;

use super::{BackendError, ChatBackend, ChatRequest, ChatResponse, Clock};

const BASE_BACKOFF_MS: u64 = 500;

/// Retries transient failures with exponential backoff. Non-transient
/// errors (auth, malformed responses) surface immediately.
pub struct RetryingChat<B> {
    inner: B,
    max_retries: u32,
    clock: Arc<dyn Clock>,
}

impl<B: ChatBackend> RetryingChat<B> {
    pub fn new(inner: B, max_retries: u32, clock: Arc<dyn Clock>) -> Self {
        RetryingChat {
            inner,
            max_retries,
            clock,
        }
    }
}

impl<B: ChatBackend> ChatBackend for RetryingChat<B> {
    fn chat(&self, req: &ChatRequest) -> Result<ChatResponse, BackendError> {
        let attempts = self.max_retries + 1;
        let mut last = None;
        for attempt in 0..attempts {
            if attempt > 0 {
                self.clock.sleep_ms(BASE_BACKOFF_MS << (attempt - 1).min(8));
            }
            match self.inner.chat(req) {
                Ok(resp) => return Ok(resp),
                Err(e) if e.is_transient() => last = Some(e),
                Err(e) => return Err(e),
            }
        }
        // Exhausted retries surface in the chat error vocabulary:
        // rate limiting keeps its identity, every other transient
        // failure (timeouts, refused connections, 5xx) is a Timeout.
        Err(match last {
            Some(BackendError::RateLimited { .. }) => BackendError::RateLimited { attempts },
            _ => BackendError::Timeout { attempts },
        })
    }

    fn identity(&self) -> String {
        self.inner.identity()
    }
}
