//! Sliding-window rate limiter, the single shared synchronization point
//! between concurrently running queries.

use std::collections::VecDeque;
use std::sync::{Arc, Mutex};

use super::Clock;

const WINDOW_MS: u64 = 1_000;

/// Caps issued requests so that any 1-second window holds at most `cap`.
pub struct RateLimiter {
    cap: u32,
    clock: Arc<dyn Clock>,
    issued: Mutex<VecDeque<u64>>,
}

impl RateLimiter {
    pub fn new(cap: u32, clock: Arc<dyn Clock>) -> Self {
        RateLimiter {
            cap: cap.max(1),
            clock,
            issued: Mutex::new(VecDeque::new()),
        }
    }

    /// Blocks until a slot is free, then records the issue.
    pub fn acquire(&self) {
        loop {
            let wait = {
                let now = self.clock.now_ms();
                let mut q = self.issued.lock().expect("rate limiter poisoned");
                while q.front().is_some_and(|&t| t + WINDOW_MS <= now) {
                    q.pop_front();
                }
                if (q.len() as u32) < self.cap {
                    q.push_back(now);
                    return;
                }
                q.front().map(|&t| (t + WINDOW_MS).saturating_sub(now)).unwrap_or(1)
            };
            self.clock.sleep_ms(wait.max(1));
        }
    }
}

/// Chat wrapper that takes a limiter slot before every call.
pub struct RateLimitedChat<B> {
    inner: B,
    limiter: Arc<RateLimiter>,
}

impl<B: super::ChatBackend> RateLimitedChat<B> {
    pub fn new(inner: B, limiter: Arc<RateLimiter>) -> Self {
        RateLimitedChat { inner, limiter }
    }
}

impl<B: super::ChatBackend> super::ChatBackend for RateLimitedChat<B> {
    fn chat(
        &self,
        req: &super::ChatRequest,
    ) -> Result<super::ChatResponse, super::BackendError> {
        self.limiter.acquire();
        self.inner.chat(req)
    }

    fn identity(&self) -> String {
        self.inner.identity()
    }
}

/// Translator wrapper sharing the same limiter.
pub struct RateLimitedTranslator<T> {
    inner: T,
    limiter: Arc<RateLimiter>,
}

impl<T: super::Translator> RateLimitedTranslator<T> {
    pub fn new(inner: T, limiter: Arc<RateLimiter>) -> Self {
        RateLimitedTranslator { inner, limiter }
    }
}

impl<T: super::Translator> super::Translator for RateLimitedTranslator<T> {
    fn translate(
        &self,
        req: &super::TranslationRequest,
    ) -> Result<String, super::BackendError> {
        self.limiter.acquire();
        self.inner.translate(req)
    }

    fn identity(&self) -> String {
        self.inner.identity()
    }
}
