//! On-disk, append-only response cache keyed by request hash.
//!
//! Layout: one file per request hash under the cache directory, holding
//! the raw response. Entries are never overwritten, so evaluation reruns
//! replay from disk without touching the network.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use super::{
    sha256_hex, BackendError, ChatBackend, ChatRequest, ChatResponse, TranslationRequest,
    Translator,
};

/// Shared cache directory handle with hit/miss counters.
pub struct ResponseCache {
    dir: PathBuf,
    hits: AtomicU64,
    misses: AtomicU64,
}

impl ResponseCache {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, BackendError> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        Ok(ResponseCache {
            dir,
            hits: AtomicU64::new(0),
            misses: AtomicU64::new(0),
        })
    }

    pub fn hits(&self) -> u64 {
        self.hits.load(Ordering::SeqCst)
    }

    pub fn misses(&self) -> u64 {
        self.misses.load(Ordering::SeqCst)
    }

    fn path_for(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    fn lookup(&self, key: &str) -> Result<Option<String>, BackendError> {
        let path = self.path_for(key);
        match std::fs::read_to_string(&path) {
            Ok(raw) => {
                self.hits.fetch_add(1, Ordering::SeqCst);
                Ok(Some(raw))
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                self.misses.fetch_add(1, Ordering::SeqCst);
                Ok(None)
            }
            Err(e) => Err(e.into()),
        }
    }

    // Append-only: first writer wins, concurrent writers of the same key
    // produce identical bytes anyway (responses are cached post-retry).
    fn store(&self, key: &str, raw: &str) -> Result<(), BackendError> {
        let path = self.path_for(key);
        if path.exists() {
            return Ok(());
        }
        let tmp = self.dir.join(format!(".{key}.tmp"));
        std::fs::write(&tmp, raw)?;
        std::fs::rename(&tmp, &path)?;
        Ok(())
    }
}

fn chat_key(req: &ChatRequest) -> String {
    let body = serde_json::to_string(req).expect("chat request serializes");
    sha256_hex(format!("chat:{body}").as_bytes())
}

fn translate_key(req: &TranslationRequest) -> String {
    let body = serde_json::to_string(req).expect("translation request serializes");
    sha256_hex(format!("translate:{body}").as_bytes())
}

/// Chat backend wrapper that serves repeat requests from disk.
pub struct CachedChat<B> {
    inner: B,
    cache: Arc<ResponseCache>,
}

impl<B: ChatBackend> CachedChat<B> {
    pub fn new(inner: B, cache: Arc<ResponseCache>) -> Self {
        CachedChat { inner, cache }
    }
}

impl<B: ChatBackend> ChatBackend for CachedChat<B> {
    fn chat(&self, req: &ChatRequest) -> Result<ChatResponse, BackendError> {
        let key = chat_key(req);
        if let Some(raw) = self.cache.lookup(&key)? {
            return serde_json::from_str(&raw)
                .map_err(|e| BackendError::MalformedResponse(format!("cache entry {key}: {e}")));
        }
        let resp = self.inner.chat(req)?;
        let raw = serde_json::to_string(&resp).expect("chat response serializes");
        self.cache.store(&key, &raw)?;
        Ok(resp)
    }

    fn identity(&self) -> String {
        self.inner.identity()
    }
}

/// Translator wrapper that serves repeat requests from disk, keyed by
/// (text, source, target).
pub struct CachedTranslator<T> {
    inner: T,
    cache: Arc<ResponseCache>,
}

impl<T: Translator> CachedTranslator<T> {
    pub fn new(inner: T, cache: Arc<ResponseCache>) -> Self {
        CachedTranslator { inner, cache }
    }
}

impl<T: Translator> Translator for CachedTranslator<T> {
    fn translate(&self, req: &TranslationRequest) -> Result<String, BackendError> {
        let key = translate_key(req);
        if let Some(raw) = self.cache.lookup(&key)? {
            return serde_json::from_str(&raw)
                .map_err(|e| BackendError::MalformedResponse(format!("cache entry {key}: {e}")));
        }
        let text = self.inner.translate(req)?;
        let raw = serde_json::to_string(&text).expect("string serializes");
        self.cache.store(&key, &raw)?;
        Ok(text)
    }

    fn identity(&self) -> String {
        self.inner.identity()
    }
}

/// Hex SHA-256 of a file's contents, for manifests.
pub fn hash_file(path: &Path) -> std::io::Result<String> {
    let bytes = std::fs::read(path)?;
    Ok(sha256_hex(&bytes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backends::{Matcher, Reply, ScriptedChat};
    use std::sync::atomic::AtomicU32;

    struct Counting<B> {
        inner: B,
        calls: AtomicU32,
    }

    impl<B: ChatBackend> ChatBackend for Counting<B> {
        fn chat(&self, req: &ChatRequest) -> Result<ChatResponse, BackendError> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            self.inner.chat(req)
        }
        fn identity(&self) -> String {
            self.inner.identity()
        }
    }

    #[test]
    fn second_identical_request_issues_zero_inner_calls() {
        let dir = tempfile::tempdir().unwrap();
        let cache = Arc::new(ResponseCache::open(dir.path()).unwrap());
        let script = ScriptedChat::new(vec![(Matcher::Substring("q".into()), Reply::text("a"))])
            .unwrap();
        let counting = Counting {
            inner: script,
            calls: AtomicU32::new(0),
        };
        let cached = CachedChat::new(&counting, cache.clone());
        let req = ChatRequest::deterministic("q1", "m");
        assert_eq!(cached.chat(&req).unwrap().text, "a");
        assert_eq!(cached.chat(&req).unwrap().text, "a");
        assert_eq!(counting.calls.load(Ordering::SeqCst), 1);
        assert_eq!(cache.hits(), 1);
        assert_eq!(cache.misses(), 1);
    }

    #[test]
    fn distinct_requests_get_distinct_entries() {
        let a = ChatRequest::deterministic("same prompt", "model-a");
        let b = ChatRequest::deterministic("same prompt", "model-b");
        assert_ne!(chat_key(&a), chat_key(&b));
        let t1 = TranslationRequest::new("x", crate::lang::LanguageCode::parse_code("zh").unwrap())
            .unwrap();
        let t2 = TranslationRequest::new("x", crate::lang::LanguageCode::parse_code("ja").unwrap())
            .unwrap();
        assert_ne!(translate_key(&t1), translate_key(&t2));
    }

    #[test]
    fn translation_cache_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let cache = Arc::new(ResponseCache::open(dir.path()).unwrap());
        let mock = crate::backends::MockTranslator;
        let cached = CachedTranslator::new(&mock, cache.clone());
        let req = TranslationRequest::new(
            "hello",
            crate::lang::LanguageCode::parse_code("zh").unwrap(),
        )
        .unwrap();
        assert_eq!(cached.translate(&req).unwrap(), "@@zh@@hello");
        assert_eq!(cached.translate(&req).unwrap(), "@@zh@@hello");
        assert_eq!(cache.hits(), 1);
    }
}
