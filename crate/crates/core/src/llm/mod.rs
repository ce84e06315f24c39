//! LLM access: prompt templates, a cached and retrying chat gateway, and
//! reply parsers.

mod cache;
mod http;
mod parse;
mod prompt;

use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use cache::ResponseCache;
pub use http::{HttpChatBackend, API_KEY_ENV, BASE_URL_ENV, DEFAULT_BASE_URL};
pub use parse::{normalize_title, numbered_entries, parse_binary_flag, parse_ranked_list, RankedOutput, MAX_RANKED};
pub use prompt::*;

pub const CACHE_DIR_ENV: &str = "RE2_CACHE_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatTurn {
    pub role: Role,
    pub content: String,
}

impl ChatTurn {
    pub fn user(content: impl Into<String>) -> Self {
        Self { role: Role::User, content: content.into() }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self { role: Role::Assistant, content: content.into() }
    }

    pub fn system(content: impl Into<String>) -> Self {
        Self { role: Role::System, content: content.into() }
    }
}

/// What is actually sent to a backend and what the cache key covers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub temperature: f64,
    pub messages: Vec<ChatTurn>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Http,
    Simulated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_delay_ms: u64,
    pub max_delay_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self { max_retries: 4, base_delay_ms: 500, max_delay_ms: 30_000 }
    }
}

impl RetryPolicy {
    pub fn delay(&self, attempt: u32) -> Duration {
        let ms = self.base_delay_ms.saturating_mul(1u64 << attempt.min(20));
        Duration::from_millis(ms.min(self.max_delay_ms))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LlmProfile {
    pub backend: BackendKind,
    pub model_name: String,
    pub temperature: f64,
    pub max_concurrency: usize,
    pub cache_dir: Option<PathBuf>,
    pub retry: RetryPolicy,
}

impl Default for LlmProfile {
    fn default() -> Self {
        Self {
            backend: BackendKind::Simulated,
            model_name: "gpt-4".into(),
            temperature: 0.0,
            max_concurrency: 4,
            cache_dir: None,
            retry: RetryPolicy::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BackendFailure {
    pub status: Option<u16>,
    pub message: String,
    pub transient: bool,
}

/// Anything that can answer a chat request.
pub trait ChatBackend: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> std::result::Result<String, BackendFailure>;
}

impl<T: ChatBackend + ?Sized> ChatBackend for Arc<T> {
    fn complete(&self, request: &ChatRequest) -> std::result::Result<String, BackendFailure> {
        (**self).complete(request)
    }
}

struct Limiter {
    slots: Mutex<usize>,
    freed: Condvar,
}

impl Limiter {
    fn new(n: usize) -> Self {
        Self { slots: Mutex::new(n.max(1)), freed: Condvar::new() }
    }

    fn acquire(&self) -> LimiterGuard<'_> {
        let mut slots = self.slots.lock().unwrap();
        while *slots == 0 {
            slots = self.freed.wait(slots).unwrap();
        }
        *slots -= 1;
        LimiterGuard(self)
    }
}

struct LimiterGuard<'a>(&'a Limiter);

impl Drop for LimiterGuard<'_> {
    fn drop(&mut self) {
        *self.0.slots.lock().unwrap() += 1;
        self.0.freed.notify_one();
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GatewayStats {
    pub requests: u64,
    pub cache_hits: u64,
    pub backend_calls: u64,
    pub retries: u64,
}

impl GatewayStats {
    pub fn hit_rate(&self) -> f64 {
        if self.requests == 0 {
            0.0
        } else {
            self.cache_hits as f64 / self.requests as f64
        }
    }
}

/// Cached, retrying, concurrency-limited front door to a chat backend.
pub struct LlmGateway {
    backend: Box<dyn ChatBackend>,
    profile: LlmProfile,
    cache: ResponseCache,
    limiter: Limiter,
    key_locks: Mutex<std::collections::HashMap<String, Arc<Mutex<()>>>>,
    requests: AtomicU64,
    hits: AtomicU64,
    calls: AtomicU64,
    retries: AtomicU64,
}

impl LlmGateway {
    pub fn new(backend: impl ChatBackend + 'static, profile: LlmProfile) -> Result<Self> {
        if profile.temperature < 0.0 {
            return Err(Error::invalid("temperature must be >= 0"));
        }
        let cache = ResponseCache::new(profile.cache_dir.clone())?;
        Ok(Self {
            backend: Box::new(backend),
            limiter: Limiter::new(profile.max_concurrency),
            profile,
            cache,
            key_locks: Mutex::default(),
            requests: AtomicU64::new(0),
            hits: AtomicU64::new(0),
            calls: AtomicU64::new(0),
            retries: AtomicU64::new(0),
        })
    }

    pub fn profile(&self) -> &LlmProfile {
        &self.profile
    }

    pub fn stats(&self) -> GatewayStats {
        GatewayStats {
            requests: self.requests.load(Ordering::Relaxed),
            cache_hits: self.hits.load(Ordering::Relaxed),
            backend_calls: self.calls.load(Ordering::Relaxed),
            retries: self.retries.load(Ordering::Relaxed),
        }
    }

    pub fn reset_stats(&self) {
        for c in [&self.requests, &self.hits, &self.calls, &self.retries] {
            c.store(0, Ordering::Relaxed);
        }
    }

    /// Send a conversation and return the assistant reply. Identical requests
    /// are answered from cache after the first backend call.
    pub fn complete_chat(&self, turns: &[ChatTurn]) -> Result<String> {
        if turns.is_empty() {
            return Err(Error::invalid("chat request has no turns"));
        }
        if let Some(t) = turns.iter().find(|t| t.content.trim().is_empty()) {
            return Err(Error::invalid(format!("empty {:?} turn", t.role)));
        }
        self.requests.fetch_add(1, Ordering::Relaxed);
        let request = ChatRequest {
            model: self.profile.model_name.clone(),
            temperature: self.profile.temperature,
            messages: turns.to_vec(),
        };
        let key = ResponseCache::key(&request);
        if let Some(hit) = self.cache.get(&key) {
            self.hits.fetch_add(1, Ordering::Relaxed);
            return Ok(hit);
        }

        let key_lock = self
            .key_locks
            .lock()
            .unwrap()
            .entry(key.clone())
            .or_default()
            .clone();
        let _held = key_lock.lock().unwrap();
        // someone else may have filled it while we waited
        if let Some(hit) = self.cache.get(&key) {
            self.hits.fetch_add(1, Ordering::Relaxed);
            return Ok(hit);
        }
        let reply = self.call_with_retry(&request)?;
        self.cache.put(&key, &request, &reply)?;
        self.key_locks.lock().unwrap().remove(&key);
        Ok(reply)
    }

    fn call_with_retry(&self, request: &ChatRequest) -> Result<String> {
        let policy = &self.profile.retry;
        let mut attempt = 0;
        loop {
            let outcome = {
                let _slot = self.limiter.acquire();
                self.calls.fetch_add(1, Ordering::Relaxed);
                self.backend.complete(request)
            };
            match outcome {
                Ok(text) => return Ok(text),
                Err(f) if f.transient && attempt < policy.max_retries => {
                    let wait = policy.delay(attempt);
                    log::warn!("transient backend failure ({}), retry {} in {:?}", f.message, attempt + 1, wait);
                    self.retries.fetch_add(1, Ordering::Relaxed);
                    std::thread::sleep(wait);
                    attempt += 1;
                }
                Err(f) => {
                    return Err(Error::Backend {
                        status: f.status,
                        message: if f.transient {
                            format!("retries exhausted after {} attempts: {}", attempt + 1, f.message)
                        } else {
                            f.message
                        },
                    })
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::AtomicUsize;

    struct Scripted {
        calls: AtomicUsize,
        fail_first: usize,
        status: u16,
        transient: bool,
    }

    impl ChatBackend for Scripted {
        fn complete(&self, request: &ChatRequest) -> std::result::Result<String, BackendFailure> {
            let n = self.calls.fetch_add(1, Ordering::SeqCst);
            if n < self.fail_first {
                return Err(BackendFailure {
                    status: Some(self.status),
                    message: "boom".into(),
                    transient: self.transient,
                });
            }
            Ok(format!("echo:{}", request.messages.last().unwrap().content))
        }
    }

    fn fast_profile() -> LlmProfile {
        LlmProfile {
            retry: RetryPolicy { max_retries: 3, base_delay_ms: 0, max_delay_ms: 0 },
            ..Default::default()
        }
    }

    fn scripted(fail_first: usize, transient: bool) -> Arc<Scripted> {
        Arc::new(Scripted { calls: AtomicUsize::new(0), fail_first, status: 503, transient })
    }

    #[test]
    fn default_profile_is_deterministic_gpt4() {
        let p = LlmProfile::default();
        assert_eq!(p.model_name, "gpt-4");
        assert_eq!(p.temperature, 0.0);
    }

    #[test]
    fn second_identical_request_is_a_cache_hit() {
        let backend = scripted(0, true);
        let gw = LlmGateway::new(backend.clone(), fast_profile()).unwrap();
        let turns = [ChatTurn::user("hello")];
        let a = gw.complete_chat(&turns).unwrap();
        let b = gw.complete_chat(&turns).unwrap();
        assert_eq!(a, b);
        assert_eq!(backend.calls.load(Ordering::SeqCst), 1);
        let s = gw.stats();
        assert_eq!((s.requests, s.cache_hits, s.backend_calls), (2, 1, 1));
    }

    #[test]
    fn disk_cache_survives_new_gateway() {
        let dir = tempfile::tempdir().unwrap();
        let profile = LlmProfile { cache_dir: Some(dir.path().to_path_buf()), ..fast_profile() };
        let turns = [ChatTurn::user("persist me")];
        let first = scripted(0, true);
        LlmGateway::new(first.clone(), profile.clone()).unwrap().complete_chat(&turns).unwrap();
        let files: Vec<_> = std::fs::read_dir(dir.path()).unwrap().collect();
        assert_eq!(files.len(), 1);
        let name = files[0].as_ref().unwrap().file_name().into_string().unwrap();
        assert_eq!(name.len(), 64 + ".json".len());

        let second = scripted(0, true);
        let gw = LlmGateway::new(second.clone(), profile).unwrap();
        assert_eq!(gw.complete_chat(&turns).unwrap(), "echo:persist me");
        assert_eq!(second.calls.load(Ordering::SeqCst), 0);
    }

    #[test]
    fn cache_key_covers_model_and_temperature() {
        let base = ChatRequest { model: "m".into(), temperature: 0.0, messages: vec![ChatTurn::user("x")] };
        let hot = ChatRequest { temperature: 0.7, ..base.clone() };
        let other = ChatRequest { model: "n".into(), ..base.clone() };
        assert_ne!(ResponseCache::key(&base), ResponseCache::key(&hot));
        assert_ne!(ResponseCache::key(&base), ResponseCache::key(&other));
    }

    #[test]
    fn transient_failures_are_retried() {
        let backend = scripted(2, true);
        let gw = LlmGateway::new(backend.clone(), fast_profile()).unwrap();
        assert_eq!(gw.complete_chat(&[ChatTurn::user("x")]).unwrap(), "echo:x");
        assert_eq!(backend.calls.load(Ordering::SeqCst), 3);
        assert_eq!(gw.stats().retries, 2);
    }

    #[test]
    fn retry_exhaustion_carries_status() {
        let backend = scripted(100, true);
        let gw = LlmGateway::new(backend.clone(), fast_profile()).unwrap();
        match gw.complete_chat(&[ChatTurn::user("x")]) {
            Err(Error::Backend { status: Some(503), message }) => assert!(message.contains("exhausted")),
            other => panic!("{other:?}"),
        }
        assert_eq!(backend.calls.load(Ordering::SeqCst), 4);
    }

    #[test]
    fn permanent_failure_not_retried() {
        let backend = Arc::new(Scripted { calls: AtomicUsize::new(0), fail_first: 1, status: 401, transient: false });
        let gw = LlmGateway::new(backend.clone(), fast_profile()).unwrap();
        assert!(matches!(gw.complete_chat(&[ChatTurn::user("x")]), Err(Error::Backend { status: Some(401), .. })));
        assert_eq!(backend.calls.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn empty_turns_rejected() {
        let gw = LlmGateway::new(scripted(0, true), fast_profile()).unwrap();
        assert!(gw.complete_chat(&[]).is_err());
        assert!(gw.complete_chat(&[ChatTurn::user(" ")]).is_err());
    }

    #[test]
    fn backoff_grows_and_caps() {
        let p = RetryPolicy { max_retries: 5, base_delay_ms: 100, max_delay_ms: 350 };
        assert_eq!(p.delay(0), Duration::from_millis(100));
        assert_eq!(p.delay(1), Duration::from_millis(200));
        assert_eq!(p.delay(2), Duration::from_millis(350));
    }

    #[test]
    fn concurrent_identical_requests_call_backend_once() {
        let backend = scripted(0, true);
        let gw = LlmGateway::new(backend.clone(), LlmProfile { max_concurrency: 8, ..fast_profile() }).unwrap();
        std::thread::scope(|s| {
            for _ in 0..16 {
                s.spawn(|| gw.complete_chat(&[ChatTurn::user("same")]).unwrap());
            }
        });
        assert_eq!(backend.calls.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn limiter_bounds_in_flight() {
        struct Slow {
            now: AtomicUsize,
            peak: AtomicUsize,
        }
        impl ChatBackend for Slow {
            fn complete(&self, r: &ChatRequest) -> std::result::Result<String, BackendFailure> {
                let n = self.now.fetch_add(1, Ordering::SeqCst) + 1;
                self.peak.fetch_max(n, Ordering::SeqCst);
                std::thread::sleep(Duration::from_millis(5));
                self.now.fetch_sub(1, Ordering::SeqCst);
                Ok(r.messages[0].content.clone())
            }
        }
        let backend = Arc::new(Slow { now: AtomicUsize::new(0), peak: AtomicUsize::new(0) });
        let gw = LlmGateway::new(backend.clone(), LlmProfile { max_concurrency: 2, ..fast_profile() }).unwrap();
        std::thread::scope(|s| {
            for i in 0..10 {
                let gw = &gw;
                s.spawn(move || gw.complete_chat(&[ChatTurn::user(format!("q{i}"))]).unwrap());
            }
        });
        assert!(backend.peak.load(Ordering::SeqCst) <= 2);
    }
}
