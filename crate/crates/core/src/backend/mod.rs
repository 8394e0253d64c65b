//! Text-generation backends.
//!
//! [`TextBackend`] is the raw model call. [`Generator`] wraps a backend with
//! the on-disk [`ResponseCache`] and a [`RetryPolicy`], and is what the
//! pipeline talks to.

mod cache;
mod http;
mod scripted;

use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use cache::{CacheEntry, ResponseCache};
pub use http::{HttpBackend, HttpConfig, DEFAULT_API_KEY_ENV};
pub use scripted::{Matcher, Responder, ScriptedBackend};

pub const DEFAULT_TEMPERATURE: f64 = 0.7;
/// Token budget for claim and summary calls.
pub const CLAIM_MAX_OUTPUT: u32 = 1024;
/// Token budget for direct, CoT and ClaimSim answer calls.
pub const ANSWER_MAX_OUTPUT: u32 = 2048;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub model: String,
    pub prompt: String,
    pub temperature: f64,
    /// Distinguishes repeated samples of the same prompt.
    pub sample_index: u64,
    pub max_output: u32,
    /// Free-form label (e.g. `claimsim/claim_generation`) stored with cache
    /// entries. Not part of the fingerprint.
    #[serde(default)]
    pub tag: Option<String>,
}

impl GenerationRequest {
    pub fn new(model: impl Into<String>, prompt: impl Into<String>) -> Self {
        Self {
            model: model.into(),
            prompt: prompt.into(),
            temperature: DEFAULT_TEMPERATURE,
            sample_index: 0,
            max_output: ANSWER_MAX_OUTPUT,
            tag: None,
        }
    }

    pub fn with_temperature(mut self, temperature: f64) -> Self {
        self.temperature = temperature;
        self
    }

    pub fn with_sample_index(mut self, sample_index: u64) -> Self {
        self.sample_index = sample_index;
        self
    }

    pub fn with_max_output(mut self, max_output: u32) -> Self {
        self.max_output = max_output;
        self
    }

    pub fn with_tag(mut self, tag: impl Into<String>) -> Self {
        self.tag = Some(tag.into());
        self
    }

    fn validate(&self) -> Result<(), BackendError> {
        if self.prompt.is_empty() {
            return Err(BackendError::InvalidRequest("prompt is empty".into()));
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(BackendError::InvalidRequest(format!(
                "temperature {} outside [0, 2]",
                self.temperature
            )));
        }
        if self.max_output == 0 {
            return Err(BackendError::InvalidRequest(
                "max_output must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// SHA-256 request fingerprint.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Fingerprint(pub [u8; 32]);

impl Fingerprint {
    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Option<Self> {
        let bytes = hex::decode(s).ok()?;
        Some(Fingerprint(bytes.try_into().ok()?))
    }
}

impl fmt::Display for Fingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl fmt::Debug for Fingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Fingerprint({})", &self.to_hex()[..12])
    }
}

impl Serialize for Fingerprint {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Fingerprint {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Fingerprint::from_hex(&s).ok_or_else(|| serde::de::Error::custom("bad fingerprint hex"))
    }
}

/// Canonical temperature rendering used in fingerprints.
pub fn canonical_temperature(t: f64) -> String {
    format!("{t:.4}")
}

/// Hash of the length-prefixed fields model, temperature (4 decimals),
/// prompt and sample index.
pub fn fingerprint(request: &GenerationRequest) -> Fingerprint {
    let mut h = Sha256::new();
    let mut field = |bytes: &[u8]| {
        h.update((bytes.len() as u64).to_le_bytes());
        h.update(bytes);
    };
    field(b"surveysim-request-v1");
    field(request.model.as_bytes());
    field(canonical_temperature(request.temperature).as_bytes());
    field(request.prompt.as_bytes());
    field(request.sample_index.to_string().as_bytes());
    Fingerprint(h.finalize().into())
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BackendError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("authentication failed: {0}")]
    Authentication(String),
    #[error("rate limited: {0}")]
    RateLimited(String),
    #[error("backend returned an empty response")]
    EmptyResponse,
    #[error("API error (HTTP {status}): {message}")]
    Api { status: u16, message: String },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("cache error: {0}")]
    Cache(String),
    #[error("scripted backend: {0}")]
    Scripted(String),
}

impl BackendError {
    /// Errors worth retrying with backoff.
    pub fn is_transient(&self) -> bool {
        matches!(
            self,
            BackendError::Transport(_) | BackendError::RateLimited(_) | BackendError::EmptyResponse
        )
    }
}

/// A raw text-generation endpoint.
pub trait TextBackend: Send + Sync {
    fn backend_id(&self) -> String;

    fn complete(&self, request: &GenerationRequest) -> Result<String, BackendError>;
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenerationResponse {
    pub text: String,
    pub backend_id: String,
    pub cached: bool,
    pub latency: Duration,
    pub request_fingerprint: Fingerprint,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
    pub jitter: bool,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 5,
            base_delay: Duration::from_secs(1),
            max_delay: Duration::from_secs(60),
            jitter: true,
        }
    }
}

impl RetryPolicy {
    pub fn no_delay() -> Self {
        Self {
            base_delay: Duration::ZERO,
            jitter: false,
            ..Self::default()
        }
    }

    /// Delay before retry number `retry` (0-based): base * 2^retry, capped,
    /// scaled into [0.5, 1.0) of that value when jitter is on.
    pub fn delay(&self, retry: u32) -> Duration {
        let exp = self
            .base_delay
            .saturating_mul(1u32.checked_shl(retry).unwrap_or(u32::MAX))
            .min(self.max_delay);
        if self.jitter && !exp.is_zero() {
            exp.mul_f64(rand::rng().random_range(0.5..1.0))
        } else {
            exp
        }
    }
}

/// Backend + cache + retries, shareable across worker threads.
pub struct Generator {
    backend: Arc<dyn TextBackend>,
    cache: Option<ResponseCache>,
    retry: RetryPolicy,
    backend_calls: AtomicU64,
    cache_hits: AtomicU64,
}

impl Generator {
    pub fn new(backend: Arc<dyn TextBackend>) -> Self {
        Self {
            backend,
            cache: None,
            retry: RetryPolicy::default(),
            backend_calls: AtomicU64::new(0),
            cache_hits: AtomicU64::new(0),
        }
    }

    pub fn with_cache(mut self, cache: ResponseCache) -> Self {
        self.cache = Some(cache);
        self
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn backend_id(&self) -> String {
        self.backend.backend_id()
    }

    pub fn cache(&self) -> Option<&ResponseCache> {
        self.cache.as_ref()
    }

    /// Backend invocations so far, retries included.
    pub fn backend_calls(&self) -> u64 {
        self.backend_calls.load(Ordering::Relaxed)
    }

    pub fn cache_hits(&self) -> u64 {
        self.cache_hits.load(Ordering::Relaxed)
    }

    pub fn generate(
        &self,
        request: &GenerationRequest,
    ) -> Result<GenerationResponse, BackendError> {
        request.validate()?;
        let started = Instant::now();
        let fp = fingerprint(request);

        if let Some(cache) = &self.cache {
            if let Some(entry) = cache.get(&fp)? {
                self.cache_hits.fetch_add(1, Ordering::Relaxed);
                return Ok(GenerationResponse {
                    text: entry.response_text,
                    backend_id: entry.backend_id,
                    cached: true,
                    latency: started.elapsed(),
                    request_fingerprint: fp,
                });
            }
        }

        let backend_id = self.backend.backend_id();
        let mut attempt = 0;
        let text = loop {
            self.backend_calls.fetch_add(1, Ordering::Relaxed);
            let result = self.backend.complete(request).and_then(|text| {
                if text.trim().is_empty() {
                    Err(BackendError::EmptyResponse)
                } else {
                    Ok(text)
                }
            });
            match result {
                Ok(text) => break text,
                Err(e) if e.is_transient() && attempt + 1 < self.retry.max_attempts => {
                    let delay = self.retry.delay(attempt);
                    log::warn!("{backend_id}: {e}; retrying in {delay:?}");
                    std::thread::sleep(delay);
                    attempt += 1;
                }
                Err(e) => return Err(e),
            }
        };

        let mut text = text;
        if let Some(cache) = &self.cache {
            if !cache.put(&CacheEntry::new(&fp, request, &text, &backend_id))? {
                // another writer finished first; serve its text so every caller agrees
                if let Some(entry) = cache.get(&fp)? {
                    text = entry.response_text;
                }
            }
        }
        Ok(GenerationResponse {
            text,
            backend_id,
            cached: false,
            latency: started.elapsed(),
            request_fingerprint: fp,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Mutex;

    #[test]
    fn fingerprint_covers_sample_index_and_canonical_temperature() {
        let base = GenerationRequest::new("m", "prompt");
        assert_ne!(
            fingerprint(&base),
            fingerprint(&base.clone().with_sample_index(1))
        );
        let a = base.clone().with_temperature(0.7);
        let b = base.clone().with_temperature("0.70".parse().unwrap());
        assert_eq!(fingerprint(&a), fingerprint(&b));
        assert_ne!(
            fingerprint(&a),
            fingerprint(&base.clone().with_temperature(0.8))
        );
        // tags and budgets do not change what the model is asked
        assert_eq!(
            fingerprint(&base),
            fingerprint(&base.clone().with_tag("direct").with_max_output(7))
        );
    }

    #[test]
    fn fingerprint_is_stable_across_processes() {
        // frozen value; changes only if the canonical encoding changes
        let fp = fingerprint(&GenerationRequest::new("gpt-4o-mini", "hello"));
        assert_eq!(fp, Fingerprint::from_hex(&fp.to_hex()).unwrap());
        assert_eq!(fp.to_hex(), {
            let mut h = Sha256::new();
            for f in [
                &b"surveysim-request-v1"[..],
                b"gpt-4o-mini",
                b"0.7000",
                b"hello",
                b"0",
            ] {
                h.update((f.len() as u64).to_le_bytes());
                h.update(f);
            }
            hex::encode(h.finalize())
        });
    }

    struct Flaky {
        failures: Mutex<Vec<BackendError>>,
    }

    impl TextBackend for Flaky {
        fn backend_id(&self) -> String {
            "flaky".into()
        }
        fn complete(&self, _: &GenerationRequest) -> Result<String, BackendError> {
            match self.failures.lock().unwrap().pop() {
                Some(e) => Err(e),
                None => Ok("ok".into()),
            }
        }
    }

    #[test]
    fn retries_transient_errors_then_caches_once() {
        let dir = tempfile::tempdir().unwrap();
        let backend = Arc::new(Flaky {
            failures: Mutex::new(vec![
                BackendError::RateLimited("slow down".into()),
                BackendError::Transport("reset".into()),
            ]),
        });
        let g = Generator::new(backend)
            .with_cache(ResponseCache::open(dir.path()).unwrap())
            .with_retry(RetryPolicy::no_delay());
        let req = GenerationRequest::new("m", "p");
        let r = g.generate(&req).unwrap();
        assert_eq!(r.text, "ok");
        assert_eq!(g.backend_calls(), 3);
        assert_eq!(g.cache().unwrap().entries().unwrap().len(), 1);
        assert!(g.generate(&req).unwrap().cached);
        assert_eq!(g.backend_calls(), 3);
    }

    #[test]
    fn gives_up_after_max_attempts() {
        let backend = Arc::new(Flaky {
            failures: Mutex::new(vec![BackendError::RateLimited("x".into()); 10]),
        });
        let g = Generator::new(backend).with_retry(RetryPolicy::no_delay());
        let err = g.generate(&GenerationRequest::new("m", "p")).unwrap_err();
        assert!(matches!(err, BackendError::RateLimited(_)));
        assert_eq!(g.backend_calls(), 5);
    }

    #[test]
    fn authentication_is_not_retried() {
        let backend = Arc::new(Flaky {
            failures: Mutex::new(vec![BackendError::Authentication("bad key".into())]),
        });
        let g = Generator::new(backend).with_retry(RetryPolicy::no_delay());
        assert!(g.generate(&GenerationRequest::new("m", "p")).is_err());
        assert_eq!(g.backend_calls(), 1);
    }

    #[test]
    fn rejects_bad_requests() {
        let g = Generator::new(Arc::new(Flaky {
            failures: Mutex::new(vec![]),
        }));
        assert!(g.generate(&GenerationRequest::new("m", "")).is_err());
        assert!(g
            .generate(&GenerationRequest::new("m", "p").with_temperature(2.5))
            .is_err());
        assert_eq!(g.backend_calls(), 0);
    }

    #[test]
    fn backoff_grows_and_caps() {
        let p = RetryPolicy {
            jitter: false,
            ..RetryPolicy::default()
        };
        assert_eq!(p.delay(0), Duration::from_secs(1));
        assert_eq!(p.delay(3), Duration::from_secs(8));
        assert_eq!(p.delay(40), Duration::from_secs(60));
        let j = RetryPolicy::default().delay(2);
        assert!(j >= Duration::from_secs(2) && j < Duration::from_secs(4));
    }
}
