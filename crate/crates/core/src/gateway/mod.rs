//! Backend contract for chat completions plus the shared plumbing around
//! it: request keys, a persistent response cache and an in-flight limit.

mod cache;
mod http;
mod mock;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Instant;

use async_trait::async_trait;
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;
use tokio::sync::Semaphore;

use crate::prompt::{Message, StageKind};

pub use cache::CompletionCache;
pub use http::{HttpBackend, HttpConfig, RetryPolicy, DEFAULT_CREDENTIAL_ENV};
pub use mock::{FixtureEntry, MockBackend};

pub const DEFAULT_PARALLELISM: usize = 4;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum GatewayError {
    #[error("backend configuration: {0}")]
    Config(String),
    #[error("network error: {0}")]
    Network(String),
    #[error("rate limited after {attempts} attempts")]
    RateLimited { attempts: u32 },
    #[error("api error {status}: {body}")]
    Api { status: u16, body: String },
    #[error("backend returned an empty completion")]
    EmptyCompletion,
    #[error("no fixture for {0}")]
    UnknownFixtureKey(String),
    #[error("cache line {line} is corrupt: {reason}")]
    CacheCorrupt { line: usize, reason: String },
    #[error("i/o: {0}")]
    Io(String),
}

impl GatewayError {
    pub fn is_retryable(&self) -> bool {
        match self {
            GatewayError::Network(_) | GatewayError::RateLimited { .. } => true,
            GatewayError::Api { status, .. } => *status >= 500,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingParams {
    pub model: String,
    pub temperature: f64,
    pub top_p: f64,
    pub max_tokens: u32,
}

impl Default for SamplingParams {
    fn default() -> Self {
        Self {
            model: "gpt-3.5-turbo".into(),
            temperature: 0.5,
            top_p: 0.95,
            max_tokens: 1024,
        }
    }
}

impl SamplingParams {
    pub fn validate(&self) -> Result<(), GatewayError> {
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(GatewayError::Config(format!("temperature {} < 0", self.temperature)));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(GatewayError::Config(format!("top_p {} outside (0, 1]", self.top_p)));
        }
        if self.max_tokens == 0 {
            return Err(GatewayError::Config("max_tokens must be positive".into()));
        }
        if self.model.trim().is_empty() {
            return Err(GatewayError::Config("model name is empty".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompletionRequest {
    pub messages: Vec<Message>,
    pub params: SamplingParams,
    /// Distinguishes repeated samples of one prompt (diverse paths).
    pub path_index: u32,
    /// Repetition / run-seed label; distinct labels draw distinct samples.
    pub sample_label: String,
    pub question_id: String,
    pub stage: StageKind,
}

#[derive(Serialize)]
struct KeyMaterial<'a> {
    backend: &'a str,
    model: &'a str,
    messages: &'a [Message],
    temperature: f64,
    top_p: f64,
    max_tokens: u32,
    path_index: u32,
    sample: &'a str,
}

impl CompletionRequest {
    /// Hex SHA-256 over a canonical JSON encoding of everything that
    /// identifies the logical request. Stable across processes.
    pub fn key(&self, backend_id: &str) -> String {
        let material = KeyMaterial {
            backend: backend_id,
            model: &self.params.model,
            messages: &self.messages,
            temperature: self.params.temperature,
            top_p: self.params.top_p,
            max_tokens: self.params.max_tokens,
            path_index: self.path_index,
            sample: &self.sample_label,
        };
        let bytes = serde_json::to_vec(&material).expect("key material serializes");
        hex::encode(Sha256::digest(bytes))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub total_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BackendReply {
    pub text: String,
    pub usage: Option<Usage>,
}

impl BackendReply {
    pub fn text(text: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            usage: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRecord {
    pub request_key: String,
    pub backend: String,
    pub model: String,
    pub question_id: String,
    pub stage: StageKind,
    pub path_index: u32,
    pub sample_label: String,
    pub raw_text: String,
    pub created_at: DateTime<Utc>,
    #[serde(default)]
    pub latency_ms: Option<u64>,
    #[serde(default)]
    pub usage: Option<Usage>,
}

/// Anything that can answer a chat-completion request. Implementations
/// return text or a typed error, never both.
#[async_trait]
pub trait Backend: Send + Sync {
    fn id(&self) -> &str;

    async fn complete(&self, request: &CompletionRequest) -> Result<BackendReply, GatewayError>;
}

#[derive(Debug, Clone)]
pub struct Completion {
    pub record: CompletionRecord,
    pub cached: bool,
}

/// Wraps a backend with the cache and a bound on concurrent requests.
pub struct Gateway {
    backend: Arc<dyn Backend>,
    cache: Option<Arc<CompletionCache>>,
    limiter: Semaphore,
    backend_calls: AtomicUsize,
}

impl Gateway {
    pub fn new(backend: Arc<dyn Backend>, parallelism: usize) -> Self {
        Self {
            backend,
            cache: None,
            limiter: Semaphore::new(parallelism.max(1)),
            backend_calls: AtomicUsize::new(0),
        }
    }

    pub fn with_cache(mut self, cache: Arc<CompletionCache>) -> Self {
        self.cache = Some(cache);
        self
    }

    pub fn backend_id(&self) -> &str {
        self.backend.id()
    }

    /// Requests that reached the backend (cache hits excluded).
    pub fn backend_calls(&self) -> usize {
        self.backend_calls.load(Ordering::SeqCst)
    }

    pub async fn complete(&self, request: &CompletionRequest) -> Result<Completion, GatewayError> {
        let key = request.key(self.backend.id());
        if let Some(cache) = &self.cache {
            if let Some(record) = cache.get(&key) {
                return Ok(Completion {
                    record,
                    cached: true,
                });
            }
        }

        let started = Instant::now();
        let reply = {
            let _permit = self
                .limiter
                .acquire()
                .await
                .map_err(|e| GatewayError::Config(e.to_string()))?;
            self.backend_calls.fetch_add(1, Ordering::SeqCst);
            self.backend.complete(request).await?
        };
        if reply.text.trim().is_empty() {
            return Err(GatewayError::EmptyCompletion);
        }
        let record = CompletionRecord {
            request_key: key,
            backend: self.backend.id().to_string(),
            model: request.params.model.clone(),
            question_id: request.question_id.clone(),
            stage: request.stage,
            path_index: request.path_index,
            sample_label: request.sample_label.clone(),
            raw_text: reply.text,
            created_at: Utc::now(),
            latency_ms: Some(started.elapsed().as_millis() as u64),
            usage: reply.usage,
        };
        if let Some(cache) = &self.cache {
            cache.put(&record)?;
        }
        Ok(Completion {
            record,
            cached: false,
        })
    }
}
