//! Chat-completion backends: a remote HTTP client, a deterministic mock,
//! a response cache and a transcript recorder. All share [`LlmBackend`].

mod cache;
mod http;
mod mock;
mod transcript;

use std::path::PathBuf;
use std::sync::Arc;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use cache::CachedBackend;
pub use http::{
    backoff_delay, HttpChatBackend, HttpReply, ReqwestTransport, Transport, TransportFailure,
};
pub use mock::{mock_complete, stable_hash, MockBackend};
pub use transcript::{PromptRecord, RecordingBackend, Transcript, TranscriptEntry};

use crate::error::{Error, Result};

pub const DEFAULT_MAX_NEW_TOKENS: u32 = 200;
pub const API_KEY_ENV: &str = "SCREEN_LLM_API_KEY";
pub const BASE_URL_ENV: &str = "SCREEN_LLM_BASE_URL";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RequestTag {
    Classify,
    Assess,
    Decide,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub system_text: String,
    pub user_text: String,
    pub max_new_tokens: u32,
    pub sampling: bool,
    pub stop_sequences: Vec<String>,
    pub request_tag: RequestTag,
}

impl ChatRequest {
    pub fn new(
        tag: RequestTag,
        system_text: impl Into<String>,
        user_text: impl Into<String>,
    ) -> Self {
        Self {
            system_text: system_text.into(),
            user_text: user_text.into(),
            max_new_tokens: DEFAULT_MAX_NEW_TOKENS,
            sampling: true,
            stop_sequences: Vec::new(),
            request_tag: tag,
        }
    }

    pub fn with_generation(mut self, params: &GenerationParams) -> Self {
        self.max_new_tokens = params.max_new_tokens;
        self.sampling = params.sampling;
        self
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        if self.max_new_tokens == 0 {
            return Err(BackendError::InvalidRequest(
                "max_new_tokens must be >= 1".into(),
            ));
        }
        if self.user_text.trim().is_empty() {
            return Err(BackendError::InvalidRequest("user_text is empty".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationParams {
    pub max_new_tokens: u32,
    pub sampling: bool,
}

impl Default for GenerationParams {
    fn default() -> Self {
        Self {
            max_new_tokens: DEFAULT_MAX_NEW_TOKENS,
            sampling: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub prompt: u32,
    pub completion: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub text: String,
    pub latency_ms: u64,
    #[serde(default)]
    pub token_usage: Option<TokenUsage>,
    pub backend_name: String,
    /// Number of transport attempts it took to get this response.
    #[serde(default = "one")]
    pub attempts: u32,
    #[serde(default)]
    pub cached: bool,
}

fn one() -> u32 {
    1
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum BackendError {
    #[error("retryable transport failure: {0}")]
    Retryable(String),
    #[error("backend returned fatal status {status}: {body}")]
    Fatal { status: u16, body: String },
    #[error("retries exhausted after {attempts} attempts: {last}")]
    RetriesExhausted { attempts: u32, last: String },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("malformed backend response: {0}")]
    Protocol(String),
    #[error("backend misconfigured: {0}")]
    Config(String),
}

impl BackendError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, BackendError::Retryable(_))
    }
}

#[async_trait]
pub trait LlmBackend: Send + Sync {
    fn name(&self) -> &str;

    fn model_name(&self) -> &str {
        self.name()
    }

    /// Upper bound on concurrent requests callers should issue.
    fn max_in_flight(&self) -> usize {
        1
    }

    /// Deterministic local backends opt out of the response cache.
    fn cacheable(&self) -> bool {
        true
    }

    async fn complete(&self, req: &ChatRequest) -> Result<ChatResponse, BackendError>;
}

pub type SharedBackend = Arc<dyn LlmBackend>;

/// Stable hash of everything that determines a backend answer.
pub fn request_hash(backend_name: &str, model_name: &str, req: &ChatRequest) -> String {
    let mut hasher = Sha256::new();
    hasher.update(backend_name.as_bytes());
    hasher.update([0]);
    hasher.update(model_name.as_bytes());
    hasher.update([0]);
    hasher.update(serde_json::to_vec(req).expect("request serializes"));
    hex::encode(hasher.finalize())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    HttpChat,
    #[default]
    Mock,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryConfig {
    /// Total attempts including the first.
    pub max_attempts: u32,
    pub base_backoff_ms: u64,
}

impl Default for RetryConfig {
    fn default() -> Self {
        Self {
            max_attempts: 4,
            base_backoff_ms: 500,
        }
    }
}

/// Backend configuration. The API key itself is never stored here, only the
/// name of the environment variable holding it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct BackendConfig {
    pub kind: BackendKind,
    pub base_url: String,
    pub model_name: String,
    pub api_key_env: String,
    pub max_in_flight: usize,
    pub retry: RetryConfig,
    pub cache_dir: Option<PathBuf>,
    pub timeout_ms: u64,
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self {
            kind: BackendKind::Mock,
            base_url: "http://localhost:8000/v1".to_string(),
            model_name: "mock".to_string(),
            api_key_env: API_KEY_ENV.to_string(),
            max_in_flight: 4,
            retry: RetryConfig::default(),
            cache_dir: None,
            timeout_ms: 120_000,
        }
    }
}

impl BackendConfig {
    pub fn mock() -> Self {
        Self::default()
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_in_flight == 0 {
            return Err(Error::Config("backend.max_in_flight must be >= 1".into()));
        }
        if self.retry.max_attempts == 0 {
            return Err(Error::Config(
                "backend.retry.max_attempts must be >= 1".into(),
            ));
        }
        if self.kind == BackendKind::HttpChat && self.model_name.trim().is_empty() {
            return Err(Error::Config(
                "backend.model_name is required for http_chat".into(),
            ));
        }
        Ok(())
    }
}

/// Builds the backend described by `cfg`, wrapping it in the response cache
/// when `cache_dir` is set.
pub fn build_backend(cfg: &BackendConfig) -> Result<SharedBackend> {
    cfg.validate()?;
    match cfg.kind {
        BackendKind::Mock => Ok(Arc::new(MockBackend::new())),
        BackendKind::HttpChat => {
            let backend = HttpChatBackend::from_config(cfg)?;
            match &cfg.cache_dir {
                Some(dir) => Ok(Arc::new(CachedBackend::new(Arc::new(backend), dir)?)),
                None => Ok(Arc::new(backend)),
            }
        }
    }
}
