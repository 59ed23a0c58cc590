use std::time::{Duration, Instant};

use async_trait::async_trait;
use rand::Rng;
use serde_json::{json, Value};
use tokio::sync::Semaphore;
use tracing::warn;

use super::{
    BackendConfig, BackendError, ChatRequest, ChatResponse, LlmBackend, RetryConfig, TokenUsage,
    BASE_URL_ENV,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpReply {
    pub status: u16,
    pub body: String,
}

/// Failures below the HTTP layer. All of them are retryable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TransportFailure {
    Timeout(String),
    Connect(String),
    Other(String),
}

impl std::fmt::Display for TransportFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TransportFailure::Timeout(m) => write!(f, "timeout: {m}"),
            TransportFailure::Connect(m) => write!(f, "connect: {m}"),
            TransportFailure::Other(m) => write!(f, "transport: {m}"),
        }
    }
}

#[async_trait]
pub trait Transport: Send + Sync {
    async fn post_json(
        &self,
        url: &str,
        bearer: Option<&str>,
        body: &Value,
        timeout: Duration,
    ) -> Result<HttpReply, TransportFailure>;
}

#[derive(Debug, Clone, Default)]
pub struct ReqwestTransport {
    client: reqwest::Client,
}

impl ReqwestTransport {
    pub fn new() -> Self {
        Self::default()
    }
}

#[async_trait]
impl Transport for ReqwestTransport {
    async fn post_json(
        &self,
        url: &str,
        bearer: Option<&str>,
        body: &Value,
        timeout: Duration,
    ) -> Result<HttpReply, TransportFailure> {
        let mut builder = self.client.post(url).json(body).timeout(timeout);
        if let Some(token) = bearer {
            builder = builder.bearer_auth(token);
        }
        let response = builder.send().await.map_err(|e| {
            if e.is_timeout() {
                TransportFailure::Timeout(e.to_string())
            } else if e.is_connect() {
                TransportFailure::Connect(e.to_string())
            } else {
                TransportFailure::Other(e.to_string())
            }
        })?;
        let status = response.status().as_u16();
        let body = response
            .text()
            .await
            .map_err(|e| TransportFailure::Other(e.to_string()))?;
        Ok(HttpReply { status, body })
    }
}

/// Full-jitter exponential backoff: uniform in `[0, base * 2^attempt]`.
pub fn backoff_delay<R: Rng + ?Sized>(attempt: u32, base_ms: u64, rng: &mut R) -> Duration {
    let cap = base_ms.saturating_mul(1u64.checked_shl(attempt).unwrap_or(u64::MAX));
    Duration::from_millis(rng.random_range(0..=cap))
}

fn is_retryable_status(status: u16) -> bool {
    status == 408 || status == 429 || (500..600).contains(&status)
}

/// Client for `POST {base_url}/chat/completions` style services.
pub struct HttpChatBackend<T = ReqwestTransport> {
    transport: T,
    endpoint: String,
    model_name: String,
    api_key: Option<String>,
    retry: RetryConfig,
    timeout: Duration,
    max_in_flight: usize,
    limiter: Semaphore,
}

impl HttpChatBackend<ReqwestTransport> {
    /// Reads the API key from the configured environment variable and the
    /// optional base URL override from `SCREEN_LLM_BASE_URL`.
    pub fn from_config(cfg: &BackendConfig) -> Result<Self> {
        let api_key = std::env::var(&cfg.api_key_env).map_err(|_| {
            Error::Config(format!(
                "environment variable {} holding the API key is not set",
                cfg.api_key_env
            ))
        })?;
        let mut cfg = cfg.clone();
        if let Ok(url) = std::env::var(BASE_URL_ENV) {
            cfg.base_url = url;
        }
        Ok(Self::with_transport(
            ReqwestTransport::new(),
            &cfg,
            Some(api_key),
        ))
    }
}

impl<T: Transport> HttpChatBackend<T> {
    pub fn with_transport(transport: T, cfg: &BackendConfig, api_key: Option<String>) -> Self {
        Self {
            transport,
            endpoint: format!("{}/chat/completions", cfg.base_url.trim_end_matches('/')),
            model_name: cfg.model_name.clone(),
            api_key,
            retry: cfg.retry.clone(),
            timeout: Duration::from_millis(cfg.timeout_ms),
            max_in_flight: cfg.max_in_flight.max(1),
            limiter: Semaphore::new(cfg.max_in_flight.max(1)),
        }
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    fn body(&self, req: &ChatRequest) -> Value {
        let mut messages = Vec::new();
        if !req.system_text.is_empty() {
            messages.push(json!({"role": "system", "content": req.system_text}));
        }
        messages.push(json!({"role": "user", "content": req.user_text}));
        let mut body = json!({
            "model": self.model_name,
            "messages": messages,
            "max_tokens": req.max_new_tokens,
        });
        if !req.stop_sequences.is_empty() {
            body["stop"] = json!(req.stop_sequences);
        }
        if !req.sampling {
            body["temperature"] = json!(0);
        }
        body
    }
}

fn parse_reply(body: &str) -> Result<(String, Option<TokenUsage>), BackendError> {
    let value: Value =
        serde_json::from_str(body).map_err(|e| BackendError::Protocol(e.to_string()))?;
    let text = value
        .pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .ok_or_else(|| BackendError::Protocol("missing choices[0].message.content".into()))?
        .to_string();
    let usage = value.get("usage").and_then(|u| {
        Some(TokenUsage {
            prompt: u.get("prompt_tokens")?.as_u64()? as u32,
            completion: u.get("completion_tokens")?.as_u64()? as u32,
        })
    });
    Ok((text, usage))
}

#[async_trait]
impl<T: Transport> LlmBackend for HttpChatBackend<T> {
    fn name(&self) -> &str {
        "http_chat"
    }

    fn model_name(&self) -> &str {
        &self.model_name
    }

    fn max_in_flight(&self) -> usize {
        self.max_in_flight
    }

    async fn complete(&self, req: &ChatRequest) -> Result<ChatResponse, BackendError> {
        req.validate()?;
        let _permit = self
            .limiter
            .acquire()
            .await
            .map_err(|_| BackendError::Config("rate limiter closed".into()))?;
        let body = self.body(req);
        let started = Instant::now();
        let mut last = String::new();

        for attempt in 0..self.retry.max_attempts {
            if attempt > 0 {
                let delay =
                    backoff_delay(attempt - 1, self.retry.base_backoff_ms, &mut rand::rng());
                tokio::time::sleep(delay).await;
            }
            match self
                .transport
                .post_json(&self.endpoint, self.api_key.as_deref(), &body, self.timeout)
                .await
            {
                Ok(reply) if (200..300).contains(&reply.status) => {
                    let (text, token_usage) = parse_reply(&reply.body)?;
                    return Ok(ChatResponse {
                        text,
                        latency_ms: started.elapsed().as_millis() as u64,
                        token_usage,
                        backend_name: self.model_name.clone(),
                        attempts: attempt + 1,
                        cached: false,
                    });
                }
                Ok(reply) if is_retryable_status(reply.status) => {
                    warn!(status = reply.status, attempt, "retryable backend status");
                    last = format!("status {}: {}", reply.status, reply.body);
                }
                Ok(reply) => {
                    return Err(BackendError::Fatal {
                        status: reply.status,
                        body: reply.body,
                    });
                }
                Err(failure) => {
                    warn!(%failure, attempt, "transport failure");
                    last = failure.to_string();
                }
            }
        }
        Err(BackendError::RetriesExhausted {
            attempts: self.retry.max_attempts,
            last,
        })
    }
}

#[cfg(test)]
mod tests {
    use std::collections::VecDeque;
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::{Arc, Mutex};

    use proptest::prelude::*;
    use rand::SeedableRng;

    use super::*;
    use crate::llm::RequestTag;

    /// Replays scripted replies; counts calls and the peak number in flight.
    #[derive(Default)]
    struct ScriptedTransport {
        script: Mutex<VecDeque<Result<HttpReply, TransportFailure>>>,
        calls: AtomicUsize,
        in_flight: AtomicUsize,
        peak: AtomicUsize,
        bodies: Mutex<Vec<Value>>,
    }

    impl ScriptedTransport {
        fn new(script: Vec<Result<HttpReply, TransportFailure>>) -> Arc<Self> {
            Arc::new(Self {
                script: Mutex::new(script.into()),
                ..Default::default()
            })
        }
    }

    fn ok_reply(text: &str) -> Result<HttpReply, TransportFailure> {
        Ok(HttpReply {
            status: 200,
            body: json!({
                "choices": [{"message": {"role": "assistant", "content": text}}],
                "usage": {"prompt_tokens": 7, "completion_tokens": 3}
            })
            .to_string(),
        })
    }

    fn status(code: u16) -> Result<HttpReply, TransportFailure> {
        Ok(HttpReply {
            status: code,
            body: "err".into(),
        })
    }

    #[async_trait]
    impl Transport for Arc<ScriptedTransport> {
        async fn post_json(
            &self,
            _url: &str,
            _bearer: Option<&str>,
            body: &Value,
            _timeout: Duration,
        ) -> Result<HttpReply, TransportFailure> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            let now = self.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
            self.peak.fetch_max(now, Ordering::SeqCst);
            self.bodies.lock().unwrap().push(body.clone());
            tokio::time::sleep(Duration::from_millis(5)).await;
            self.in_flight.fetch_sub(1, Ordering::SeqCst);
            self.script
                .lock()
                .unwrap()
                .pop_front()
                .unwrap_or_else(|| ok_reply("default"))
        }
    }

    fn cfg(max_in_flight: usize, max_attempts: u32) -> BackendConfig {
        BackendConfig {
            kind: super::super::BackendKind::HttpChat,
            base_url: "http://fake/v1/".into(),
            model_name: "test-model".into(),
            max_in_flight,
            retry: RetryConfig {
                max_attempts,
                base_backoff_ms: 1,
            },
            ..BackendConfig::default()
        }
    }

    fn req() -> ChatRequest {
        ChatRequest::new(RequestTag::Assess, "sys", "user")
    }

    #[tokio::test]
    async fn fatal_status_is_not_retried() {
        let t = ScriptedTransport::new(vec![status(401)]);
        let b = HttpChatBackend::with_transport(t.clone(), &cfg(1, 4), Some("k".into()));
        let err = b.complete(&req()).await.unwrap_err();
        assert_eq!(
            err,
            BackendError::Fatal {
                status: 401,
                body: "err".into()
            }
        );
        assert_eq!(t.calls.load(Ordering::SeqCst), 1);
    }

    #[tokio::test]
    async fn rate_limited_then_ok() {
        let t = ScriptedTransport::new(vec![status(429), ok_reply("fine")]);
        let b = HttpChatBackend::with_transport(t.clone(), &cfg(1, 4), Some("k".into()));
        let resp = b.complete(&req()).await.unwrap();
        assert_eq!(resp.text, "fine");
        assert_eq!(resp.attempts, 2);
        assert_eq!(
            resp.token_usage,
            Some(TokenUsage {
                prompt: 7,
                completion: 3
            })
        );
    }

    #[tokio::test]
    async fn retries_exhaust() {
        let t = ScriptedTransport::new(vec![
            status(503),
            Err(TransportFailure::Timeout("slow".into())),
            status(500),
        ]);
        let b = HttpChatBackend::with_transport(t.clone(), &cfg(1, 3), None);
        let err = b.complete(&req()).await.unwrap_err();
        assert!(matches!(
            err,
            BackendError::RetriesExhausted { attempts: 3, .. }
        ));
        assert_eq!(t.calls.load(Ordering::SeqCst), 3);
    }

    #[tokio::test]
    async fn bad_request_is_fatal() {
        let t = ScriptedTransport::new(vec![status(400)]);
        let b = HttpChatBackend::with_transport(t.clone(), &cfg(1, 3), None);
        assert!(matches!(
            b.complete(&req()).await,
            Err(BackendError::Fatal { status: 400, .. })
        ));
    }

    #[tokio::test]
    async fn malformed_body_is_protocol_error() {
        let t = ScriptedTransport::new(vec![Ok(HttpReply {
            status: 200,
            body: "{}".into(),
        })]);
        let b = HttpChatBackend::with_transport(t, &cfg(1, 3), None);
        assert!(matches!(
            b.complete(&req()).await,
            Err(BackendError::Protocol(_))
        ));
    }

    #[tokio::test]
    async fn wire_body_shape() {
        let t = ScriptedTransport::new(vec![]);
        let b = HttpChatBackend::with_transport(t.clone(), &cfg(1, 1), None);
        assert_eq!(b.endpoint(), "http://fake/v1/chat/completions");
        let mut r = req();
        r.sampling = false;
        r.stop_sequences = vec!["\n\n".into()];
        b.complete(&r).await.unwrap();
        let body = t.bodies.lock().unwrap()[0].clone();
        assert_eq!(
            body,
            json!({
                "model": "test-model",
                "messages": [
                    {"role": "system", "content": "sys"},
                    {"role": "user", "content": "user"}
                ],
                "max_tokens": 200,
                "stop": ["\n\n"],
                "temperature": 0
            })
        );
    }

    #[tokio::test(flavor = "multi_thread", worker_threads = 4)]
    async fn in_flight_never_exceeds_limit() {
        let t = ScriptedTransport::new(vec![]);
        let b = Arc::new(HttpChatBackend::with_transport(t.clone(), &cfg(3, 1), None));
        let tasks: Vec<_> = (0..24)
            .map(|_| {
                let b = b.clone();
                tokio::spawn(async move { b.complete(&req()).await })
            })
            .collect();
        for task in tasks {
            task.await.unwrap().unwrap();
        }
        assert_eq!(t.calls.load(Ordering::SeqCst), 24);
        let peak = t.peak.load(Ordering::SeqCst);
        assert!(peak <= 3, "peak in flight {peak}");
    }

    proptest! {
        #[test]
        fn backoff_bounded_by_schedule(attempt in 0u32..16, base in 0u64..2_000, seed: u64) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let d = backoff_delay(attempt, base, &mut rng);
            prop_assert!(d.as_millis() as u64 <= base * (1u64 << attempt));
        }
    }
}
