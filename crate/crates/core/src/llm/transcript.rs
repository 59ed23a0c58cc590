use std::sync::{Arc, Mutex};

use async_trait::async_trait;
use serde::{Deserialize, Serialize};

use super::{
    request_hash, BackendError, ChatRequest, ChatResponse, LlmBackend, RequestTag, SharedBackend,
};

/// One line of the transcript log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub tag: RequestTag,
    pub request_hash: String,
    pub cached: bool,
    pub latency_ms: u64,
    pub backend: String,
}

/// Full prompt and answer, kept for audit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptRecord {
    pub tag: RequestTag,
    pub request_hash: String,
    pub system: String,
    pub user: String,
    pub response: Option<String>,
}

#[derive(Debug, Clone, Default)]
pub struct Transcript {
    inner: Arc<Mutex<(Vec<TranscriptEntry>, Vec<PromptRecord>)>>,
}

impl Transcript {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn entries(&self) -> Vec<TranscriptEntry> {
        self.inner.lock().expect("transcript lock").0.clone()
    }

    pub fn prompts(&self) -> Vec<PromptRecord> {
        self.inner.lock().expect("transcript lock").1.clone()
    }

    fn push(&self, entry: Option<TranscriptEntry>, prompt: PromptRecord) {
        let mut guard = self.inner.lock().expect("transcript lock");
        if let Some(entry) = entry {
            guard.0.push(entry);
        }
        guard.1.push(prompt);
    }
}

/// Wraps a backend and records every request into a [`Transcript`].
pub struct RecordingBackend {
    inner: SharedBackend,
    transcript: Transcript,
}

impl RecordingBackend {
    pub fn new(inner: SharedBackend, transcript: Transcript) -> Self {
        Self { inner, transcript }
    }
}

#[async_trait]
impl LlmBackend for RecordingBackend {
    fn name(&self) -> &str {
        self.inner.name()
    }

    fn model_name(&self) -> &str {
        self.inner.model_name()
    }

    fn max_in_flight(&self) -> usize {
        self.inner.max_in_flight()
    }

    fn cacheable(&self) -> bool {
        self.inner.cacheable()
    }

    async fn complete(&self, req: &ChatRequest) -> Result<ChatResponse, BackendError> {
        let hash = request_hash(self.inner.name(), self.inner.model_name(), req);
        let result = self.inner.complete(req).await;
        let entry = result.as_ref().ok().map(|resp| TranscriptEntry {
            tag: req.request_tag,
            request_hash: hash.clone(),
            cached: resp.cached,
            latency_ms: resp.latency_ms,
            backend: resp.backend_name.clone(),
        });
        self.transcript.push(
            entry,
            PromptRecord {
                tag: req.request_tag,
                request_hash: hash,
                system: req.system_text.clone(),
                user: req.user_text.clone(),
                response: result.as_ref().ok().map(|r| r.text.clone()),
            },
        );
        result
    }
}
