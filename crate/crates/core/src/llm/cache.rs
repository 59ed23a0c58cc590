use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use async_trait::async_trait;
use tracing::warn;

use super::{request_hash, BackendError, ChatRequest, ChatResponse, LlmBackend, SharedBackend};
use crate::error::{Error, Result};

/// On-disk response cache keyed by [`request_hash`]. One JSON file per key,
/// written via rename so concurrent writers never expose partial files.
pub struct CachedBackend {
    inner: SharedBackend,
    dir: PathBuf,
}

impl CachedBackend {
    pub fn new(inner: SharedBackend, dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(Self { inner, dir })
    }

    fn entry_path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    fn lookup(&self, path: &Path) -> Option<ChatResponse> {
        let bytes = fs::read(path).ok()?;
        match serde_json::from_slice::<ChatResponse>(&bytes) {
            Ok(resp) => Some(resp),
            Err(e) => {
                warn!(path = %path.display(), error = %e, "corrupt cache entry, recomputing");
                None
            }
        }
    }

    fn store(&self, path: &Path, resp: &ChatResponse) {
        let tmp = path.with_extension(format!("tmp{}", std::process::id()));
        let written = serde_json::to_vec(resp)
            .map_err(std::io::Error::other)
            .and_then(|bytes| fs::write(&tmp, bytes))
            .and_then(|_| fs::rename(&tmp, path));
        if let Err(e) = written {
            warn!(path = %path.display(), error = %e, "failed to write cache entry");
        }
    }
}

#[async_trait]
impl LlmBackend for CachedBackend {
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
        if !self.inner.cacheable() {
            return self.inner.complete(req).await;
        }
        let started = Instant::now();
        let key = request_hash(self.inner.name(), self.inner.model_name(), req);
        let path = self.entry_path(&key);
        if let Some(mut hit) = self.lookup(&path) {
            hit.cached = true;
            hit.latency_ms = started.elapsed().as_millis() as u64;
            return Ok(hit);
        }
        let resp = self.inner.complete(req).await?;
        self.store(&path, &resp);
        Ok(resp)
    }
}

#[cfg(test)]
mod tests {
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;

    use super::*;
    use crate::llm::{MockBackend, RequestTag};

    struct Counting {
        calls: AtomicUsize,
    }

    #[async_trait]
    impl LlmBackend for Counting {
        fn name(&self) -> &str {
            "counting"
        }
        async fn complete(&self, req: &ChatRequest) -> Result<ChatResponse, BackendError> {
            let n = self.calls.fetch_add(1, Ordering::SeqCst);
            Ok(ChatResponse {
                text: format!("answer {n} to {}", req.user_text),
                latency_ms: 5,
                token_usage: None,
                backend_name: "counting".into(),
                attempts: 1,
                cached: false,
            })
        }
    }

    #[tokio::test]
    async fn second_call_hits_cache() {
        let dir = tempfile::tempdir().unwrap();
        let inner = Arc::new(Counting {
            calls: AtomicUsize::new(0),
        });
        let cache = CachedBackend::new(inner.clone(), dir.path()).unwrap();
        let req = ChatRequest::new(RequestTag::Assess, "s", "u");

        let first = cache.complete(&req).await.unwrap();
        let second = cache.complete(&req).await.unwrap();
        assert!(!first.cached);
        assert!(second.cached);
        assert_eq!(first.text, second.text);
        assert_eq!(inner.calls.load(Ordering::SeqCst), 1);

        let mut changed = req.clone();
        changed.max_new_tokens = 100;
        let third = cache.complete(&changed).await.unwrap();
        assert!(!third.cached);
        assert_eq!(inner.calls.load(Ordering::SeqCst), 2);
    }

    #[tokio::test]
    async fn corrupt_entry_is_recomputed_and_overwritten() {
        let dir = tempfile::tempdir().unwrap();
        let inner = Arc::new(Counting {
            calls: AtomicUsize::new(0),
        });
        let cache = CachedBackend::new(inner.clone(), dir.path()).unwrap();
        let req = ChatRequest::new(RequestTag::Decide, "s", "u");
        cache.complete(&req).await.unwrap();

        let key = request_hash("counting", "counting", &req);
        let path = dir.path().join(format!("{key}.json"));
        fs::write(&path, b"{not json").unwrap();

        let resp = cache.complete(&req).await.unwrap();
        assert!(!resp.cached);
        assert_eq!(inner.calls.load(Ordering::SeqCst), 2);
        let stored: ChatResponse = serde_json::from_slice(&fs::read(&path).unwrap()).unwrap();
        assert_eq!(stored.text, resp.text);
    }

    #[tokio::test]
    async fn mock_is_passed_through() {
        let dir = tempfile::tempdir().unwrap();
        let cache = CachedBackend::new(Arc::new(MockBackend::new()), dir.path()).unwrap();
        let req = ChatRequest::new(RequestTag::Classify, "", "Java, Python, SQL\nAnswer:");
        let a = cache.complete(&req).await.unwrap();
        let b = cache.complete(&req).await.unwrap();
        assert!(!a.cached && !b.cached);
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
    }
}
