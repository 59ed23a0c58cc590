#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use serde_json::Value;
use tower::ServiceExt;

use screening_api::{router, AppState};
use screening_core::runtime::{RunConfig, RunStore, StageBackendSet};
use screening_core::{MockBackend, SharedBackend};

pub const TOKEN: &str = "test-token";

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn fixture_config(store: &Path) -> RunConfig {
    RunConfig {
        corpus: fixtures().join("resumes"),
        store_root: store.to_path_buf(),
        ..RunConfig::default()
    }
}

pub fn mock_app(store: &Path, base: RunConfig) -> Router {
    let backend: SharedBackend = Arc::new(MockBackend::new());
    let state = AppState::new(RunStore::new(store), TOKEN, base)
        .with_backends(StageBackendSet::uniform(backend));
    router(state)
}

pub async fn call(
    app: &Router,
    method: Method,
    uri: &str,
    body: Option<Value>,
) -> (StatusCode, Value) {
    call_with(app, method, uri, body, Some(TOKEN), None).await
}

pub async fn call_with(
    app: &Router,
    method: Method,
    uri: &str,
    body: Option<Value>,
    token: Option<&str>,
    idempotency_key: Option<&str>,
) -> (StatusCode, Value) {
    let mut req = Request::builder().method(method).uri(uri);
    if let Some(t) = token {
        req = req.header("authorization", format!("Bearer {t}"));
    }
    if let Some(k) = idempotency_key {
        req = req.header("idempotency-key", k);
    }
    let body = match body {
        Some(v) => {
            req = req.header("content-type", "application/json");
            Body::from(serde_json::to_vec(&v).unwrap())
        }
        None => Body::empty(),
    };
    let resp = app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = resp.status();
    let bytes = axum::body::to_bytes(resp.into_body(), usize::MAX)
        .await
        .unwrap();
    let value = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes)
            .unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into()))
    };
    (status, value)
}

/// Polls until the run leaves `running`; returns the final report.
pub async fn wait_for(app: &Router, run_id: &str) -> Value {
    for _ in 0..600 {
        let (status, body) = call(app, Method::GET, &format!("/runs/{run_id}"), None).await;
        assert_eq!(status, StatusCode::OK, "{body}");
        if body["status"] != "running" {
            return body;
        }
        tokio::time::sleep(Duration::from_millis(50)).await;
    }
    panic!("run {run_id} did not finish");
}

/// Launches a run with the given inline config and waits for it.
pub async fn launch(app: &Router, config: &RunConfig) -> Value {
    let body = serde_json::json!({ "config": config });
    let (status, accepted) = call(app, Method::POST, "/runs", Some(body)).await;
    assert_eq!(status, StatusCode::ACCEPTED, "{accepted}");
    assert_eq!(accepted["status"], "running");
    wait_for(app, accepted["run_id"].as_str().unwrap()).await
}
