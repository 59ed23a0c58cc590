//! The real reqwest transport against a local chat-completions server.

mod common;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use axum::extract::State;
use axum::http::{HeaderMap, StatusCode};
use axum::routing::post;
use axum::{Json, Router};
use serde_json::{json, Value};

use screening_core::llm::{
    mock_complete, BackendError, ChatRequest, HttpChatBackend, LlmBackend, RequestTag,
    ReqwestTransport,
};
use screening_core::runtime::{Pipeline, RunStore, StageBackendSet};
use screening_core::{BackendConfig, SharedBackend};

#[derive(Default)]
struct Fake {
    calls: AtomicUsize,
    /// Answer 429 to this many initial calls.
    throttle_first: usize,
    auth: Mutex<Vec<String>>,
}

/// Recovers the request tag from prompt text so the mock can answer.
fn infer_tag(user: &str) -> RequestTag {
    if user.contains("Select exactly") {
        RequestTag::Decide
    } else if user.contains(screening_core::assess::RESUME_BEGIN) {
        RequestTag::Assess
    } else {
        RequestTag::Classify
    }
}

async fn completions(
    State(fake): State<Arc<Fake>>,
    headers: HeaderMap,
    Json(body): Json<Value>,
) -> (StatusCode, Json<Value>) {
    let n = fake.calls.fetch_add(1, Ordering::SeqCst);
    if let Some(v) = headers.get("authorization").and_then(|v| v.to_str().ok()) {
        fake.auth.lock().unwrap().push(v.to_string());
    }
    if n < fake.throttle_first {
        return (
            StatusCode::TOO_MANY_REQUESTS,
            Json(json!({ "error": "slow down" })),
        );
    }
    let messages = body["messages"].as_array().cloned().unwrap_or_default();
    let user = messages
        .iter()
        .rev()
        .find(|m| m["role"] == "user")
        .and_then(|m| m["content"].as_str())
        .unwrap_or_default()
        .to_string();
    let system = messages
        .iter()
        .find(|m| m["role"] == "system")
        .and_then(|m| m["content"].as_str())
        .unwrap_or_default()
        .to_string();
    let reply = mock_complete(&ChatRequest::new(infer_tag(&user), system, user));
    (
        StatusCode::OK,
        Json(json!({
            "choices": [{ "message": { "role": "assistant", "content": reply.text } }],
            "usage": { "prompt_tokens": 10, "completion_tokens": 5 },
        })),
    )
}

async fn start(fake: Arc<Fake>) -> String {
    let app = Router::new()
        .route("/v1/chat/completions", post(completions))
        .with_state(fake);
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });
    format!("http://{addr}/v1")
}

fn http_cfg(base_url: String) -> BackendConfig {
    let mut cfg = BackendConfig {
        kind: screening_core::llm::BackendKind::HttpChat,
        base_url,
        model_name: "fake-model".into(),
        max_in_flight: 4,
        ..BackendConfig::default()
    };
    cfg.retry.base_backoff_ms = 1;
    cfg
}

#[tokio::test]
async fn retries_rate_limit_then_succeeds() {
    let fake = Arc::new(Fake {
        throttle_first: 2,
        ..Fake::default()
    });
    let url = start(fake.clone()).await;
    let backend = HttpChatBackend::with_transport(
        ReqwestTransport::new(),
        &http_cfg(url),
        Some("sk-test".into()),
    );
    let req = ChatRequest::new(RequestTag::Classify, "", "Skills: Rust, SQL");
    let resp = backend.complete(&req).await.unwrap();
    assert_eq!(resp.attempts, 3);
    assert_eq!(resp.text, mock_complete(&req).text);
    assert_eq!(
        resp.token_usage.map(|u| (u.prompt, u.completion)),
        Some((10, 5))
    );
    assert!(fake
        .auth
        .lock()
        .unwrap()
        .iter()
        .all(|a| a == "Bearer sk-test"));
}

#[tokio::test]
async fn unreachable_server_exhausts_retries() {
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1", listener.local_addr().unwrap());
    drop(listener);
    let mut cfg = http_cfg(url);
    cfg.retry.max_attempts = 2;
    let backend = HttpChatBackend::with_transport(ReqwestTransport::new(), &cfg, None);
    let err = backend
        .complete(&ChatRequest::new(RequestTag::Classify, "", "hello"))
        .await
        .unwrap_err();
    assert!(
        matches!(&err, BackendError::RetriesExhausted { attempts: 2, last } if last.starts_with("connect")),
        "{err}"
    );
}

#[tokio::test]
async fn pipeline_over_http_matches_mock() {
    let fake = Arc::new(Fake::default());
    let url = start(fake.clone()).await;
    let http: SharedBackend = Arc::new(HttpChatBackend::with_transport(
        ReqwestTransport::new(),
        &http_cfg(url),
        Some("sk-test".into()),
    ));
    let mock: SharedBackend = Arc::new(screening_core::MockBackend::new());

    let dir = tempfile::tempdir().unwrap();
    let store = RunStore::new(dir.path());
    let cfg = common::fixture_config(dir.path());
    let over_http = Pipeline::with_backends(cfg.clone(), StageBackendSet::uniform(http))
        .unwrap()
        .run(&store)
        .await
        .unwrap();
    let local = Pipeline::with_backends(cfg, StageBackendSet::uniform(mock))
        .unwrap()
        .run(&store)
        .await
        .unwrap();

    assert_eq!(over_http.status, "ok");
    assert!(fake.calls.load(Ordering::SeqCst) > 20);
    assert_eq!(over_http.shortlist, local.shortlist);
    assert_eq!(
        over_http.decisions[0].selected_ids,
        local.decisions[0].selected_ids
    );
}
