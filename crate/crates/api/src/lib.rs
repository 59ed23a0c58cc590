//! HTTP service over the run store. Runs are launched in the background and
//! polled; decisions are appended to finished runs.

mod error;

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{Path, Query, Request, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::net::TcpListener;
use tracing::{info, warn};

use screening_core::decide::record_manual_decision;
use screening_core::runtime::{auto_decide_run, Pipeline, StageBackendSet, STATUS_RUNNING};
use screening_core::{DecisionCriteria, Error, RunConfig, RunStore};

pub use error::{ApiError, ErrorBody};

pub const TOKEN_ENV: &str = "SCREEN_API_TOKEN";
pub const IDEMPOTENCY_HEADER: &str = "idempotency-key";

type ApiResult<T> = std::result::Result<T, ApiError>;

#[derive(Debug, Clone)]
enum InFlight {
    Running,
    /// The run died before its report could be written.
    Crashed(String),
}

struct Inner {
    store: RunStore,
    token: String,
    base_config: RunConfig,
    backends: Option<StageBackendSet>,
    in_flight: Mutex<HashMap<String, InFlight>>,
    idempotency: Mutex<HashMap<String, String>>,
}

#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

impl AppState {
    /// `base_config` fills in anything a launch request leaves out. Runs are
    /// always written to `store`, whatever the request says.
    pub fn new(store: RunStore, token: impl Into<String>, base_config: RunConfig) -> Self {
        Self {
            inner: Arc::new(Inner {
                store,
                token: token.into(),
                base_config,
                backends: None,
                in_flight: Mutex::new(HashMap::new()),
                idempotency: Mutex::new(HashMap::new()),
            }),
        }
    }

    /// Reads the bearer token from `SCREEN_API_TOKEN`.
    pub fn from_env(store: RunStore, base_config: RunConfig) -> screening_core::Result<Self> {
        match std::env::var(TOKEN_ENV) {
            Ok(token) if !token.trim().is_empty() => Ok(Self::new(store, token, base_config)),
            _ => Err(Error::Config(format!(
                "{TOKEN_ENV} must be set to serve the API"
            ))),
        }
    }

    /// Uses fixed backends for every run and auto decision instead of the
    /// ones named in the run config.
    pub fn with_backends(self, backends: StageBackendSet) -> Self {
        let inner = Arc::into_inner(self.inner).expect("with_backends called before sharing state");
        Self {
            inner: Arc::new(Inner {
                backends: Some(backends),
                ..inner
            }),
        }
    }

    pub fn store(&self) -> &RunStore {
        &self.inner.store
    }

    fn in_flight(&self, run_id: &str) -> Option<InFlight> {
        self.inner
            .in_flight
            .lock()
            .expect("lock")
            .get(run_id)
            .cloned()
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/runs", post(launch_run).get(list_runs))
        .route("/runs/{id}", get(get_run))
        .route("/runs/{id}/shortlist", get(get_shortlist))
        .route("/runs/{id}/decision", post(post_decision))
        .route("/runs/{id}/decision:auto", post(post_auto_decision))
        .route("/runs/{id}/metrics", get(get_metrics))
        .route("/runs/{id}/timing", get(get_timing))
        .layer(middleware::from_fn_with_state(state.clone(), require_token))
        .with_state(state)
}

pub async fn serve(listener: TcpListener, state: AppState) -> std::io::Result<()> {
    if let Ok(addr) = listener.local_addr() {
        info!(%addr, "screening api listening");
    }
    axum::serve(listener, router(state)).await
}

async fn require_token(State(state): State<AppState>, req: Request, next: Next) -> Response {
    let presented = req
        .headers()
        .get(header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "));
    match presented {
        Some(token) if token == state.inner.token => next.run(req).await,
        _ => ApiError::unauthorized().into_response(),
    }
}

/// Empty bodies decode as `T::default()`.
fn parse_body<T: DeserializeOwned + Default>(body: &Bytes) -> ApiResult<T> {
    if body.iter().all(u8::is_ascii_whitespace) {
        return Ok(T::default());
    }
    serde_json::from_slice(body).map_err(|e| {
        ApiError::field(
            StatusCode::UNPROCESSABLE_ENTITY,
            "malformed request body",
            "body",
            e.to_string(),
        )
    })
}

async fn blocking<T, F>(f: F) -> ApiResult<T>
where
    F: FnOnce() -> screening_core::Result<T> + Send + 'static,
    T: Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
        .map_err(ApiError::from)
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct LaunchRequest {
    /// Full run config; omitted fields take their defaults.
    config: Option<Value>,
    /// Server-side path of a TOML run config.
    config_path: Option<std::path::PathBuf>,
}

#[derive(Debug, Serialize)]
struct RunStatus {
    run_id: String,
    status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    failure: Option<String>,
}

fn launch_config(state: &AppState, req: LaunchRequest) -> ApiResult<RunConfig> {
    let mut cfg = match (req.config, req.config_path) {
        (Some(_), Some(_)) => {
            return Err(ApiError::field(
                StatusCode::UNPROCESSABLE_ENTITY,
                "give either config or config_path",
                "config",
                "both were given",
            ))
        }
        (Some(value), None) => serde_json::from_value(value).map_err(|e| {
            ApiError::field(
                StatusCode::UNPROCESSABLE_ENTITY,
                "invalid run config",
                "config",
                e.to_string(),
            )
        })?,
        (None, Some(path)) => RunConfig::load(&path).map_err(|e| {
            ApiError::field(
                StatusCode::UNPROCESSABLE_ENTITY,
                "invalid run config",
                "config_path",
                e.to_string(),
            )
        })?,
        (None, None) => state.inner.base_config.clone(),
    };
    cfg.store_root = state.inner.store.root().to_path_buf();
    cfg.validate().map_err(|e| {
        ApiError::field(
            StatusCode::UNPROCESSABLE_ENTITY,
            "invalid run config",
            "config",
            e.to_string(),
        )
    })?;
    Ok(cfg)
}

async fn launch_run(
    State(state): State<AppState>,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult<Response> {
    let req: LaunchRequest = parse_body(&body)?;
    let key = headers
        .get(IDEMPOTENCY_HEADER)
        .and_then(|v| v.to_str().ok())
        .map(str::to_string);

    // Held across reservation so two requests with one key cannot both launch.
    let mut keys = state.inner.idempotency.lock().expect("lock");
    if let Some(run_id) = key.as_ref().and_then(|k| keys.get(k)) {
        let status = RunStatus {
            run_id: run_id.clone(),
            status: current_status(&state, run_id),
            failure: None,
        };
        return Ok((StatusCode::ACCEPTED, Json(status)).into_response());
    }

    let cfg = launch_config(&state, req)?;
    let pipeline = match &state.inner.backends {
        Some(set) => Pipeline::with_backends(cfg, set.clone()),
        None => Pipeline::new(cfg),
    }?;
    let handle = state.inner.store.create_run(pipeline.config())?;
    let run_id = handle.run_id.clone();
    if let Some(k) = key {
        keys.insert(k, run_id.clone());
    }
    drop(keys);

    state
        .inner
        .in_flight
        .lock()
        .expect("lock")
        .insert(run_id.clone(), InFlight::Running);
    let task_state = state.clone();
    let task_id = run_id.clone();
    tokio::spawn(async move {
        let outcome = pipeline.execute(handle).await;
        let mut in_flight = task_state.inner.in_flight.lock().expect("lock");
        match outcome {
            Ok(report) => {
                info!(run_id = %task_id, status = %report.status, "run finished");
                in_flight.remove(&task_id);
            }
            Err(e) => {
                warn!(run_id = %task_id, error = %e, "run crashed");
                in_flight.insert(task_id, InFlight::Crashed(e.to_string()));
            }
        }
    });

    let status = RunStatus {
        run_id,
        status: STATUS_RUNNING.to_string(),
        failure: None,
    };
    Ok((StatusCode::ACCEPTED, Json(status)).into_response())
}

fn current_status(state: &AppState, run_id: &str) -> String {
    match state.in_flight(run_id) {
        Some(InFlight::Running) => STATUS_RUNNING.to_string(),
        Some(InFlight::Crashed(_)) => "failed:store".to_string(),
        None => match state.inner.store.load_run(run_id) {
            Ok(report) => report.status,
            Err(_) => "unreadable".to_string(),
        },
    }
}

async fn list_runs(State(state): State<AppState>) -> ApiResult<Json<Vec<RunStatus>>> {
    let store_state = state.clone();
    let mut ids = blocking(move || store_state.inner.store.list_runs()).await?;
    ids.extend(state.inner.in_flight.lock().expect("lock").keys().cloned());
    ids.sort();
    ids.dedup();
    let runs = ids
        .into_iter()
        .map(|run_id| RunStatus {
            status: current_status(&state, &run_id),
            run_id,
            failure: None,
        })
        .collect();
    Ok(Json(runs))
}

/// Loads a finished run; in-flight runs answer 409.
async fn finished_report(state: &AppState, run_id: &str) -> ApiResult<screening_core::RunReport> {
    match state.in_flight(run_id) {
        Some(InFlight::Running) => Err(ApiError::new(
            StatusCode::CONFLICT,
            format!("run `{run_id}` is still running"),
        )),
        Some(InFlight::Crashed(msg)) => Err(ApiError::new(
            StatusCode::INTERNAL_SERVER_ERROR,
            format!("run `{run_id}` crashed: {msg}"),
        )),
        None => {
            let store = state.inner.store.clone();
            let id = run_id.to_string();
            blocking(move || store.load_run(&id)).await
        }
    }
}

async fn get_run(State(state): State<AppState>, Path(run_id): Path<String>) -> ApiResult<Response> {
    match state.in_flight(&run_id) {
        Some(InFlight::Running) => Ok(Json(RunStatus {
            run_id,
            status: STATUS_RUNNING.to_string(),
            failure: None,
        })
        .into_response()),
        Some(InFlight::Crashed(msg)) => Ok(Json(RunStatus {
            run_id,
            status: "failed:store".to_string(),
            failure: Some(msg),
        })
        .into_response()),
        None => Ok(Json(finished_report(&state, &run_id).await?).into_response()),
    }
}

async fn get_shortlist(
    State(state): State<AppState>,
    Path(run_id): Path<String>,
    Query(query): Query<HashMap<String, String>>,
) -> ApiResult<Response> {
    let top = match query.get("top") {
        None => None,
        Some(raw) => match raw.parse::<usize>() {
            Ok(k) if k > 0 => Some(k),
            _ => {
                return Err(ApiError::field(
                    StatusCode::UNPROCESSABLE_ENTITY,
                    "invalid query",
                    "top",
                    "must be a positive integer",
                ))
            }
        },
    };
    let report = finished_report(&state, &run_id).await?;
    let mut cards = report.shortlist;
    if let Some(k) = top {
        cards.truncate(k);
    }
    Ok(Json(cards).into_response())
}

fn default_decider() -> String {
    "reviewer".to_string()
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManualDecisionRequest {
    selected_ids: Vec<String>,
    #[serde(default)]
    rationale: String,
    #[serde(default)]
    criteria: DecisionCriteria,
    #[serde(default = "default_decider")]
    decider: String,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct AutoDecisionRequest {
    #[serde(default)]
    criteria: DecisionCriteria,
}

fn force_flag(query: &HashMap<String, String>) -> bool {
    query.get("force").is_some_and(|v| v == "true" || v == "1")
}

async fn post_decision(
    State(state): State<AppState>,
    Path(run_id): Path<String>,
    Query(query): Query<HashMap<String, String>>,
    body: Bytes,
) -> ApiResult<Response> {
    let req: ManualDecisionRequest = if body.iter().all(u8::is_ascii_whitespace) {
        return Err(ApiError::field(
            StatusCode::UNPROCESSABLE_ENTITY,
            "malformed request body",
            "selected_ids",
            "required",
        ));
    } else {
        serde_json::from_slice(&body).map_err(|e| {
            ApiError::field(
                StatusCode::UNPROCESSABLE_ENTITY,
                "malformed request body",
                "body",
                e.to_string(),
            )
        })?
    };
    let report = finished_report(&state, &run_id).await?;
    let record = record_manual_decision(
        &run_id,
        &report.shortlist,
        &req.criteria,
        req.selected_ids,
        req.rationale,
        req.decider,
    )?;
    let force = force_flag(&query);
    let store = state.inner.store.clone();
    let stored = record.clone();
    blocking(move || store.append_decision(&run_id, stored, &[], force)).await?;
    Ok((StatusCode::CREATED, Json(record)).into_response())
}

async fn post_auto_decision(
    State(state): State<AppState>,
    Path(run_id): Path<String>,
    Query(query): Query<HashMap<String, String>>,
    body: Bytes,
) -> ApiResult<Response> {
    let req: AutoDecisionRequest = parse_body(&body)?;
    finished_report(&state, &run_id).await?;
    let backend = state.inner.backends.as_ref().map(|b| b.decide.clone());
    let record = auto_decide_run(
        &state.inner.store,
        &run_id,
        &req.criteria,
        backend,
        force_flag(&query),
    )
    .await?;
    Ok((StatusCode::CREATED, Json(record)).into_response())
}

async fn get_metrics(
    State(state): State<AppState>,
    Path(run_id): Path<String>,
) -> ApiResult<Response> {
    let report = finished_report(&state, &run_id).await?;
    if report.evaluation.is_none() && report.classification.is_none() {
        return Err(ApiError::new(
            StatusCode::NOT_FOUND,
            format!("run `{run_id}` has no gold data to evaluate against"),
        ));
    }
    Ok(Json(json!({
        "assessment": report.evaluation,
        "classification": report.classification,
    }))
    .into_response())
}

async fn get_timing(
    State(state): State<AppState>,
    Path(run_id): Path<String>,
) -> ApiResult<Response> {
    let report = finished_report(&state, &run_id).await?;
    Ok(Json(report.timing).into_response())
}
