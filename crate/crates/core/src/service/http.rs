//! HTTP routes over [`SessionService`].
//!
//! Requests that take longer than `job_after` (2 s by default) answer `202`
//! with a job token; `GET /jobs/{token}` reports `pending` until the
//! result is ready.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::rejection::BytesRejection;
use axum::extract::{DefaultBodyLimit, Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde_json::{json, Value};

use super::{new_token, ApiError, ApiResult, SessionService};

pub const DEFAULT_BIND: &str = "127.0.0.1:8080";
pub const DEFAULT_LOG_DIR: &str = "./sessions";
pub const DEFAULT_MAX_BODY_BYTES: usize = 1 << 20;
pub const DEFAULT_JOB_AFTER: Duration = Duration::from_secs(2);

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub bind: String,
    /// `None` keeps sessions in memory only.
    pub log_dir: Option<PathBuf>,
    pub max_body_bytes: usize,
    pub job_after: Duration,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            bind: DEFAULT_BIND.into(),
            log_dir: Some(PathBuf::from(DEFAULT_LOG_DIR)),
            max_body_bytes: DEFAULT_MAX_BODY_BYTES,
            job_after: DEFAULT_JOB_AFTER,
        }
    }
}

impl ServiceConfig {
    /// Reads `BIND_ADDR`, `LOG_DIR` and `MAX_BODY_BYTES`.
    pub fn from_env() -> crate::Result<Self> {
        let mut config = ServiceConfig::default();
        if let Ok(bind) = std::env::var("BIND_ADDR") {
            config.bind = bind;
        }
        if let Ok(dir) = std::env::var("LOG_DIR") {
            config.log_dir = Some(PathBuf::from(dir));
        }
        if let Ok(max) = std::env::var("MAX_BODY_BYTES") {
            config.max_body_bytes = max
                .parse()
                .map_err(|_| crate::Error::config(format!("MAX_BODY_BYTES is not a byte count: '{max}'")))?;
        }
        Ok(config)
    }
}

type JobSlot = Arc<Mutex<Option<ApiResult>>>;

struct AppState {
    service: Arc<SessionService>,
    jobs: Mutex<HashMap<String, JobSlot>>,
    job_after: Duration,
}

type Shared = State<Arc<AppState>>;

fn reply(status: u16, body: Value) -> Response {
    let code = StatusCode::from_u16(status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
    (code, Json(body)).into_response()
}

fn error_reply(e: &ApiError) -> Response {
    reply(e.status, e.to_json())
}

fn parse_body(body: Result<Bytes, BytesRejection>) -> ApiResult<Value> {
    let bytes = body.map_err(|rejection| {
        if rejection.status() == StatusCode::PAYLOAD_TOO_LARGE {
            ApiError::new(413, "payload_too_large", "request body exceeds MAX_BODY_BYTES")
        } else {
            ApiError::bad_request(rejection.body_text())
        }
    })?;
    serde_json::from_slice(&bytes).map_err(|e| {
        ApiError::new(400, "parse_error", e.to_string()).with_locus(format!("line {}, column {}", e.line(), e.column()))
    })
}

/// Runs `work` off the async runtime; answers directly when it finishes
/// within `job_after`, otherwise with a job token.
async fn run(state: &AppState, ok_status: u16, work: impl FnOnce() -> ApiResult + Send + 'static) -> Response {
    let slot: JobSlot = Arc::new(Mutex::new(None));
    let writer = slot.clone();
    let handle = tokio::task::spawn_blocking(move || {
        let result = work();
        *writer.lock().expect("job slot") = Some(result);
    });
    match tokio::time::timeout(state.job_after, handle).await {
        Ok(_) => match slot.lock().expect("job slot").take() {
            Some(Ok(v)) => reply(ok_status, v),
            Some(Err(e)) => error_reply(&e),
            None => error_reply(&ApiError::new(500, "internal", "request handler failed")),
        },
        Err(_) => {
            let token = new_token();
            state.jobs.lock().expect("job table").insert(token.clone(), slot);
            reply(
                202,
                json!({"job": token, "status": "pending", "poll": format!("/jobs/{token}")}),
            )
        }
    }
}

async fn create_session(State(state): Shared, body: Result<Bytes, BytesRejection>) -> Response {
    let body = match parse_body(body) {
        Ok(b) => b,
        Err(e) => return error_reply(&e),
    };
    let service = state.service.clone();
    run(&state, 201, move || service.create(&body)).await
}

async fn get_session(State(state): Shared, Path(id): Path<String>) -> Response {
    let service = state.service.clone();
    run(&state, 200, move || service.get(&id)).await
}

async fn get_history(State(state): Shared, Path(id): Path<String>) -> Response {
    let service = state.service.clone();
    run(&state, 200, move || {
        service
            .history(&id)
            .map(|h| serde_json::to_value(h).expect("events serialize"))
    })
    .await
}

macro_rules! session_op {
    ($name:ident, $method:ident) => {
        async fn $name(State(state): Shared, Path(id): Path<String>, body: Result<Bytes, BytesRejection>) -> Response {
            let body = match parse_body(body) {
                Ok(b) => b,
                Err(e) => return error_reply(&e),
            };
            let service = state.service.clone();
            run(&state, 200, move || service.$method(&id, &body)).await
        }
    };
}

session_op!(post_whatif, whatif);
session_op!(post_counterfactual, counterfactual);
session_op!(post_attribution, attribution);
session_op!(post_fidelity, fidelity);

async fn get_job(State(state): Shared, Path(token): Path<String>) -> Response {
    let slot = state.jobs.lock().expect("job table").get(&token).cloned();
    let Some(slot) = slot else {
        return error_reply(&ApiError::not_found("job", &token));
    };
    let guard = slot.lock().expect("job slot");
    match &*guard {
        None => reply(200, json!({"job": token, "status": "pending"})),
        Some(Ok(v)) => reply(200, json!({"job": token, "status": "done", "result": v})),
        Some(Err(e)) => reply(
            200,
            json!({"job": token, "status": "failed", "http_status": e.status, "error": e.to_json()["error"]}),
        ),
    }
}

async fn healthz() -> Response {
    reply(200, json!({"status": "ok", "version": crate::ENGINE_VERSION}))
}

async fn not_found() -> Response {
    error_reply(&ApiError::new(404, "not_found", "no such endpoint"))
}

/// The service routes.
pub fn router(service: Arc<SessionService>, max_body_bytes: usize, job_after: Duration) -> Router {
    let state = Arc::new(AppState {
        service,
        jobs: Mutex::new(HashMap::new()),
        job_after,
    });
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/whatif", post(post_whatif))
        .route("/sessions/{id}/counterfactual", post(post_counterfactual))
        .route("/sessions/{id}/attribution", post(post_attribution))
        .route("/sessions/{id}/fidelity", post(post_fidelity))
        .route("/sessions/{id}/history", get(get_history))
        .route("/jobs/{token}", get(get_job))
        .route("/healthz", get(healthz))
        .fallback(not_found)
        .layer(DefaultBodyLimit::max(max_body_bytes))
        .with_state(state)
}

/// Binds and serves until Ctrl-C.
pub async fn serve(config: ServiceConfig) -> crate::Result<()> {
    let service = match &config.log_dir {
        Some(dir) => SessionService::with_log_dir(dir)?,
        None => SessionService::in_memory(),
    };
    let listener = tokio::net::TcpListener::bind(&config.bind).await?;
    log::info!(
        "listening on {} (no authentication; keep it on loopback), log dir {:?}",
        listener.local_addr()?,
        config.log_dir
    );
    let app = router(Arc::new(service), config.max_body_bytes, config.job_after);
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
