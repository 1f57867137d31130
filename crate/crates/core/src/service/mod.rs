//! Session-based facade with an append-only audit log.
//!
//! [`SessionService`] holds the sessions and performs every operation
//! synchronously; [`http`] exposes it over HTTP. Each session is guarded by
//! its own mutex, so requests to one session are serialized while distinct
//! sessions run in parallel. With a log directory configured, every session
//! is persisted as `<id>.jsonl` (a header line, then one event per line)
//! and reloaded on start.

pub mod http;
pub(crate) mod requests;
mod store;

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use chrono::{SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::dataset::Dataset;
use crate::error::Error;
use crate::model::Model;
use crate::schema::DataPoint;
pub use http::{router, serve, ServiceConfig};
use store::SessionLog;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Whatif,
    Counterfactual,
    Attribution,
    Fidelity,
    Note,
}

/// One audited exchange: the request document and the response document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub seq: u64,
    pub kind: EventKind,
    pub request: Value,
    pub response: Value,
    pub timestamp: String,
}

/// Error surfaced to HTTP clients as `{"error": {"code", "message", "locus"}}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ApiError {
    pub status: u16,
    pub code: &'static str,
    pub message: String,
    pub locus: Option<String>,
}

impl ApiError {
    pub fn new(status: u16, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
            locus: None,
        }
    }

    pub fn with_locus(mut self, locus: impl Into<String>) -> Self {
        self.locus = Some(locus.into());
        self
    }

    pub fn not_found(what: &str, id: &str) -> Self {
        ApiError::new(404, "not_found", format!("unknown {what} '{id}'")).with_locus(id)
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        ApiError::new(400, "bad_request", message)
    }

    pub fn to_json(&self) -> Value {
        json!({"error": {"code": self.code, "message": self.message, "locus": self.locus}})
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let (status, code) = match &e {
            Error::Parse { .. } => (400, "parse_error"),
            Error::DimensionMismatch { .. } => (400, "dimension_mismatch"),
            Error::InvalidValue { .. } => (400, "invalid_value"),
            Error::InvalidModel(_) => (400, "invalid_model"),
            Error::UnknownModelType(_) => (400, "unknown_model_type"),
            Error::EmptyDataset => (400, "empty_dataset"),
            Error::Batch { .. } => (400, "invalid_value"),
            Error::InvalidConfig(_) => (422, "invalid_config"),
            Error::ExactLimitExceeded { .. } => (422, "exact_limit_exceeded"),
            Error::Unsupported(_) => (422, "unsupported"),
            Error::Protocol { .. } => (502, "model_protocol_error"),
            Error::Io(_) => (500, "io_error"),
        };
        ApiError {
            status,
            code,
            locus: e.locus(),
            message: e.to_string(),
        }
    }
}

pub type ApiResult<T = Value> = Result<T, ApiError>;

/// A live session.
#[derive(Debug)]
pub struct Session {
    pub id: String,
    pub model: Arc<Model>,
    pub dataset: Option<Arc<Dataset>>,
    pub initial_point: DataPoint,
    pub current_point: DataPoint,
    pub history: Vec<Event>,
    pub created_at: String,
    pub updated_at: String,
    log: Option<SessionLog>,
}

fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Micros, true)
}

fn new_token() -> String {
    format!("{:032x}", rand::random::<u128>())
}

impl Session {
    pub fn summary(&self) -> ApiResult {
        let prediction = self.model.score(&self.current_point)?;
        Ok(json!({
            "id": self.id,
            "created_at": self.created_at,
            "updated_at": self.updated_at,
            "model_type": self.model.spec().type_name(),
            "features": self.model.schema().features(),
            "classes": self.model.classes(),
            "has_dataset": self.dataset.is_some(),
            "current_point": self.model.schema().point_to_json(&self.current_point),
            "prediction": prediction,
            "n_events": self.history.len(),
        }))
    }

    /// Appends an event (log first, so a failed write leaves no trace) and
    /// moves the current point if given.
    fn commit(&mut self, kind: EventKind, request: Value, response: Value, point: Option<DataPoint>) -> ApiResult {
        let event = Event {
            seq: self.history.len() as u64 + 1,
            kind,
            request,
            response,
            timestamp: now(),
        };
        if let Some(log) = &mut self.log {
            log.append(&event).map_err(ApiError::from)?;
        }
        if let Some(p) = point {
            self.current_point = p;
        }
        self.updated_at = event.timestamp.clone();
        let response = event.response.clone();
        self.history.push(event);
        Ok(response)
    }
}

/// All sessions plus pending jobs.
#[derive(Debug, Default)]
pub struct SessionService {
    sessions: Mutex<HashMap<String, Arc<Mutex<Session>>>>,
    log_dir: Option<PathBuf>,
}

impl SessionService {
    /// In-memory only.
    pub fn in_memory() -> Self {
        SessionService::default()
    }

    /// Persists to `dir`, reloading any sessions already logged there.
    pub fn with_log_dir(dir: impl Into<PathBuf>) -> crate::Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        let mut sessions = HashMap::new();
        for session in store::load_all(&dir)? {
            sessions.insert(session.id.clone(), Arc::new(Mutex::new(session)));
        }
        Ok(SessionService {
            sessions: Mutex::new(sessions),
            log_dir: Some(dir),
        })
    }

    pub fn session_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.sessions.lock().expect("session table").keys().cloned().collect();
        ids.sort();
        ids
    }

    fn session(&self, id: &str) -> ApiResult<Arc<Mutex<Session>>> {
        self.sessions
            .lock()
            .expect("session table")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found("session", id))
    }

    fn with_session<T>(&self, id: &str, f: impl FnOnce(&mut Session) -> ApiResult<T>) -> ApiResult<T> {
        let handle = self.session(id)?;
        let mut guard = handle.lock().unwrap_or_else(|poison| poison.into_inner());
        f(&mut guard)
    }

    /// `POST /sessions` with `{"model": <model document>, "dataset": "<csv>"?, "point": {...}}`.
    pub fn create(&self, body: &Value) -> ApiResult {
        let req = requests::CreateRequest::parse(body)?;
        let id = new_token();
        let created_at = now();
        let log = match &self.log_dir {
            Some(dir) => Some(
                SessionLog::create(dir, &id, &store::Header {
                    id: id.clone(),
                    created_at: created_at.clone(),
                    model: req.model_doc.clone(),
                    dataset: req.dataset_csv.clone(),
                    point: req.model.schema().point_to_json(&req.point),
                })
                .map_err(ApiError::from)?,
            ),
            None => None,
        };
        let session = Session {
            id: id.clone(),
            model: Arc::new(req.model),
            dataset: req.dataset.map(Arc::new),
            initial_point: req.point.clone(),
            current_point: req.point,
            history: Vec::new(),
            updated_at: created_at.clone(),
            created_at,
            log,
        };
        let summary = session.summary()?;
        self.sessions
            .lock()
            .expect("session table")
            .insert(id, Arc::new(Mutex::new(session)));
        Ok(summary)
    }

    pub fn get(&self, id: &str) -> ApiResult {
        self.with_session(id, |s| s.summary())
    }

    pub fn history(&self, id: &str) -> ApiResult<Vec<Event>> {
        self.with_session(id, |s| Ok(s.history.clone()))
    }

    /// `{"edits": {"feature": value, ...}}`; moves the current point.
    pub fn whatif(&self, id: &str, body: &Value) -> ApiResult {
        self.with_session(id, |s| {
            let (new_point, response) = requests::whatif(&s.model, &s.current_point, body)?;
            s.commit(EventKind::Whatif, body.clone(), response, Some(new_point))
        })
    }

    /// Counterfactual from the current point; the point itself is not moved.
    pub fn counterfactual(&self, id: &str, body: &Value) -> ApiResult {
        self.with_session(id, |s| {
            let response = requests::counterfactual(&s.model, s.dataset.as_deref(), &s.current_point, body)?;
            s.commit(EventKind::Counterfactual, body.clone(), response, None)
        })
    }

    pub fn attribution(&self, id: &str, body: &Value) -> ApiResult {
        self.with_session(id, |s| {
            let response = requests::attribution(&s.model, s.dataset.as_deref(), &s.current_point, body)?;
            s.commit(EventKind::Attribution, body.clone(), response, None)
        })
    }

    /// Validity profile and analogy report for an inline explanation
    /// (`"explanation"`) or an earlier attribution event (`"explanation_seq"`).
    pub fn fidelity(&self, id: &str, body: &Value) -> ApiResult {
        self.with_session(id, |s| {
            let response = requests::fidelity(&s.model, s.dataset.as_deref(), &s.history, body)?;
            s.commit(EventKind::Fidelity, body.clone(), response, None)
        })
    }
}

/// Replays the whatif events of `history` from `initial`.
pub fn replay_whatifs(model: &Model, initial: &DataPoint, history: &[Event]) -> crate::Result<DataPoint> {
    let mut point = initial.clone();
    for e in history.iter().filter(|e| e.kind == EventKind::Whatif) {
        point = requests::apply_edits(model, &point, &e.request)?;
    }
    Ok(point)
}
