//! HTTP API over [`Session`].
//!
//! Errors come back as `{"error": message, "code": kind}`. Planning and
//! reconciliation run on the blocking pool while holding the session lock,
//! so calls on one session are serialized and different sessions proceed
//! in parallel.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::json;
use tokio::sync::{Mutex, RwLock};

use crate::hvac::HvacAction;
use crate::session::{Session, SessionConfig, SessionError, SessionExport};

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self { status, code, message: message.into() }
    }

    fn not_found(id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", format!("no session {id}"))
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let (status, code) = match &e {
            SessionError::OutOfOrder(_) => (StatusCode::CONFLICT, "out_of_order"),
            SessionError::Complete(_) => (StatusCode::CONFLICT, "session_complete"),
            SessionError::InvalidAction(_) => (StatusCode::BAD_REQUEST, "invalid_action"),
            SessionError::Config(_) | SessionError::Json(_) | SessionError::Model(_) => {
                (StatusCode::BAD_REQUEST, "invalid_config")
            }
            SessionError::ReplayMismatch(_) => (StatusCode::BAD_REQUEST, "replay_mismatch"),
            _ => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
        };
        Self::new(status, code, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message, "code": self.code }))).into_response()
    }
}

type ApiResult = Result<Response, ApiError>;

pub struct AppState {
    default_config: SessionConfig,
    sessions: RwLock<HashMap<String, Arc<Mutex<Session>>>>,
    next_id: AtomicU64,
}

impl AppState {
    pub fn new(default_config: SessionConfig) -> Self {
        Self { default_config, sessions: RwLock::new(HashMap::new()), next_id: AtomicU64::new(1) }
    }

    async fn session(&self, id: &str) -> Result<Arc<Mutex<Session>>, ApiError> {
        self.sessions.read().await.get(id).cloned().ok_or_else(|| ApiError::not_found(id))
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/import", post(import_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/recommend", post(recommend))
        .route("/sessions/{id}/step", post(step))
        .route("/sessions/{id}/propose", post(propose))
        .route("/sessions/{id}/export", get(export))
        .with_state(state)
}

pub async fn serve(port: u16, config: SessionConfig) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(("0.0.0.0", port)).await?;
    eprintln!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(Arc::new(AppState::new(config)))).await
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateRequest {
    seed: Option<u64>,
    config: Option<SessionConfig>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ActionRequest {
    action: ActionInput,
}

/// `[2, 1]` or `"2,1"`.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum ActionInput {
    List(Vec<usize>),
    Text(String),
}

impl ActionInput {
    fn parse(self) -> Result<HvacAction, ApiError> {
        match self {
            Self::List(v) => Ok(HvacAction(v)),
            Self::Text(s) => s.parse().map_err(|e: String| ApiError::new(StatusCode::BAD_REQUEST, "invalid_action", e)),
        }
    }
}

fn bad_body(e: impl std::fmt::Display) -> ApiError {
    ApiError::new(StatusCode::BAD_REQUEST, "invalid_request", e.to_string())
}

/// Parse a JSON body ourselves so malformed input gets the error envelope.
fn parse_body<T: for<'de> Deserialize<'de> + Default>(body: &str) -> Result<T, ApiError> {
    if body.trim().is_empty() {
        return Ok(T::default());
    }
    serde_json::from_str(body).map_err(bad_body)
}

async fn insert(state: &AppState, build: impl FnOnce(String) -> Result<Session, SessionError> + Send + 'static) -> ApiResult {
    let id = format!("s{}", state.next_id.fetch_add(1, Ordering::Relaxed));
    let session = tokio::task::spawn_blocking(move || build(id)).await.map_err(internal)??;
    let view = session.view();
    state.sessions.write().await.insert(session.id().to_string(), Arc::new(Mutex::new(session)));
    Ok((StatusCode::CREATED, Json(view)).into_response())
}

async fn create_session(State(state): State<Arc<AppState>>, body: String) -> ApiResult {
    let req: CreateRequest = parse_body(&body)?;
    let config = req.config.unwrap_or_else(|| state.default_config.clone());
    let seed = req.seed.unwrap_or(0);
    insert(&state, move |id| Session::new(id, config, seed)).await
}

async fn import_session(State(state): State<Arc<AppState>>, body: String) -> ApiResult {
    let export: SessionExport = serde_json::from_str(&body).map_err(bad_body)?;
    insert(&state, move |id| Session::import(id, export)).await
}

fn internal(e: impl std::fmt::Display) -> ApiError {
    ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string())
}

/// Run `f` on the blocking pool with the session locked.
async fn with_session<R: serde::Serialize + Send + 'static>(
    state: &AppState,
    id: &str,
    f: impl FnOnce(&mut Session) -> Result<R, SessionError> + Send + 'static,
) -> ApiResult {
    let guard = state.session(id).await?.lock_owned().await;
    let out = tokio::task::spawn_blocking(move || {
        let mut guard = guard;
        f(&mut guard)
    })
    .await
    .map_err(internal)??;
    Ok(Json(out).into_response())
}

async fn get_session(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult {
    let session = state.session(&id).await?;
    let view = session.lock().await.view();
    Ok(Json(view).into_response())
}

async fn export(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult {
    let session = state.session(&id).await?;
    let export = session.lock().await.export();
    Ok(Json(export).into_response())
}

async fn recommend(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult {
    with_session(&state, &id, |s| s.recommend()).await
}

async fn step(State(state): State<Arc<AppState>>, Path(id): Path<String>, body: String) -> ApiResult {
    let req: ActionRequest = serde_json::from_str(&body).map_err(bad_body)?;
    let action = req.action.parse()?;
    with_session(&state, &id, move |s| s.step(&action)).await
}

async fn propose(State(state): State<Arc<AppState>>, Path(id): Path<String>, body: String) -> ApiResult {
    let req: ActionRequest = serde_json::from_str(&body).map_err(bad_body)?;
    let action = req.action.parse()?;
    with_session(&state, &id, move |s| s.propose(&action)).await
}
