//! HTTP front end over a built workspace.
//!
//! Queries run on the blocking pool against an immutable [`Engine`]; an
//! administrative reload swaps in a freshly loaded engine.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde_json::{json, Value};

use lakelens_core::pipeline::{open_engine, Workspace};
use lakelens_core::query::{Engine, OPS};
use lakelens_core::{DeId, Error};

pub const API_VERSION: &str = "1";

pub struct AppState {
    workspace: Option<Workspace>,
    engine: RwLock<Option<Arc<Engine>>>,
    load_error: RwLock<Option<String>>,
}

impl AppState {
    /// Load the workspace; a failed load leaves the service up but answering 503.
    pub fn open(ws: Workspace) -> Self {
        let (engine, err) = match open_engine(&ws) {
            Ok(e) => (Some(Arc::new(e)), None),
            Err(e) => {
                log::error!("workspace {} not loaded: {e}", ws.root.display());
                (None, Some(e.to_string()))
            }
        };
        AppState { workspace: Some(ws), engine: RwLock::new(engine), load_error: RwLock::new(err) }
    }

    pub fn from_engine(engine: Engine) -> Self {
        AppState { workspace: None, engine: RwLock::new(Some(Arc::new(engine))), load_error: RwLock::new(None) }
    }

    fn engine(&self) -> Result<Arc<Engine>, ApiError> {
        let guard = self.engine.read().unwrap_or_else(|p| p.into_inner());
        guard.clone().ok_or_else(|| {
            let detail = self.load_error.read().unwrap_or_else(|p| p.into_inner()).clone();
            ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "artifacts_missing", detail.unwrap_or_else(|| "no engine loaded".into()))
        })
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
    extra: Option<(&'static str, Value)>,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError { status, code, message: message.into(), extra: None }
    }
}

/// Status and machine-readable code for a core error.
pub fn classify(e: &Error) -> (StatusCode, &'static str) {
    match e {
        Error::UnknownDe(_) => (StatusCode::NOT_FOUND, "unknown_de"),
        Error::WrongKind { .. } => (StatusCode::BAD_REQUEST, "wrong_kind"),
        Error::InvalidQuery(_) => (StatusCode::BAD_REQUEST, "invalid_query"),
        Error::EmptyQuerySet | Error::DimensionMismatch { .. } => (StatusCode::BAD_REQUEST, "invalid_query"),
        Error::IndexMissing(_) => (StatusCode::SERVICE_UNAVAILABLE, "index_missing"),
        Error::ModelMissing => (StatusCode::SERVICE_UNAVAILABLE, "model_missing"),
        Error::Artifact { .. } | Error::StaleArtifact { .. } | Error::Io(_) => {
            (StatusCode::SERVICE_UNAVAILABLE, "artifacts_missing")
        }
        _ => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let (status, code) = classify(&e);
        ApiError::new(status, code, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut err = json!({"code": self.code, "message": self.message});
        if let Some((k, v)) = self.extra {
            err[k] = v;
        }
        (self.status, Json(json!({"error": err}))).into_response()
    }
}

type ApiResult = Result<Response, ApiError>;

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/lake/summary", get(summary))
        .route("/query/{op}", post(query))
        .route("/de/{id}", get(detail))
        .route("/graph/neighborhood", get(neighborhood))
        .route("/admin/reload", post(reload))
        .with_state(state)
}

fn parse_id(s: &str) -> Result<DeId, ApiError> {
    s.parse().map_err(|_| ApiError::new(StatusCode::BAD_REQUEST, "invalid_id", format!("{s:?} is not a 32-hex-char id")))
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, Error> + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
        .map_err(ApiError::from)
}

async fn health(State(s): State<Arc<AppState>>) -> ApiResult {
    let e = s.engine()?;
    let body = json!({"status": "ok", "api_version": API_VERSION, "fingerprints": e.artifacts.fingerprints});
    Ok(Json(body).into_response())
}

async fn summary(State(s): State<Arc<AppState>>) -> ApiResult {
    Ok(Json(s.engine()?.summary()).into_response())
}

async fn query(State(s): State<Arc<AppState>>, Path(op): Path<String>, body: Bytes) -> ApiResult {
    if !OPS.contains(&op.as_str()) {
        let mut err = ApiError::new(StatusCode::BAD_REQUEST, "unknown_op", format!("unknown operation {op:?}"));
        err.extra = Some(("ops", json!(OPS)));
        return Err(err);
    }
    let params: Value = if body.iter().all(u8::is_ascii_whitespace) {
        json!({})
    } else {
        serde_json::from_slice(&body).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "malformed_body", e.to_string()))?
    };
    let e = s.engine()?;
    let resp = blocking(move || e.run(&op, params)).await?;
    Ok(Json(resp).into_response())
}

async fn detail(State(s): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult {
    let id = parse_id(&id)?;
    Ok(Json(s.engine()?.detail(id)?).into_response())
}

async fn neighborhood(State(s): State<Arc<AppState>>, Query(q): Query<HashMap<String, String>>) -> ApiResult {
    let id = q.get("id").ok_or_else(|| ApiError::new(StatusCode::BAD_REQUEST, "invalid_query", "missing id"))?;
    let id = parse_id(id)?;
    let depth = match q.get("depth") {
        Some(d) => d.parse().map_err(|_| ApiError::new(StatusCode::BAD_REQUEST, "invalid_query", format!("bad depth {d:?}")))?,
        None => 1,
    };
    let e = s.engine()?;
    let n = blocking(move || e.neighborhood(id, depth)).await?;
    Ok(Json(n).into_response())
}

async fn reload(State(s): State<Arc<AppState>>) -> ApiResult {
    let ws = s
        .workspace
        .clone()
        .ok_or_else(|| ApiError::new(StatusCode::BAD_REQUEST, "no_workspace", "service was not started from a workspace"))?;
    let engine = blocking(move || open_engine(&ws)).await?;
    let fingerprints = engine.artifacts.fingerprints.clone();
    *s.engine.write().unwrap_or_else(|p| p.into_inner()) = Some(Arc::new(engine));
    *s.load_error.write().unwrap_or_else(|p| p.into_inner()) = None;
    log::info!("artifacts reloaded");
    Ok(Json(json!({"status": "reloaded", "fingerprints": fingerprints})).into_response())
}

pub async fn serve(state: Arc<AppState>, addr: &str) -> anyhow::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
