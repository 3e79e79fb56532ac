//! JSON API under `/v1/`.
//!
//! | method | path                          | body                                   |
//! |--------|-------------------------------|----------------------------------------|
//! | POST   | /v1/sessions                  | `{condition, seed?}`                   |
//! | GET    | /v1/sessions/{id}             |                                        |
//! | GET    | /v1/sessions/{id}/puzzle      |                                        |
//! | POST   | /v1/sessions/{id}/submit      | `{puzzle_id, program}`                 |
//! | POST   | /v1/sessions/{id}/skip        | `{puzzle_id, client_elapsed_ms?}`      |
//! | POST   | /v1/sessions/{id}/events      | `{kind, payload}`                      |
//! | GET    | /v1/export?condition=&session=| JSONL                                  |
//!
//! Errors come back as `{"error": code, "message": text}` plus
//! `remaining_seconds` for an early skip.

use std::path::Path;
use std::sync::Arc;

use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::{json, Value};
use tower_http::services::ServeDir;

use super::{ConditionId, EventKind, ExperimentService, ExportFilter, ServiceError};
use crate::program::Program;

type Shared = Arc<ExperimentService>;

pub struct ApiError(ServiceError);

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        ApiError(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        use ServiceError::*;
        let (status, code) = match &self.0 {
            UnknownCondition(_) => (StatusCode::BAD_REQUEST, "unknown_condition"),
            UnknownSession(_) => (StatusCode::NOT_FOUND, "unknown_session"),
            UnknownPuzzle(_) => (StatusCode::NOT_FOUND, "unknown_puzzle"),
            SessionFinished(_) => (StatusCode::CONFLICT, "session_finished"),
            NotActivePuzzle { .. } => (StatusCode::CONFLICT, "not_active_puzzle"),
            SkipTooEarly { .. } => (StatusCode::CONFLICT, "skip_too_early"),
            ServerOwnedEvent(_) => (StatusCode::FORBIDDEN, "server_owned_event"),
            SessionExists(_) => (StatusCode::CONFLICT, "session_exists"),
            PuzzleSet(_) | Storage(_) | BadLog(_) => (StatusCode::INTERNAL_SERVER_ERROR, "storage"),
        };
        let mut body = json!({"error": code, "message": self.0.to_string()});
        if let SkipTooEarly { remaining_seconds } = self.0 {
            body["remaining_seconds"] = json!(remaining_seconds);
        }
        (status, Json(body)).into_response()
    }
}

/// Runs a blocking service call (file appends sync to disk) off the
/// async workers.
async fn blocking<T, F>(svc: Shared, f: F) -> Result<T, ApiError>
where
    T: Send + 'static,
    F: FnOnce(&ExperimentService) -> Result<T, ServiceError> + Send + 'static,
{
    tokio::task::spawn_blocking(move || f(&svc))
        .await
        .map_err(|e| ApiError(ServiceError::Storage(format!("worker failed: {e}"))))?
        .map_err(ApiError)
}

#[derive(Deserialize)]
struct CreateBody {
    condition: String,
    #[serde(default)]
    seed: Option<u64>,
}

#[derive(Deserialize)]
struct SubmitBody {
    puzzle_id: String,
    program: Program,
}

#[derive(Deserialize)]
struct SkipBody {
    puzzle_id: String,
    #[serde(default)]
    client_elapsed_ms: Option<u64>,
}

#[derive(Deserialize)]
struct EventBody {
    kind: EventKind,
    #[serde(default)]
    payload: Value,
}

#[derive(Deserialize)]
struct ExportQuery {
    #[serde(default)]
    condition: Option<String>,
    #[serde(default)]
    session: Option<String>,
}

async fn create(State(svc): State<Shared>, Json(b): Json<CreateBody>) -> Result<Response, ApiError> {
    let out = blocking(svc, move |s| s.create_session_named(&b.condition, b.seed)).await?;
    Ok((StatusCode::CREATED, Json(out)).into_response())
}

async fn session(State(svc): State<Shared>, UrlPath(id): UrlPath<String>) -> Result<Response, ApiError> {
    let s = blocking(svc, move |s| s.session(&id)).await?;
    Ok(Json(json!({
        "session_id": s.id,
        "condition": s.condition,
        "index": s.cursor,
        "total": s.order.len(),
        "status": s.status,
    }))
    .into_response())
}

async fn puzzle(State(svc): State<Shared>, UrlPath(id): UrlPath<String>) -> Result<Response, ApiError> {
    Ok(Json(blocking(svc, move |s| s.current_puzzle(&id)).await?).into_response())
}

async fn submit(
    State(svc): State<Shared>,
    UrlPath(id): UrlPath<String>,
    Json(b): Json<SubmitBody>,
) -> Result<Response, ApiError> {
    Ok(Json(blocking(svc, move |s| s.submit_program(&id, &b.puzzle_id, &b.program)).await?).into_response())
}

async fn skip(
    State(svc): State<Shared>,
    UrlPath(id): UrlPath<String>,
    Json(b): Json<SkipBody>,
) -> Result<Response, ApiError> {
    Ok(Json(blocking(svc, move |s| s.skip_puzzle(&id, &b.puzzle_id, b.client_elapsed_ms)).await?).into_response())
}

async fn event(
    State(svc): State<Shared>,
    UrlPath(id): UrlPath<String>,
    Json(b): Json<EventBody>,
) -> Result<Response, ApiError> {
    blocking(svc, move |s| s.log_event(&id, b.kind, b.payload)).await?;
    Ok((StatusCode::ACCEPTED, Json(json!({"ok": true}))).into_response())
}

async fn export(State(svc): State<Shared>, Query(q): Query<ExportQuery>) -> Result<Response, ApiError> {
    let condition = q.condition.as_deref().map(str::parse::<ConditionId>).transpose()?;
    let filter = ExportFilter { condition, session: q.session };
    let body = blocking(svc, move |s| s.export_sessions(&filter)).await?;
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], body).into_response())
}

/// The API router, with `static_dir` (the built web client) served for
/// every other path when given.
pub fn router(svc: Shared, static_dir: Option<&Path>) -> Router {
    let api = Router::new()
        .route("/v1/sessions", post(create))
        .route("/v1/sessions/{id}", get(session))
        .route("/v1/sessions/{id}/puzzle", get(puzzle))
        .route("/v1/sessions/{id}/submit", post(submit))
        .route("/v1/sessions/{id}/skip", post(skip))
        .route("/v1/sessions/{id}/events", post(event))
        .route("/v1/export", get(export))
        .with_state(svc);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}
