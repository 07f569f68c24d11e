//! HTTP interface over an [`AuditStore`].
//!
//! | method | path | body | reply |
//! |---|---|---|---|
//! | GET | `/api/queue?status=pending` | | item summaries |
//! | GET | `/api/item/{id}` | | full item |
//! | POST | `/api/item/{id}/decision` | `{auditor_id, tags, expected_version?}` | updated item |
//! | POST | `/api/item/{id}/override` | same | updated item (escalated items only) |
//! | GET | `/api/progress` | | iteration reports |
//! | POST | `/api/iterate` | | new iteration report |
//!
//! Errors come back as `{"error": {"code": ..., "message": ...}}`.

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, MutexGuard};

use super::{AuditError, AuditItem, AuditLoop, AuditStore, ItemStatus};
use crate::corpus::{write_dataset, NerLabel, SentenceId};

/// Store plus the optional retraining setup behind `/api/iterate`.
#[derive(Debug)]
pub struct AuditService {
    pub store: AuditStore,
    pub audit_loop: Option<AuditLoop>,
    /// Where the merged dataset is written after each iteration.
    pub dataset_out: Option<PathBuf>,
}

impl AuditService {
    pub fn new(store: AuditStore) -> AuditService {
        AuditService {
            store,
            audit_loop: None,
            dataset_out: None,
        }
    }

    pub fn iterate(&mut self) -> Result<super::IterationReport, AuditError> {
        let lp = self.audit_loop.as_mut().ok_or(AuditError::IterationUnavailable)?;
        let report = lp.iterate(&mut self.store)?;
        if let Some(path) = &self.dataset_out {
            write_dataset(path, &lp.dataset).map_err(|e| AuditError::Store(e.to_string()))?;
        }
        Ok(report)
    }
}

pub type SharedService = Arc<Mutex<AuditService>>;

fn lock(s: &SharedService) -> MutexGuard<'_, AuditService> {
    s.lock().unwrap_or_else(|e| e.into_inner())
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
}

impl From<AuditError> for ApiError {
    fn from(e: AuditError) -> ApiError {
        let status = match &e {
            AuditError::InvalidTags(_) | AuditError::EmptyDataset => StatusCode::UNPROCESSABLE_ENTITY,
            AuditError::DuplicateAuditor { .. }
            | AuditError::AlreadyResolved(_)
            | AuditError::NotEscalated(_)
            | AuditError::VersionConflict { .. }
            | AuditError::IterationUnavailable => StatusCode::CONFLICT,
            AuditError::NotFound(_) => StatusCode::NOT_FOUND,
            AuditError::Misaligned { .. } | AuditError::Training(_) | AuditError::Store(_) => {
                StatusCode::INTERNAL_SERVER_ERROR
            }
        };
        ApiError {
            status,
            code: e.code(),
            message: e.to_string(),
        }
    }
}

impl ApiError {
    fn bad_request(message: String) -> ApiError {
        ApiError {
            status: StatusCode::BAD_REQUEST,
            code: "BadRequest",
            message,
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = serde_json::json!({"error": {"code": self.code, "message": self.message}});
        (self.status, Json(body)).into_response()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemSummary {
    pub item_id: u64,
    pub sentence_id: SentenceId,
    pub status: ItemStatus,
    pub decision_count: usize,
    pub escalated: bool,
    pub version: u64,
    pub iteration: usize,
    pub text: String,
}

impl From<&AuditItem> for ItemSummary {
    fn from(i: &AuditItem) -> ItemSummary {
        ItemSummary {
            item_id: i.item_id,
            sentence_id: i.sentence_id.clone(),
            status: i.status,
            decision_count: i.decisions.len(),
            escalated: i.escalated,
            version: i.version,
            iteration: i.iteration,
            text: i.tokens.join(" "),
        }
    }
}

#[derive(Debug, Deserialize)]
pub struct QueueQuery {
    status: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecisionBody {
    pub auditor_id: String,
    /// Tag names, e.g. `["B-PER", "O"]`.
    pub tags: Vec<String>,
    #[serde(default)]
    pub expected_version: Option<u64>,
}

impl DecisionBody {
    fn parse(&self) -> Result<Vec<NerLabel>, ApiError> {
        if self.auditor_id.trim().is_empty() {
            return Err(ApiError::bad_request("auditor_id must not be empty".into()));
        }
        self.tags
            .iter()
            .map(|t| t.parse::<NerLabel>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| AuditError::InvalidTags(e).into())
    }
}

async fn queue(
    State(s): State<SharedService>,
    Query(q): Query<QueueQuery>,
) -> Result<Json<Vec<ItemSummary>>, ApiError> {
    let status = match q.status.as_deref() {
        None | Some("") | Some("all") => None,
        Some(v) => Some(ItemStatus::parse(v).ok_or_else(|| ApiError::bad_request(format!("unknown status `{v}`")))?),
    };
    let svc = lock(&s);
    Ok(Json(svc.store.queue(status).into_iter().map(ItemSummary::from).collect()))
}

async fn item(State(s): State<SharedService>, Path(id): Path<u64>) -> Result<Json<AuditItem>, ApiError> {
    Ok(Json(lock(&s).store.item(id)?.clone()))
}

async fn decision(
    State(s): State<SharedService>,
    Path(id): Path<u64>,
    body: Result<Json<DecisionBody>, JsonRejection>,
) -> Result<Json<AuditItem>, ApiError> {
    let Json(body) = body.map_err(|e| ApiError::bad_request(e.body_text()))?;
    let tags = body.parse()?;
    let item = lock(&s)
        .store
        .record_decision(id, &body.auditor_id, tags, body.expected_version)?;
    Ok(Json(item))
}

async fn manual_override(
    State(s): State<SharedService>,
    Path(id): Path<u64>,
    body: Result<Json<DecisionBody>, JsonRejection>,
) -> Result<Json<AuditItem>, ApiError> {
    let Json(body) = body.map_err(|e| ApiError::bad_request(e.body_text()))?;
    let tags = body.parse()?;
    let item = lock(&s)
        .store
        .manual_override(id, &body.auditor_id, tags, body.expected_version)?;
    Ok(Json(item))
}

async fn progress(State(s): State<SharedService>) -> Json<Vec<super::IterationReport>> {
    Json(lock(&s).store.reports().to_vec())
}

async fn iterate(State(s): State<SharedService>) -> Result<Json<super::IterationReport>, ApiError> {
    // training is CPU-bound and holds the lock, so decisions wait for it
    let report = tokio::task::spawn_blocking(move || lock(&s).iterate())
        .await
        .map_err(|e| ApiError::from(AuditError::Store(e.to_string())))??;
    Ok(Json(report))
}

pub fn router(service: SharedService) -> Router {
    Router::new()
        .route("/api/queue", get(queue))
        .route("/api/item/{id}", get(item))
        .route("/api/item/{id}/decision", post(decision))
        .route("/api/item/{id}/override", post(manual_override))
        .route("/api/progress", get(progress))
        .route("/api/iterate", post(iterate))
        .with_state(service)
}

/// The API plus, when `ui_dir` is given, static files served from it for
/// every other path.
pub fn app(service: SharedService, ui_dir: Option<PathBuf>) -> Router {
    let r = router(service);
    match ui_dir {
        Some(dir) => r.fallback_service(tower_http::services::ServeDir::new(dir)),
        None => r,
    }
}

pub async fn serve(service: SharedService, addr: SocketAddr, ui_dir: Option<PathBuf>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("audit service listening on {}", listener.local_addr()?);
    axum::serve(listener, app(service, ui_dir)).await
}
