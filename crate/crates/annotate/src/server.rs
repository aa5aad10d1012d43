//! HTTP surface of the annotation store.
//!
//! | route                      | body / query                                   |
//! |----------------------------|------------------------------------------------|
//! | `POST /sessions`           | `{annotator_id}` → `{session}`                 |
//! | `GET /tasks/next`          | `?session=` → `{done, task?}`                  |
//! | `POST /judgments`          | `{session, review_id, slot_id?, question, value}` |
//! | `GET /admin/export`        | `?token=` → line-delimited export              |

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::json;
use tower_http::services::ServeDir;

use crate::store::{AnnotateError, JudgmentRequest, Store};

impl IntoResponse for AnnotateError {
    fn into_response(self) -> Response {
        let status = match &self {
            AnnotateError::InvalidSession | AnnotateError::Unauthorized => StatusCode::UNAUTHORIZED,
            AnnotateError::UnknownAnnotator(_) => StatusCode::FORBIDDEN,
            AnnotateError::UnknownReview(_) => StatusCode::NOT_FOUND,
            AnnotateError::PageOrder(_) => StatusCode::CONFLICT,
            AnnotateError::UnknownSlot { .. } | AnnotateError::BadJudgment(_) | AnnotateError::OutOfScale { .. } => {
                StatusCode::BAD_REQUEST
            }
            AnnotateError::Config(_) | AnnotateError::Journal { .. } | AnnotateError::Io(_) => {
                StatusCode::INTERNAL_SERVER_ERROR
            }
        };
        (status, Json(json!({"error": self.to_string(), "kind": self.kind()}))).into_response()
    }
}

#[derive(Deserialize)]
struct SessionRequest {
    annotator_id: String,
}

#[derive(Deserialize)]
struct SessionQuery {
    #[serde(default)]
    session: String,
}

#[derive(Deserialize)]
struct ExportQuery {
    #[serde(default)]
    token: String,
}

#[derive(Deserialize)]
struct SubmitBody {
    session: String,
    #[serde(flatten)]
    judgment: JudgmentRequest,
}

fn parse_body<T: serde::de::DeserializeOwned>(body: &Bytes) -> Result<T, AnnotateError> {
    serde_json::from_slice(body).map_err(|e| AnnotateError::BadJudgment(format!("malformed request body: {e}")))
}

async fn create_session(State(store): State<Arc<Store>>, body: Bytes) -> Result<impl IntoResponse, AnnotateError> {
    let req: SessionRequest = parse_body(&body)?;
    let session = store.create_session(&req.annotator_id)?;
    Ok(Json(json!({ "session": session })))
}

async fn next_task(
    State(store): State<Arc<Store>>,
    Query(q): Query<SessionQuery>,
) -> Result<impl IntoResponse, AnnotateError> {
    Ok(Json(store.next_task(&q.session)?))
}

async fn submit(State(store): State<Arc<Store>>, body: Bytes) -> Result<impl IntoResponse, AnnotateError> {
    let req: SubmitBody = parse_body(&body)?;
    // the journal append fsyncs
    let rec = tokio::task::spawn_blocking(move || store.submit(&req.session, &req.judgment))
        .await
        .map_err(|e| AnnotateError::Io(std::io::Error::other(e)))??;
    Ok(Json(json!({
        "ok": true,
        "review_id": rec.review_id,
        "slot_id": rec.slot_id,
        "question": rec.question,
        "value": rec.value,
    })))
}

async fn export(
    State(store): State<Arc<Store>>,
    Query(q): Query<ExportQuery>,
) -> Result<impl IntoResponse, AnnotateError> {
    let body = store.export(&q.token)?;
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], body))
}

pub fn router(store: Arc<Store>, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/sessions", post(create_session))
        .route("/tasks/next", get(next_task))
        .route("/judgments", post(submit))
        .route("/admin/export", get(export))
        .with_state(store);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

/// Serves until ctrl-c. Blocks the calling thread.
pub fn serve(store: Arc<Store>, static_dir: Option<PathBuf>, addr: SocketAddr) -> std::io::Result<()> {
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr).await?;
        log::info!("annotation server listening on http://{}", listener.local_addr()?);
        axum::serve(listener, router(store, static_dir))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
    })
}
