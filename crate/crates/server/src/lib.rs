//! HTTP API over one annotation round.
//!
//! Every `/api` request must carry the shared token in `X-Collex-Token`.
//! Label writes go through a single journal writer; reads work on the most
//! recently published state snapshot.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, RwLock};

use axum::extract::{Path, Query, Request, State};
use axum::http::{HeaderMap, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use collex::annotation::{AnnotationError, RoundState, RoundStore};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tower_http::services::ServeDir;

pub const TOKEN_HEADER: &str = "x-collex-token";

pub struct AppState {
    round: u32,
    token: String,
    writer: Mutex<RoundStore>,
    snapshot: RwLock<Arc<RoundState>>,
}

impl AppState {
    pub fn new(store: RoundStore, token: impl Into<String>) -> Arc<Self> {
        Arc::new(Self {
            round: store.round(),
            token: token.into(),
            snapshot: RwLock::new(Arc::new(store.state().clone())),
            writer: Mutex::new(store),
        })
    }

    fn read(&self) -> Arc<RoundState> {
        self.snapshot.read().expect("snapshot lock").clone()
    }

    /// Runs a write against the journal and publishes the new state.
    fn write<T>(&self, f: impl FnOnce(&mut RoundStore) -> Result<T, AnnotationError>) -> Result<T, ApiError> {
        let mut store = self.writer.lock().expect("writer lock");
        let out = f(&mut store)?;
        *self.snapshot.write().expect("snapshot lock") = Arc::new(store.state().clone());
        Ok(out)
    }

    fn check_round(&self, r: u32) -> Result<(), ApiError> {
        if r == self.round {
            Ok(())
        } else {
            Err(ApiError::new(StatusCode::NOT_FOUND, "not_found", format!("round {r} is not being served (serving {})", self.round)))
        }
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    kind: &'static str,
    message: String,
    pair_ids: Vec<String>,
}

impl ApiError {
    fn new(status: StatusCode, kind: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            kind,
            message: message.into(),
            pair_ids: Vec::new(),
        }
    }
}

impl From<AnnotationError> for ApiError {
    fn from(e: AnnotationError) -> Self {
        let message = e.to_string();
        let (status, kind, ids) = match e {
            AnnotationError::NotFound(_) => (StatusCode::NOT_FOUND, "not_found", vec![]),
            AnnotationError::Unauthorized(_) => (StatusCode::FORBIDDEN, "forbidden", vec![]),
            AnnotationError::Validation(_) => (StatusCode::UNPROCESSABLE_ENTITY, "validation", vec![]),
            AnnotationError::IncompleteAdjudication(ids) => (StatusCode::CONFLICT, "incomplete_adjudication", ids),
            AnnotationError::Unlabeled(ids) => (StatusCode::CONFLICT, "unlabeled", ids),
            AnnotationError::Closed(_) => (StatusCode::CONFLICT, "closed", vec![]),
            AnnotationError::Config(_) => (StatusCode::BAD_REQUEST, "config", vec![]),
            _ => (StatusCode::INTERNAL_SERVER_ERROR, "internal", vec![]),
        };
        if status == StatusCode::INTERNAL_SERVER_ERROR {
            log::error!("{message}");
        }
        Self {
            status,
            kind,
            message,
            pair_ids: ids,
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({ "error": self.kind, "message": self.message });
        if !self.pair_ids.is_empty() {
            body["pair_ids"] = json!(self.pair_ids);
        }
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

async fn require_token(State(app): State<Arc<AppState>>, headers: HeaderMap, req: Request, next: Next) -> Response {
    match headers.get(TOKEN_HEADER).and_then(|v| v.to_str().ok()) {
        Some(t) if t == app.token => next.run(req).await,
        Some(_) => ApiError::new(StatusCode::UNAUTHORIZED, "unauthorized", "wrong token").into_response(),
        None => ApiError::new(StatusCode::UNAUTHORIZED, "unauthorized", "missing X-Collex-Token header").into_response(),
    }
}

#[derive(Deserialize)]
struct NextQuery {
    annotator: String,
}

async fn next_task(State(app): State<Arc<AppState>>, Path(r): Path<u32>, Query(q): Query<NextQuery>) -> Result<Response, ApiError> {
    app.check_round(r)?;
    let state = app.read();
    if !state.tasks.iter().any(|t| t.assigned_annotators.contains(&q.annotator)) {
        return Err(ApiError::new(StatusCode::FORBIDDEN, "forbidden", format!("{} has no tasks in round {r}", q.annotator)));
    }
    Ok(match state.next_task(&q.annotator) {
        Some(t) => Json(t).into_response(),
        None => StatusCode::NO_CONTENT.into_response(),
    })
}

#[derive(Deserialize)]
struct LabelBody {
    pair_id: String,
    annotator_id: String,
    label: u8,
}

async fn post_label(State(app): State<Arc<AppState>>, Json(b): Json<LabelBody>) -> ApiResult<collex::annotation::LabelAck> {
    let app2 = app.clone();
    let ack = tokio::task::spawn_blocking(move || app2.write(|s| s.record_label(&b.pair_id, &b.annotator_id, b.label)))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))??;
    Ok(Json(ack))
}

#[derive(Serialize)]
struct ContextBody {
    pair_id: String,
    lemma: String,
    concept_id: String,
    concept_name: String,
    context_tweets: Vec<String>,
    low_context: bool,
}

async fn pair_context(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<ContextBody> {
    let state = app.read();
    let t = state
        .task(&id)
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "not_found", format!("pair {id}")))?;
    Ok(Json(ContextBody {
        pair_id: t.pair_id.clone(),
        lemma: t.lemma.clone(),
        concept_id: t.concept_id.clone(),
        concept_name: t.concept_name.clone(),
        context_tweets: t.context_tweets.clone(),
        low_context: t.low_context,
    }))
}

async fn progress(State(app): State<Arc<AppState>>, Path(r): Path<u32>) -> ApiResult<collex::annotation::Progress> {
    app.check_round(r)?;
    Ok(Json(app.read().progress()))
}

async fn kappa(State(app): State<Arc<AppState>>, Path(r): Path<u32>) -> ApiResult<collex::annotation::RoundKappa> {
    app.check_round(r)?;
    Ok(Json(app.read().kappa()))
}

async fn disagreements(State(app): State<Arc<AppState>>, Path(r): Path<u32>) -> ApiResult<Vec<collex::annotation::Disagreement>> {
    app.check_round(r)?;
    Ok(Json(app.read().disagreements()))
}

#[derive(Deserialize)]
struct AdjudicateBody {
    pair_id: String,
    label: u8,
    #[serde(default)]
    note: Option<String>,
}

async fn adjudicate(State(app): State<Arc<AppState>>, Path(r): Path<u32>, Json(b): Json<AdjudicateBody>) -> ApiResult<serde_json::Value> {
    app.check_round(r)?;
    let app2 = app.clone();
    tokio::task::spawn_blocking(move || app2.write(|s| s.adjudicate(&b.pair_id, b.label, b.note)))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))??;
    Ok(Json(json!({ "ok": true, "progress": app.read().progress() })))
}

async fn close(State(app): State<Arc<AppState>>, Path(r): Path<u32>) -> ApiResult<serde_json::Value> {
    app.check_round(r)?;
    let app2 = app.clone();
    let labels = tokio::task::spawn_blocking(move || app2.write(|s| s.close()))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))??;
    Ok(Json(json!({ "ok": true, "labels": labels.len() })))
}

/// The API routes, plus static files from `static_dir` for everything else.
pub fn router(app: Arc<AppState>, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/rounds/{r}/next", get(next_task))
        .route("/api/labels", post(post_label))
        .route("/api/pairs/{id}/context", get(pair_context))
        .route("/api/rounds/{r}/progress", get(progress))
        .route("/api/rounds/{r}/kappa", get(kappa))
        .route("/api/rounds/{r}/disagreements", get(disagreements))
        .route("/api/rounds/{r}/adjudicate", post(adjudicate))
        .route("/api/rounds/{r}/close", post(close))
        .route_layer(middleware::from_fn_with_state(app.clone(), require_token))
        .with_state(app);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

/// Binds and serves until ctrl-c.
pub async fn serve(addr: SocketAddr, app: Arc<AppState>, static_dir: Option<PathBuf>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("annotation service listening on {}", listener.local_addr()?);
    axum::serve(listener, router(app, static_dir))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
