//! Local HTTP service: query pipeline and review workflow.
//!
//! Endpoints:
//! - `GET /health`
//! - `POST /query` with `{"question": ".."}`
//! - `GET /review/queue?status=<review status>`
//! - `GET /review/item/{id}`
//! - `POST /review/item/{id}/decision` with `{status, edited_answer?, reviewer, timestamp?}`
//! - `GET /review/stats`
//! - `GET /dataset/summary`
//!
//! Anything else is served from the static directory when it exists.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use axum::extract::{Path as UrlPath, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use ragft_core::dataset::{golden_doc_texts, InstanceStatus, TrainingInstance, ValidationReport};
use ragft_core::review::{history_of, ReviewDecision, ReviewStats, ReviewStatus, Verdict};
use ragft_core::Question;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::Paths;
use crate::corpus::{self, ChunkMap};
use crate::datasetgen::{apply_reviews, ExportMeta};
use crate::error::{AppError, AppResult};
use crate::io;
use crate::querypipe::QueryEngine;
use crate::review_store::ReviewStore;

pub struct ServiceState {
    pub engine: Option<QueryEngine>,
    pub chunks: ChunkMap,
    pub questions: BTreeMap<String, Question>,
    pub sample: Vec<String>,
    pub instances: RwLock<BTreeMap<String, TrainingInstance>>,
    /// Single writer for decisions.
    pub store: Mutex<ReviewStore>,
    pub export_meta: Option<PathBuf>,
}

impl ServiceState {
    /// Loads the dataset store and replays recorded decisions.
    pub fn load(paths: &Paths, engine: Option<QueryEngine>) -> AppResult<Self> {
        let chunks = corpus::chunk_map(corpus::read_chunks(&paths.chunks)?);
        let questions = corpus::question_map(corpus::read_questions(&paths.questions)?);
        io::require(&paths.instances, "generate")?;
        io::require(&paths.review_sample, "generate")?;
        let mut instances: Vec<TrainingInstance> = io::read_jsonl(&paths.instances)?;
        let sample: Vec<String> = io::read_json(&paths.review_sample)?;
        let mut store = ReviewStore::open(&paths.reviews)?;
        store.compact(true)?;
        apply_reviews(&mut instances, store.history(), &chunks)?;
        Ok(Self {
            engine,
            chunks,
            questions,
            sample,
            instances: RwLock::new(instances.into_iter().map(|i| (i.instance_id.clone(), i)).collect()),
            store: Mutex::new(store),
            export_meta: Some(paths.export_meta.clone()),
        })
    }
}

pub struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({ "error": self.1 }))).into_response()
    }
}

impl From<AppError> for ApiError {
    fn from(e: AppError) -> Self {
        let status = match e {
            AppError::Core(ragft_core::Error::Invalid(_)) => StatusCode::UNPROCESSABLE_ENTITY,
            AppError::Core(ragft_core::Error::UnknownId(_)) => StatusCode::NOT_FOUND,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        Self(status, e.to_string())
    }
}

type Shared = Arc<ServiceState>;
type ApiResult<T> = Result<Json<T>, ApiError>;

pub fn router(state: Shared, static_dir: Option<&Path>) -> Router {
    let api = Router::new()
        .route("/health", get(health))
        .route("/query", post(query))
        .route("/review/queue", get(queue))
        .route("/review/item/{id}", get(item))
        .route("/review/item/{id}/decision", post(decision))
        .route("/review/stats", get(stats))
        .route("/dataset/summary", get(summary))
        .with_state(state);
    match static_dir.filter(|d| d.is_dir()) {
        Some(dir) => api.fallback_service(tower_http::services::ServeDir::new(dir)),
        None => api,
    }
}

async fn health() -> Json<serde_json::Value> {
    Json(json!({ "status": "ok" }))
}

#[derive(Deserialize)]
struct QueryBody {
    question: String,
}

async fn query(State(state): State<Shared>, Json(body): Json<QueryBody>) -> Response {
    if state.engine.is_none() {
        return ApiError(StatusCode::SERVICE_UNAVAILABLE, "indices not loaded".into()).into_response();
    }
    let task =
        tokio::task::spawn_blocking(move || state.engine.as_ref().expect("checked above").answer_query(&body.question));
    match task.await {
        Ok(Ok(answer)) => Json(answer).into_response(),
        Ok(Err(failure)) => (StatusCode::BAD_GATEWAY, Json(failure)).into_response(),
        Err(e) => ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()).into_response(),
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct QueueEntry {
    pub instance_id: String,
    pub question_id: String,
    pub review_status: ReviewStatus,
    pub status: InstanceStatus,
    pub all_verbatim: bool,
    pub format_ok: bool,
}

#[derive(Deserialize)]
struct QueueQuery {
    status: Option<ReviewStatus>,
}

async fn queue(State(state): State<Shared>, Query(q): Query<QueueQuery>) -> ApiResult<Vec<QueueEntry>> {
    let instances = state.instances.read().unwrap_or_else(|e| e.into_inner());
    let entries = state
        .sample
        .iter()
        .filter_map(|id| instances.get(id))
        .filter(|i| q.status.is_none_or(|s| i.review_status == s))
        .map(|i| {
            let v = i.effective_validation();
            QueueEntry {
                instance_id: i.instance_id.clone(),
                question_id: i.question_id.clone(),
                review_status: i.review_status,
                status: i.status,
                all_verbatim: v.is_some_and(|v| v.all_verbatim),
                format_ok: v.is_some_and(|v| v.format_ok),
            }
        })
        .collect();
    Ok(Json(entries))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct BlockView {
    pub chunk_id: String,
    pub text: String,
    pub golden: bool,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ItemView {
    pub instance_id: String,
    pub question_id: String,
    pub question: String,
    pub docs: Vec<BlockView>,
    pub contexts: Vec<BlockView>,
    pub answer: String,
    pub original_answer: String,
    pub edited: bool,
    pub validation: Option<ValidationReport>,
    pub status: InstanceStatus,
    pub review_status: ReviewStatus,
    pub history: Vec<ReviewDecision>,
}

fn blocks(order: &[String], golden: &[String], chunks: &ChunkMap) -> Vec<BlockView> {
    order
        .iter()
        .map(|id| BlockView {
            chunk_id: id.clone(),
            text: chunks.get(id).map(|c| c.text.clone()).unwrap_or_default(),
            golden: golden.contains(id),
        })
        .collect()
}

fn view(state: &ServiceState, inst: &TrainingInstance, history: &[ReviewDecision]) -> ItemView {
    ItemView {
        instance_id: inst.instance_id.clone(),
        question_id: inst.question_id.clone(),
        question: state.questions.get(&inst.question_id).map(|q| q.text.clone()).unwrap_or_default(),
        docs: blocks(&inst.doc_order, &inst.golden_docs, &state.chunks),
        contexts: blocks(&inst.ctx_order, &inst.golden_ctx, &state.chunks),
        answer: inst.effective_answer().to_string(),
        original_answer: inst.answer.clone(),
        edited: inst.edited_answer.is_some(),
        validation: inst.effective_validation().cloned(),
        status: inst.status,
        review_status: inst.review_status,
        history: history_of(history, &inst.instance_id).into_iter().cloned().collect(),
    }
}

fn not_found(id: &str) -> ApiError {
    ApiError(StatusCode::NOT_FOUND, format!("no sampled instance `{id}`"))
}

async fn item(State(state): State<Shared>, UrlPath(id): UrlPath<String>) -> ApiResult<ItemView> {
    if !state.sample.contains(&id) {
        return Err(not_found(&id));
    }
    let store = state.store.lock().unwrap_or_else(|e| e.into_inner());
    let instances = state.instances.read().unwrap_or_else(|e| e.into_inner());
    let inst = instances.get(&id).ok_or_else(|| not_found(&id))?;
    Ok(Json(view(&state, inst, store.history())))
}

#[derive(Deserialize)]
struct DecisionBody {
    status: Verdict,
    #[serde(default)]
    edited_answer: Option<String>,
    reviewer: String,
    #[serde(default)]
    timestamp: Option<String>,
}

/// Validates, persists, then applies. The response is sent only after the
/// decision is on disk.
async fn decision(
    State(state): State<Shared>,
    UrlPath(id): UrlPath<String>,
    Json(body): Json<DecisionBody>,
) -> ApiResult<ItemView> {
    if !state.sample.contains(&id) {
        return Err(not_found(&id));
    }
    let decision = ReviewDecision {
        instance_id: id.clone(),
        status: body.status,
        edited_answer: body.edited_answer,
        reviewer: body.reviewer,
        timestamp: body.timestamp.unwrap_or_else(|| chrono::Utc::now().to_rfc3339()),
    };
    let mut store = state.store.lock().unwrap_or_else(|e| e.into_inner());
    let mut updated = {
        let instances = state.instances.read().unwrap_or_else(|e| e.into_inner());
        instances.get(&id).cloned().ok_or_else(|| not_found(&id))?
    };
    let golden = golden_doc_texts(&updated, &state.chunks).map_err(AppError::from)?;
    updated.apply_decision(&decision, &golden).map_err(AppError::from)?;
    store.record(decision)?;
    let response = view(&state, &updated, store.history());
    state.instances.write().unwrap_or_else(|e| e.into_inner()).insert(id, updated);
    Ok(Json(response))
}

async fn stats(State(state): State<Shared>) -> ApiResult<ReviewStats> {
    let store = state.store.lock().unwrap_or_else(|e| e.into_inner());
    Ok(Json(store.stats(&state.sample)))
}

#[derive(Debug, Default, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub instances: usize,
    pub valid: usize,
    pub flagged: usize,
    pub failed: usize,
    pub review_sample: usize,
    pub reviewed: usize,
    pub m_histogram: BTreeMap<usize, usize>,
    pub n_histogram: BTreeMap<usize, usize>,
    pub export: Option<serde_json::Value>,
}

async fn summary(State(state): State<Shared>) -> ApiResult<DatasetSummary> {
    let instances = state.instances.read().unwrap_or_else(|e| e.into_inner());
    let mut s = DatasetSummary { instances: instances.len(), review_sample: state.sample.len(), ..Default::default() };
    for inst in instances.values() {
        match inst.status {
            InstanceStatus::Valid => s.valid += 1,
            InstanceStatus::Flagged => s.flagged += 1,
            InstanceStatus::Failed | InstanceStatus::Pending => s.failed += 1,
        }
        *s.m_histogram.entry(inst.m()).or_default() += 1;
        *s.n_histogram.entry(inst.n()).or_default() += 1;
    }
    s.reviewed = state
        .sample
        .iter()
        .filter(|id| instances.get(*id).is_some_and(|i| i.review_status != ReviewStatus::Unreviewed))
        .count();
    if let Some(path) = state.export_meta.as_deref().filter(|p| p.exists()) {
        let meta: ExportMeta = io::read_json(path)?;
        s.export = Some(json!({
            "summary": meta.summary,
            "seed": meta.seed,
            "hyperparameters": meta.hyperparameters,
            "training_entries": meta.training_entries,
            "validation_entries": meta.validation_entries,
            "dataset_sha256": meta.dataset_sha256,
        }));
    }
    Ok(Json(s))
}

/// Binds `addr` and serves until interrupted.
pub fn serve(state: ServiceState, addr: &str, static_dir: Option<&Path>) -> AppResult<()> {
    let addr: SocketAddr = addr.parse().map_err(|e| AppError::Config(format!("bind address `{addr}`: {e}")))?;
    let app = router(Arc::new(state), static_dir);
    let runtime = tokio::runtime::Runtime::new().map_err(|e| AppError::io("tokio runtime", e))?;
    runtime.block_on(async move {
        let listener =
            tokio::net::TcpListener::bind(addr).await.map_err(|e| AppError::io(format!("bind {addr}"), e))?;
        log::info!("listening on http://{addr}");
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .map_err(|e| AppError::io("serve", e))
    })
}
