//! HTTP service over an immutable statistics store.
//!
//! ```text
//! POST /v1/chat         {"messages": [{"role","text"}]}  → ChatReply
//! GET  /v1/recommend    ?movie=&tag=&k=                   → {"recommendations": [...]}
//! POST /v1/score        {"input","target"}                → {"log_likelihood","backend_id"}
//! POST /v1/score_batch  {"pairs": [{"input","target"}]}   → {"log_likelihoods": [...]}
//! GET  /v1/health                                         → {"status":"ok"}
//! ```

use std::sync::Arc;

use axum::extract::{Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use crs_core::chat::{chat_respond, recommend, ChatConfig, ChatReply, ChatTurn, Recommendation};
use crs_core::scoring::{log_likelihood_repr, ScoreError, ScoreResult, SequenceScorer};
use crs_core::stats::StatsStore;
use crs_core::Execution;
use serde::{Deserialize, Serialize};

pub struct AppState {
    pub store: Arc<StatsStore>,
    pub chat: ChatConfig,
    pub scorer: Arc<dyn SequenceScorer>,
}

struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(serde_json::json!({ "error": self.1 }))).into_response()
    }
}

impl From<crs_core::Error> for ApiError {
    fn from(e: crs_core::Error) -> Self {
        let status = match e {
            crs_core::Error::UnknownMovie(_) => StatusCode::NOT_FOUND,
            crs_core::Error::Invalid(_) => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError(status, e.to_string())
    }
}

impl From<ScoreError> for ApiError {
    fn from(e: ScoreError) -> Self {
        let status = match e {
            ScoreError::Timeout(_) => StatusCode::GATEWAY_TIMEOUT,
            ScoreError::Unavailable(_) | ScoreError::Status { .. } | ScoreError::Malformed(_) => StatusCode::BAD_GATEWAY,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError(status, e.to_string())
    }
}

#[derive(Debug, Deserialize)]
pub struct ChatRequest {
    pub messages: Vec<ChatTurn>,
}

#[derive(Debug, Deserialize)]
pub struct RecommendQuery {
    pub movie: Option<String>,
    pub tag: Option<String>,
    pub k: Option<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RecommendResponse {
    pub recommendations: Vec<Recommendation>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScorePair {
    pub input: String,
    pub target: String,
}

#[derive(Debug, Deserialize)]
pub struct BatchRequest {
    pub pairs: Vec<ScorePair>,
}

#[derive(Debug, Serialize)]
pub struct BatchResponse {
    pub log_likelihoods: Vec<Repr>,
}

#[derive(Debug, Serialize)]
pub struct Repr(#[serde(with = "log_likelihood_repr")] pub f64);

async fn health() -> Json<serde_json::Value> {
    Json(serde_json::json!({ "status": "ok" }))
}

async fn chat(State(state): State<Arc<AppState>>, Json(req): Json<ChatRequest>) -> Result<Json<ChatReply>, ApiError> {
    Ok(Json(chat_respond(&req.messages, &state.store, &state.chat)?))
}

async fn recommend_handler(
    State(state): State<Arc<AppState>>,
    Query(q): Query<RecommendQuery>,
) -> Result<Json<RecommendResponse>, ApiError> {
    let movie = q.movie.as_deref().filter(|s| !s.trim().is_empty());
    let tag = q.tag.as_deref().filter(|s| !s.trim().is_empty());
    if movie.is_none() && tag.is_none() {
        return Err(ApiError(StatusCode::BAD_REQUEST, "give a movie, a tag, or both".into()));
    }
    let k = q.k.unwrap_or(10).clamp(1, 100);
    let recommendations = recommend(movie, tag, k, &state.store, &state.chat)?;
    Ok(Json(RecommendResponse { recommendations }))
}

async fn score(State(state): State<Arc<AppState>>, Json(pair): Json<ScorePair>) -> Result<Json<ScoreResult>, ApiError> {
    let scorer = state.scorer.clone();
    let result = tokio::task::spawn_blocking(move || scorer.score(&pair.input, &pair.target))
        .await
        .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))??;
    Ok(Json(result))
}

async fn score_batch(
    State(state): State<Arc<AppState>>,
    Json(req): Json<BatchRequest>,
) -> Result<Json<BatchResponse>, ApiError> {
    let scorer = state.scorer.clone();
    let pairs: Vec<(String, String)> = req.pairs.into_iter().map(|p| (p.input, p.target)).collect();
    let results = tokio::task::spawn_blocking(move || scorer.score_batch(&pairs, Execution::Parallel))
        .await
        .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
    let log_likelihoods = results
        .into_iter()
        .map(|r| r.map(|s| Repr(s.log_likelihood)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Json(BatchResponse { log_likelihoods }))
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/v1/health", get(health))
        .route("/v1/chat", post(chat))
        .route("/v1/recommend", get(recommend_handler))
        .route("/v1/score", post(score))
        .route("/v1/score_batch", post(score_batch))
        .with_state(state)
}

/// Serves until `shutdown` resolves.
pub async fn serve(
    listener: tokio::net::TcpListener,
    state: Arc<AppState>,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(state)).with_graceful_shutdown(shutdown).await
}
