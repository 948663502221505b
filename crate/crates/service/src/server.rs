//! HTTP API for the coach console.

use std::collections::{HashMap, VecDeque};
use std::net::SocketAddr;
use std::sync::{Arc, Mutex, RwLock};

use axum::extract::{Path, Request, State};
use axum::http::{header, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::Utc;
use coachqa_core::corpus::Passage;
use coachqa_core::reader::AnswerSpan;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::Config;
use crate::engine::{Engine, HitView};
use crate::logs::{read_log, AskRecord, CoachAction, FeedbackRecord, JsonlLog, LoggedHit};
use crate::ServiceError;

const LATENCY_WINDOW: usize = 10_000;

#[derive(Debug, Default)]
struct Metrics {
    asks: u64,
    answered: u64,
    latencies: VecDeque<u64>,
}

impl Metrics {
    fn record(&mut self, answered: bool, latency_ms: u64) {
        self.asks += 1;
        self.answered += answered as u64;
        if self.latencies.len() == LATENCY_WINDOW {
            self.latencies.pop_front();
        }
        self.latencies.push_back(latency_ms);
    }

    fn snapshot(&self) -> MetricsView {
        let mut sorted: Vec<u64> = self.latencies.iter().copied().collect();
        sorted.sort_unstable();
        let pct = |p: f64| -> Option<u64> {
            if sorted.is_empty() {
                return None;
            }
            // Nearest-rank percentile.
            let rank = ((p * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
            Some(sorted[rank - 1])
        };
        MetricsView {
            asks_served: self.asks,
            answered: self.answered,
            answer_rate: if self.asks == 0 { 0.0 } else { self.answered as f64 / self.asks as f64 },
            latency_p50_ms: pct(0.50),
            latency_p95_ms: pct(0.95),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsView {
    pub asks_served: u64,
    pub answered: u64,
    pub answer_rate: f64,
    pub latency_p50_ms: Option<u64>,
    pub latency_p95_ms: Option<u64>,
}

/// Shared server state. The engine sits behind a lock only long enough to
/// clone its `Arc`, so a request keeps using the engine it started with
/// even if a rebuild swaps in a new one meanwhile.
pub struct AppState {
    config: Config,
    engine: RwLock<Option<Arc<Engine>>>,
    // question_id -> served answer text, rebuilt from the ask log at startup.
    served: Mutex<HashMap<String, Option<String>>>,
    // question ids that already received feedback.
    answered_feedback: Mutex<HashMap<String, CoachAction>>,
    ask_log: JsonlLog<AskRecord>,
    feedback_log: JsonlLog<FeedbackRecord>,
    metrics: Mutex<Metrics>,
    rebuild_lock: tokio::sync::Mutex<()>,
}

impl AppState {
    /// Opens the logs under `config.log_dir` and replays them. The engine
    /// starts empty; see [`AppState::install`].
    pub fn open(config: Config) -> Result<Self, ServiceError> {
        let ask_path = config.ask_log_path();
        let feedback_path = config.feedback_log_path();
        let served = read_log::<AskRecord>(&ask_path)?
            .into_iter()
            .map(|a| (a.question_id, a.answer.map(|s| s.text)))
            .collect();
        let answered_feedback = read_log::<FeedbackRecord>(&feedback_path)?
            .into_iter()
            .map(|f| (f.question_id, f.coach_action))
            .collect();
        Ok(AppState {
            ask_log: JsonlLog::open(ask_path)?,
            feedback_log: JsonlLog::open(feedback_path)?,
            config,
            engine: RwLock::new(None),
            served: Mutex::new(served),
            answered_feedback: Mutex::new(answered_feedback),
            metrics: Mutex::new(Metrics::default()),
            rebuild_lock: tokio::sync::Mutex::new(()),
        })
    }

    pub fn config(&self) -> &Config {
        &self.config
    }

    /// Publishes a new engine; in-flight requests finish on the old one.
    pub fn install(&self, engine: Engine) {
        let engine = Arc::new(engine);
        tracing::info!(version = engine.version(), "engine installed");
        *self.engine.write().unwrap_or_else(|p| p.into_inner()) = Some(engine);
    }

    pub fn engine(&self) -> Option<Arc<Engine>> {
        self.engine.read().unwrap_or_else(|p| p.into_inner()).clone()
    }

    pub fn metrics(&self) -> MetricsView {
        self.metrics.lock().unwrap_or_else(|p| p.into_inner()).snapshot()
    }

    /// Answers, logs the exchange and registers the question id. The log
    /// line is durable before the id becomes usable for feedback.
    pub fn ask(&self, question: &str, k: usize) -> Result<AskResponse, ServiceError> {
        let engine = self.engine().ok_or(ServiceError::NotReady)?;
        let answered = engine.ask(question, k)?;
        let question_id = uuid::Uuid::new_v4().to_string();
        let record = AskRecord {
            question_id: question_id.clone(),
            timestamp: Utc::now(),
            question: question.to_string(),
            k,
            system_version: answered.system_version.clone(),
            answer: answered.answer.clone(),
            hits: answered
                .hits
                .iter()
                .map(|h| LoggedHit {
                    passage_id: h.passage_id.clone(),
                    score: h.score,
                    rank: h.rank,
                })
                .collect(),
            latency_ms: answered.latency_ms,
        };
        self.ask_log.append(&record)?;
        self.served
            .lock()
            .unwrap_or_else(|p| p.into_inner())
            .insert(question_id.clone(), answered.answer.as_ref().map(|a| a.text.clone()));
        self.metrics
            .lock()
            .unwrap_or_else(|p| p.into_inner())
            .record(answered.answer.is_some(), answered.latency_ms);
        Ok(AskResponse {
            question_id,
            answer: answered.answer,
            hits: answered.hits,
            latency_ms: answered.latency_ms,
            system_version: answered.system_version,
        })
    }

    /// Records coach feedback on a served answer; one record per question.
    pub fn feedback(&self, req: FeedbackRequest) -> Result<FeedbackRecord, ServiceError> {
        let action: CoachAction = req.coach_action.parse().map_err(ServiceError::BadRequest)?;
        let served_text = self
            .served
            .lock()
            .unwrap_or_else(|p| p.into_inner())
            .get(&req.question_id)
            .cloned()
            .ok_or_else(|| ServiceError::NotFound(format!("question id {}", req.question_id)))?;
        // Holding this lock across the append serializes feedback on the
        // same id, so a second submission cannot slip in.
        let mut given = self.answered_feedback.lock().unwrap_or_else(|p| p.into_inner());
        if given.contains_key(&req.question_id) {
            return Err(ServiceError::Conflict(format!(
                "feedback for {} was already recorded",
                req.question_id
            )));
        }
        let record = FeedbackRecord {
            edited: served_text.as_deref().unwrap_or("") != req.final_answer_text,
            question_id: req.question_id,
            coach_action: action,
            final_answer_text: req.final_answer_text,
            timestamp: Utc::now(),
        };
        self.feedback_log.append(&record)?;
        given.insert(record.question_id.clone(), action);
        Ok(record)
    }

    pub fn ask_log_path(&self) -> &std::path::Path {
        self.ask_log.path()
    }

    pub fn feedback_log_path(&self) -> &std::path::Path {
        self.feedback_log.path()
    }
}

#[derive(Debug, Clone, Deserialize)]
pub struct AskRequest {
    pub question: String,
    pub k: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AskResponse {
    pub question_id: String,
    pub answer: Option<AnswerSpan>,
    pub hits: Vec<HitView>,
    pub latency_ms: u64,
    pub system_version: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeedbackRequest {
    pub question_id: String,
    pub coach_action: String,
    #[serde(default)]
    pub final_answer_text: String,
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let status = match &self {
            ServiceError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ServiceError::NotFound(_) => StatusCode::NOT_FOUND,
            ServiceError::Conflict(_) => StatusCode::CONFLICT,
            ServiceError::NotReady => StatusCode::SERVICE_UNAVAILABLE,
            ServiceError::Unauthorized => StatusCode::UNAUTHORIZED,
            ServiceError::Core(coachqa_core::Error::Adapter { .. })
            | ServiceError::Core(coachqa_core::Error::AllReadersFailed(_)) => StatusCode::BAD_GATEWAY,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        if status.is_server_error() {
            tracing::error!("{self}");
        }
        (status, Json(json!({ "error": self.to_string() }))).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ServiceError>;

async fn ask(State(state): State<Arc<AppState>>, body: Result<Json<AskRequest>, axum::extract::rejection::JsonRejection>) -> ApiResult<AskResponse> {
    let Json(req) = body.map_err(|e| ServiceError::BadRequest(e.body_text()))?;
    let k = req.k.unwrap_or(state.config.k);
    let resp = tokio::task::spawn_blocking(move || state.ask(&req.question, k))
        .await
        .map_err(|e| ServiceError::Internal(e.to_string()))??;
    Ok(Json(resp))
}

#[derive(Serialize)]
struct FeedbackAck {
    status: &'static str,
    question_id: String,
    edited: bool,
}

async fn feedback(
    State(state): State<Arc<AppState>>,
    body: Result<Json<FeedbackRequest>, axum::extract::rejection::JsonRejection>,
) -> Result<Json<serde_json::Value>, ServiceError> {
    let Json(req) = body.map_err(|e| ServiceError::BadRequest(e.body_text()))?;
    let record = tokio::task::spawn_blocking(move || state.feedback(req))
        .await
        .map_err(|e| ServiceError::Internal(e.to_string()))??;
    Ok(Json(json!(FeedbackAck {
        status: "recorded",
        question_id: record.question_id,
        edited: record.edited,
    })))
}

async fn passage(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Passage> {
    let engine = state.engine().ok_or(ServiceError::NotReady)?;
    engine
        .store()
        .get(&id)
        .cloned()
        .map(Json)
        .ok_or_else(|| ServiceError::NotFound(format!("passage {id}")))
}

async fn health(State(state): State<Arc<AppState>>) -> Response {
    match state.engine() {
        Some(e) => Json(json!({
            "status": "ok",
            "system_version": e.version(),
            "passages": e.store().len(),
        }))
        .into_response(),
        None => (StatusCode::SERVICE_UNAVAILABLE, Json(json!({ "status": "no index loaded" }))).into_response(),
    }
}

async fn metrics(State(state): State<Arc<AppState>>) -> Json<MetricsView> {
    Json(state.metrics())
}

async fn rebuild(State(state): State<Arc<AppState>>) -> Result<Json<serde_json::Value>, ServiceError> {
    let _guard = state.rebuild_lock.lock().await;
    let s = state.clone();
    let engine = tokio::task::spawn_blocking(move || Engine::from_config(&s.config))
        .await
        .map_err(|e| ServiceError::Internal(e.to_string()))??;
    let version = engine.version().to_string();
    state.install(engine);
    Ok(Json(json!({ "status": "rebuilt", "system_version": version })))
}

async fn require_token(State(state): State<Arc<AppState>>, req: Request, next: Next) -> Response {
    if let Some(token) = &state.config.api_token {
        let ok = req
            .headers()
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "))
            .is_some_and(|t| t == token);
        if !ok {
            return ServiceError::Unauthorized.into_response();
        }
    }
    next.run(req).await
}

pub fn router(state: Arc<AppState>) -> Router {
    let protected = Router::new()
        .route("/v1/ask", post(ask))
        .route("/v1/feedback", post(feedback))
        .route("/v1/passages/{id}", get(passage))
        .route("/v1/metrics", get(metrics))
        .route("/v1/admin/rebuild", post(rebuild))
        .route_layer(middleware::from_fn_with_state(state.clone(), require_token));
    Router::new()
        .route("/v1/health", get(health))
        .merge(protected)
        .with_state(state)
}

/// Serves on `listener` until `shutdown` resolves.
pub async fn serve(
    state: Arc<AppState>,
    listener: tokio::net::TcpListener,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> Result<(), ServiceError> {
    let addr: Option<SocketAddr> = listener.local_addr().ok();
    tracing::info!(?addr, "listening");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(shutdown)
        .await
        .map_err(|e| ServiceError::Internal(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percentiles_use_nearest_rank() {
        let mut m = Metrics::default();
        assert_eq!(m.snapshot().latency_p50_ms, None);
        for l in 1..=20 {
            m.record(l % 2 == 0, l);
        }
        let s = m.snapshot();
        assert_eq!((s.asks_served, s.answered), (20, 10));
        assert_eq!(s.answer_rate, 0.5);
        assert_eq!(s.latency_p50_ms, Some(10));
        assert_eq!(s.latency_p95_ms, Some(19));
    }
}
