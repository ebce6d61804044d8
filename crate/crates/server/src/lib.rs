//! REST planning server: client registration, scripted interviews,
//! profiles, round planning, feedback and metrics.

pub mod config;
pub mod error;
pub mod state;

use std::sync::{Arc, Mutex, MutexGuard};

use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::routing::{get, post};
use axum::{Json, Router};
use precplan_core::domain::{ClientId, ClientProfile, FeedbackRecord, HardwareSpec, RoundPlan};
use precplan_core::planner::GlobalModelState;
use precplan_core::profiling::{InterviewSession, Scenario};
use serde::{Deserialize, Serialize};

pub use config::ServerConfig;
pub use error::{ApiError, JsonBody};
pub use state::{Metrics, SatisfactionStats, ServerState};

pub type SharedState = Arc<Mutex<ServerState>>;

#[derive(Debug, Serialize, Deserialize)]
pub struct ClientCreated {
    pub client_id: ClientId,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StartInterview {
    pub scenario: Scenario,
    #[serde(default)]
    pub hardware: Option<HardwareSpec>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct InterviewStarted {
    pub session_id: String,
    pub agent_message: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserMessage {
    pub text: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct AgentReply {
    pub agent_message: String,
    pub done: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanRequest {
    pub round: u64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CaseCreated {
    pub case_id: u64,
}

fn lock(state: &SharedState) -> MutexGuard<'_, ServerState> {
    // a panic mid-request leaves the state consistent enough to keep serving
    state.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
}

async fn register(
    State(state): State<SharedState>,
    JsonBody(hardware): JsonBody<HardwareSpec>,
) -> Result<(StatusCode, Json<ClientCreated>), ApiError> {
    let client_id = lock(&state).register(hardware)?;
    Ok((StatusCode::CREATED, Json(ClientCreated { client_id })))
}

async fn start_interview(
    State(state): State<SharedState>,
    Path(client_id): Path<String>,
    JsonBody(body): JsonBody<StartInterview>,
) -> Result<(StatusCode, Json<InterviewStarted>), ApiError> {
    let (session_id, agent_message) =
        lock(&state).start_interview(&ClientId::new(client_id), body.scenario, body.hardware)?;
    Ok((
        StatusCode::CREATED,
        Json(InterviewStarted {
            session_id,
            agent_message,
        }),
    ))
}

async fn post_message(
    State(state): State<SharedState>,
    Path(session_id): Path<String>,
    JsonBody(body): JsonBody<UserMessage>,
) -> Result<Json<AgentReply>, ApiError> {
    let (agent_message, done, job) = lock(&state).post_message(&session_id, &body.text)?;
    if let Some(job) = job {
        // extraction may call out to a language model; keep the lock free meanwhile
        let (job, extracted) = tokio::task::spawn_blocking(move || {
            let extracted = job.extractor.extract_factors(&job.transcript);
            (job, extracted)
        })
        .await
        .map_err(|e| ApiError::internal(format!("extraction task failed: {e}")))?;
        lock(&state).finish_initialization(&job, extracted?)?;
    }
    Ok(Json(AgentReply { agent_message, done }))
}

async fn get_session(
    State(state): State<SharedState>,
    Path(session_id): Path<String>,
) -> Result<Json<InterviewSession>, ApiError> {
    Ok(Json(lock(&state).session(&session_id)?.clone()))
}

async fn get_profile(
    State(state): State<SharedState>,
    Path(client_id): Path<String>,
) -> Result<Json<ClientProfile>, ApiError> {
    Ok(Json(lock(&state).profile(&ClientId::new(client_id))?.clone()))
}

async fn plan(
    State(state): State<SharedState>,
    JsonBody(body): JsonBody<PlanRequest>,
) -> Result<Json<RoundPlan>, ApiError> {
    Ok(Json(lock(&state).plan(body.round)?))
}

async fn aggregate(
    State(state): State<SharedState>,
    Path(round): Path<u64>,
) -> Result<Json<GlobalModelState>, ApiError> {
    Ok(Json(lock(&state).aggregate(round)?))
}

async fn feedback(
    State(state): State<SharedState>,
    Path(client_id): Path<String>,
    JsonBody(record): JsonBody<FeedbackRecord>,
) -> Result<(StatusCode, Json<CaseCreated>), ApiError> {
    let case_id = lock(&state).feedback(&ClientId::new(client_id), record)?;
    Ok((StatusCode::CREATED, Json(CaseCreated { case_id })))
}

async fn metrics(State(state): State<SharedState>) -> Json<Metrics> {
    Json(lock(&state).metrics())
}

pub fn router(state: SharedState) -> Router {
    Router::new()
        .route("/clients", post(register))
        .route("/clients/{id}/interview", post(start_interview))
        .route("/clients/{id}/profile", get(get_profile))
        .route("/clients/{id}/feedback", post(feedback))
        .route("/interview/{sid}", get(get_session))
        .route("/interview/{sid}/message", post(post_message))
        .route("/rounds/plan", post(plan))
        .route("/rounds/{round}/aggregate", post(aggregate))
        .route("/metrics", get(metrics))
        .with_state(state)
}

/// Build the router over fresh state opened from `config`.
pub fn app(config: ServerConfig) -> precplan_core::Result<Router> {
    let state = ServerState::new(config)?;
    Ok(router(Arc::new(Mutex::new(state))))
}
