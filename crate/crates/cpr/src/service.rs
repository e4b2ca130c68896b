//! HTTP session service: a person answers a trained policy's questions
//! through JSON requests.
//!
//! | method | path                    | body                                   |
//! |--------|-------------------------|----------------------------------------|
//! | POST   | `/sessions`             | `{"initial_attribute": 3, "user_id": 0}` |
//! | POST   | `/sessions/{id}/answer` | `{"accept": true, "nonce": 1}`         |
//! | GET    | `/sessions/{id}`        |                                        |
//! | GET    | `/meta/attributes?q=`   |                                        |
//! | GET    | `/healthz`              |                                        |
//!
//! Every response describing a session carries a `nonce` that names the
//! pending move. Posting an answer with the nonce of the move that was
//! just answered returns the earlier response again instead of applying
//! the answer twice.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::{Duration, Instant};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use cpr_core::engine::{Outcome, Reply};
use cpr_core::{Answer, AttributeId, Conversation, EmbeddingTable, HeteroGraph, ItemId, Move, PolicyKind, Rewards, UserId};
use serde::{Deserialize, Serialize};

use crate::chat::{ask_prompt, recommend_prompt};
use crate::names::Names;

/// Everything frozen at startup.
pub struct Model {
    pub graph: HeteroGraph,
    pub emb: EmbeddingTable,
    pub policy: PolicyKind,
    pub names: Names,
    /// Stands in for anonymous users: the mean of all user embeddings.
    pub cold_user: UserId,
    pub k: usize,
    pub max_turns: u32,
}

impl Model {
    pub fn new(graph: HeteroGraph, mut emb: EmbeddingTable, policy: PolicyKind, names: Names, k: usize, max_turns: u32) -> Self {
        let cold_user = emb.append_mean_user();
        Self { graph, emb, policy, names, cold_user, k, max_turns }
    }
}

struct Live {
    conv: Conversation<'static>,
    nonce: u64,
    /// The nonce answered last and the response that answer produced.
    last: Option<(u64, SessionView)>,
    touched: Instant,
}

enum Slot {
    Live(Arc<Mutex<Live>>),
    Expired,
}

pub struct AppState {
    model: &'static Model,
    sessions: Mutex<HashMap<String, Slot>>,
    idle_timeout: Duration,
}

impl AppState {
    /// The model lives for the rest of the process.
    pub fn new(model: Model, idle_timeout: Duration) -> Arc<Self> {
        Arc::new(Self { model: Box::leak(Box::new(model)), sessions: Mutex::new(HashMap::new()), idle_timeout })
    }

    fn sessions(&self) -> MutexGuard<'_, HashMap<String, Slot>> {
        self.sessions.lock().unwrap_or_else(|e| e.into_inner())
    }

    fn sweep(&self, now: Instant) {
        for slot in self.sessions().values_mut() {
            let idle = match slot {
                Slot::Live(live) => live.try_lock().is_ok_and(|l| now.duration_since(l.touched) >= self.idle_timeout),
                Slot::Expired => false,
            };
            if idle {
                *slot = Slot::Expired;
            }
        }
    }

    fn lookup(&self, id: &str) -> Result<Arc<Mutex<Live>>, ApiError> {
        self.sweep(Instant::now());
        match self.sessions().get(id) {
            Some(Slot::Live(live)) => Ok(live.clone()),
            Some(Slot::Expired) => Err(ApiError::new(StatusCode::GONE, "session_expired", format!("session {id} expired"))),
            None => Err(ApiError::new(StatusCode::NOT_FOUND, "session_not_found", format!("no session {id}"))),
        }
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/answer", post(post_answer))
        .route("/meta/attributes", get(list_attributes))
        .route("/healthz", get(healthz))
        .with_state(state)
}

pub async fn serve(state: Arc<AppState>, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

#[derive(Debug, Serialize)]
pub struct ApiError {
    #[serde(skip)]
    status: StatusCode,
    pub code: &'static str,
    pub message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self { status, code, message: message.into() }
    }

    fn internal(e: impl std::fmt::Display) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self)).into_response()
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", e.body_text())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Named {
    pub id: u32,
    pub name: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MoveView {
    Ask { attribute: Named, prompt: String },
    Recommend { items: Vec<Named>, prompt: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    AwaitingUser,
    Succeeded,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum OutcomeView {
    Succeeded { turn: u32, items: Vec<Named> },
    Failed { reason: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub turn: u32,
    #[serde(rename = "move")]
    pub mv: MoveView,
    pub answer: Option<Answer>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub session_id: String,
    pub status: Status,
    pub nonce: u64,
    pub turn: u32,
    pub max_turns: u32,
    #[serde(rename = "move")]
    pub mv: Option<MoveView>,
    pub path: Vec<Named>,
    pub candidate_count: usize,
    pub outcome: Option<OutcomeView>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub transcript: Option<Vec<TranscriptEntry>>,
}

fn named_attribute(names: &Names, p: AttributeId) -> Named {
    Named { id: p.0, name: names.attribute(p) }
}

fn named_items(names: &Names, items: &[ItemId]) -> Vec<Named> {
    items.iter().map(|&v| Named { id: v.0, name: names.item(v) }).collect()
}

fn move_view(names: &Names, mv: &Move) -> MoveView {
    match mv {
        Move::Ask(p) => MoveView::Ask { attribute: named_attribute(names, *p), prompt: ask_prompt(names, *p) },
        Move::Recommend(items) => {
            MoveView::Recommend { items: named_items(names, items), prompt: recommend_prompt(names, items) }
        }
    }
}

fn view(model: &Model, id: &str, live: &Live, with_transcript: bool) -> SessionView {
    let conv = &live.conv;
    let names = &model.names;
    let outcome = conv.outcome().map(|o| match o {
        Outcome::Success { turn } => {
            let items = match conv.turns().last().map(|t| &t.mv) {
                Some(Move::Recommend(items)) => named_items(names, items),
                _ => Vec::new(),
            };
            OutcomeView::Succeeded { turn, items }
        }
        Outcome::Failure { reason } => OutcomeView::Failed { reason: reason.name().to_string() },
    });
    let status = match conv.outcome() {
        None => Status::AwaitingUser,
        Some(Outcome::Success { .. }) => Status::Succeeded,
        Some(Outcome::Failure { .. }) => Status::Failed,
    };
    let transcript = with_transcript.then(|| {
        let mut entries: Vec<TranscriptEntry> = conv
            .turns()
            .iter()
            .map(|t| TranscriptEntry { turn: t.turn, mv: move_view(names, &t.mv), answer: Some(t.answer) })
            .collect();
        if let Some(mv) = conv.pending() {
            entries.push(TranscriptEntry { turn: conv.state().turn() + 1, mv: move_view(names, mv), answer: None });
        }
        entries
    });
    SessionView {
        session_id: id.to_string(),
        status,
        nonce: live.nonce,
        turn: conv.state().turn(),
        max_turns: conv.max_turns(),
        mv: conv.pending().map(|m| move_view(names, m)),
        path: conv.state().path().iter().map(|&p| named_attribute(names, p)).collect(),
        candidate_count: conv.state().candidate_items().len(),
        outcome,
        transcript,
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateRequest {
    pub initial_attribute: u32,
    #[serde(default)]
    pub user_id: Option<u32>,
}

async fn create_session(
    State(state): State<Arc<AppState>>,
    body: Result<Json<CreateRequest>, JsonRejection>,
) -> Result<(StatusCode, Json<SessionView>), ApiError> {
    let Json(req) = body?;
    let model = state.model;
    let p = AttributeId(req.initial_attribute);
    if p.index() >= model.graph.attribute_count() {
        return Err(ApiError::new(StatusCode::NOT_FOUND, "unknown_attribute", format!("no attribute {}", p.0)));
    }
    if model.graph.items_with_attribute(p).map_err(ApiError::internal)?.is_empty() {
        return Err(ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            "attribute_without_items",
            format!("no item has attribute {}", p.0),
        ));
    }
    let user = match req.user_id {
        Some(u) if (u as usize) < model.graph.user_count() => UserId(u),
        Some(u) => return Err(ApiError::new(StatusCode::NOT_FOUND, "unknown_user", format!("no user {u}"))),
        None => model.cold_user,
    };
    let mut conv = Conversation::start(&model.graph, &model.emb, user, p, model.k, model.max_turns, Rewards::default())
        .map_err(ApiError::internal)?;
    conv.propose(&mut &model.policy).map_err(ApiError::internal)?;

    let id = uuid::Uuid::new_v4().simple().to_string();
    let live = Live { conv, nonce: 1, last: None, touched: Instant::now() };
    let body = view(model, &id, &live, false);
    state.sessions().insert(id, Slot::Live(Arc::new(Mutex::new(live))));
    Ok((StatusCode::CREATED, Json(body)))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnswerRequest {
    pub accept: bool,
    #[serde(default)]
    pub nonce: Option<u64>,
}

async fn post_answer(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Result<Json<AnswerRequest>, JsonRejection>,
) -> Result<Json<SessionView>, ApiError> {
    let Json(req) = body?;
    let live = state.lookup(&id)?;
    let mut live = live.lock().unwrap_or_else(|e| e.into_inner());
    live.touched = Instant::now();

    if let Some(n) = req.nonce {
        // a repeat of the last answer, including the one that ended the session
        if let Some((_, response)) = live.last.as_ref().filter(|(answered, _)| *answered == n) {
            return Ok(Json(response.clone()));
        }
        if n != live.nonce {
            return Err(ApiError::new(
                StatusCode::CONFLICT,
                "stale_nonce",
                format!("nonce {n} does not match the pending move ({})", live.nonce),
            ));
        }
    }
    if live.conv.is_finished() {
        return Err(ApiError::new(StatusCode::CONFLICT, "session_finished", "the session is already over"));
    }

    let model = state.model;
    live.conv.answer(Reply::Answer(Answer::from_bool(req.accept))).map_err(ApiError::internal)?;
    let answered = live.nonce;
    if !live.conv.is_finished() {
        live.conv.propose(&mut &model.policy).map_err(ApiError::internal)?;
        live.nonce += 1;
    }
    let response = view(model, &id, &live, false);
    live.last = Some((answered, response.clone()));
    Ok(Json(response))
}

async fn get_session(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<SessionView>, ApiError> {
    let live = state.lookup(&id)?;
    let live = live.lock().unwrap_or_else(|e| e.into_inner());
    Ok(Json(view(state.model, &id, &live, true)))
}

#[derive(Debug, Deserialize)]
pub struct AttributeQuery {
    #[serde(default)]
    pub q: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct AttributeEntry {
    pub id: u32,
    pub name: String,
    pub items: usize,
}

async fn list_attributes(
    State(state): State<Arc<AppState>>,
    Query(query): Query<AttributeQuery>,
) -> Result<Json<Vec<AttributeEntry>>, ApiError> {
    let model = state.model;
    let needle = query.q.unwrap_or_default().to_lowercase();
    let mut out = Vec::new();
    for i in 0..model.graph.attribute_count() {
        let p = AttributeId(i as u32);
        let name = model.names.attribute(p);
        if !needle.is_empty() && !name.to_lowercase().contains(&needle) {
            continue;
        }
        let items = model.graph.items_with_attribute(p).map_err(ApiError::internal)?.len();
        out.push(AttributeEntry { id: p.0, name, items });
    }
    Ok(Json(out))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub users: usize,
    pub items: usize,
    pub attributes: usize,
    pub policy: String,
}

async fn healthz(State(state): State<Arc<AppState>>) -> Json<Health> {
    let g = &state.model.graph;
    Json(Health {
        status: "ok".into(),
        users: g.user_count(),
        items: g.item_count(),
        attributes: g.attribute_count(),
        policy: state.model.policy.name().into(),
    })
}
