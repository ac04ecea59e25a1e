//! HTTP/JSON API over the session store.
//!
//! Each session lives behind its own async mutex, so requests for one
//! session are applied in arrival order while other sessions proceed.
//! Surrogate fitting runs on the blocking pool.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use mobo_core::pareto::hypervolume;
use mobo_core::store::is_valid_id;
use mobo_core::{
    DesignParams, EhmiRendering, IssuedDesign, ObjectiveVector, Phase, QuestionnaireResponse, Session, SessionConfig,
    SessionError, SessionStore, StoreError,
};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::ServiceConfig;
use crate::error::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: u16,
    pub error: String,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostic_id: Option<String>,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        Self { status: status.as_u16(), error: code.into(), message: message.into(), diagnostic_id: None }
    }

    fn not_found(id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "session_not_found", format!("no session {id:?}"))
    }

    /// Logs the cause under a fresh id that is also sent to the client.
    fn internal(cause: impl std::fmt::Display) -> Self {
        let id = format!("{:012x}", rand::rng().random::<u64>() & 0xffff_ffff_ffff);
        tracing::error!(diagnostic_id = %id, "{cause}");
        Self {
            diagnostic_id: Some(id),
            ..Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", "numerical or storage failure")
        }
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::NotFound(id) => Self::not_found(&id),
            StoreError::AlreadyExists(id) => Self::new(StatusCode::CONFLICT, "session_exists", format!("session {id:?} exists")),
            StoreError::InvalidId(id) => Self::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_session_id", format!("{id:?}")),
            StoreError::Session(e) => e.into(),
            other => Self::internal(other),
        }
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        match e {
            SessionError::SessionFinished => Self::new(StatusCode::CONFLICT, "session_finished", e.to_string()),
            SessionError::Scale(s) => Self::new(StatusCode::UNPROCESSABLE_ENTITY, "scale_violation", s.to_string()),
            SessionError::ConfigInvalid(m) => Self::new(StatusCode::UNPROCESSABLE_ENTITY, "config_invalid", m),
            other => Self::internal(other),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self)).into_response()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignView {
    pub iteration: usize,
    pub phase: Phase,
    pub params: DesignParams,
    pub rendering: EhmiRendering,
}

impl From<&IssuedDesign> for DesignView {
    fn from(d: &IssuedDesign) -> Self {
        Self { iteration: d.iteration, phase: d.phase, params: d.design, rendering: d.design.resolve() }
    }
}

/// Snapshot returned by every session endpoint. `iteration` counts
/// completed ratings; `design` is the one awaiting a rating.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub session_id: String,
    pub iteration: usize,
    pub total_iterations: usize,
    pub phase: Phase,
    pub finished: bool,
    pub stopped_early: bool,
    pub design: Option<DesignView>,
}

impl From<&Session> for SessionView {
    fn from(s: &Session) -> Self {
        Self {
            session_id: s.id().to_string(),
            iteration: s.iteration(),
            total_iterations: s.config().total_iterations,
            phase: s.phase(),
            finished: s.is_finished(),
            stopped_early: s.stopped_early(),
            design: s.pending().map(DesignView::from),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateRequest {
    pub session_id: Option<String>,
    /// Overrides the configured acquisition seed.
    pub seed: Option<u64>,
}

/// A rating. `iteration`, when given, must name the pending design; a
/// retried rating for an already rated iteration is refused.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RatingRequest {
    pub iteration: Option<usize>,
    #[serde(flatten)]
    pub response: QuestionnaireResponse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoPointView {
    pub iteration: usize,
    pub params: DesignParams,
    pub objectives: ObjectiveVector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoView {
    pub session_id: String,
    pub reference: Vec<f64>,
    pub hypervolume: f64,
    pub points: Vec<ParetoPointView>,
}

struct Slot {
    session: Option<Session>,
    touched: Instant,
}

pub struct AppState {
    store: SessionStore,
    defaults: SessionConfig,
    expiry: Duration,
    slots: Mutex<HashMap<String, Arc<tokio::sync::Mutex<Slot>>>>,
}

impl AppState {
    pub fn new(store: SessionStore, defaults: SessionConfig, expiry: Duration) -> Self {
        Self { store, defaults, expiry, slots: Mutex::new(HashMap::new()) }
    }

    fn slot(&self, id: &str) -> Arc<tokio::sync::Mutex<Slot>> {
        let mut map = self.slots.lock().expect("slot map poisoned");
        map.entry(id.to_string())
            .or_insert_with(|| Arc::new(tokio::sync::Mutex::new(Slot { session: None, touched: Instant::now() })))
            .clone()
    }

    /// Number of sessions currently held in memory.
    pub fn resident(&self) -> usize {
        self.slots.lock().expect("slot map poisoned").len()
    }

    /// Drops sessions idle for longer than the expiry. Busy sessions are
    /// skipped.
    pub fn evict_idle(&self) -> usize {
        let mut map = self.slots.lock().expect("slot map poisoned");
        let before = map.len();
        map.retain(|_, slot| match slot.try_lock() {
            Ok(s) => s.session.is_some() && s.touched.elapsed() < self.expiry,
            Err(_) => true,
        });
        before - map.len()
    }
}

type Shared = Arc<AppState>;

pub fn router(state: Shared) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/rating", post(submit_rating))
        .route("/sessions/{id}/pareto", get(get_pareto))
        .route("/sessions/{id}/export", get(get_export))
        .with_state(state)
}

fn parse_json<T: serde::de::DeserializeOwned>(body: &[u8]) -> Result<T, ApiError> {
    serde_json::from_slice(body)
        .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_payload", e.to_string()))
}

/// Runs `f` with the session loaded, replaying its log if it is not
/// resident.
async fn with_session<T: Send + 'static>(
    state: &Shared,
    id: &str,
    f: impl FnOnce(&SessionStore, &mut Session) -> Result<T, ApiError> + Send + 'static,
) -> Result<T, ApiError> {
    if !is_valid_id(id) || !state.store.exists(id) {
        return Err(ApiError::not_found(id));
    }
    let slot = state.slot(id);
    let mut guard = slot.lock().await;
    let store = state.store.clone();
    let key = id.to_string();
    let current = guard.session.take();
    let (session, out) = tokio::task::spawn_blocking(move || {
        let mut session = match current {
            Some(s) => s,
            None => store.load(&key)?,
        };
        let mut work = session.clone();
        match f(&store, &mut work) {
            Ok(v) => Ok::<_, ApiError>((work, Ok(v))),
            Err(e) => {
                // Failed operations leave the session as it was.
                std::mem::swap(&mut work, &mut session);
                Ok((work, Err(e)))
            }
        }
    })
    .await
    .map_err(ApiError::internal)??;
    guard.session = Some(session);
    guard.touched = Instant::now();
    out
}

async fn create_session(State(state): State<Shared>, body: Bytes) -> Result<(StatusCode, Json<SessionView>), ApiError> {
    let req: CreateRequest = if body.iter().all(u8::is_ascii_whitespace) { CreateRequest::default() } else { parse_json(&body)? };
    let id = req
        .session_id
        .unwrap_or_else(|| format!("s-{:016x}", rand::rng().random::<u64>()));
    let mut config = state.defaults.clone();
    if let Some(seed) = req.seed {
        config.acquisition.seed = seed;
    }
    let slot = state.slot(&id);
    let mut guard = slot.lock().await;
    let session = state.store.create(&id, config)?;
    let view = SessionView::from(&session);
    guard.session = Some(session);
    guard.touched = Instant::now();
    Ok((StatusCode::CREATED, Json(view)))
}

async fn get_session(State(state): State<Shared>, Path(id): Path<String>) -> Result<Json<SessionView>, ApiError> {
    with_session(&state, &id, |_, s| Ok(SessionView::from(&*s))).await.map(Json)
}

async fn submit_rating(
    State(state): State<Shared>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<SessionView>, ApiError> {
    let req: RatingRequest = parse_json(&body)?;
    with_session(&state, &id, move |store, s| {
        let Some(pending) = s.pending() else {
            return Err(SessionError::SessionFinished.into());
        };
        if let Some(k) = req.iteration {
            if k <= s.iteration() {
                return Err(ApiError::new(
                    StatusCode::CONFLICT,
                    "duplicate_rating",
                    format!("iteration {k} was already rated"),
                ));
            }
            if k != pending.iteration {
                return Err(ApiError::new(
                    StatusCode::CONFLICT,
                    "iteration_mismatch",
                    format!("pending iteration is {}, got {k}", pending.iteration),
                ));
            }
        }
        store.submit(s, req.response)?;
        Ok(SessionView::from(&*s))
    })
    .await
    .map(Json)
}

async fn get_pareto(State(state): State<Shared>, Path(id): Path<String>) -> Result<Json<ParetoView>, ApiError> {
    with_session(&state, &id, |_, s| {
        let reference = mobo_core::pareto::default_reference(mobo_core::N_OBJECTIVES);
        let Some(front) = s.pareto_front() else {
            return Ok(ParetoView { session_id: s.id().into(), reference, hypervolume: 0.0, points: vec![] });
        };
        let hv = hypervolume(&front).map_err(ApiError::internal)?;
        let points = front
            .indices()
            .into_iter()
            .map(|i| {
                let o = &s.history()[i];
                ParetoPointView { iteration: o.issued.iteration, params: o.issued.design, objectives: o.objectives }
            })
            .collect();
        Ok(ParetoView { session_id: s.id().into(), reference: front.reference, hypervolume: hv, points })
    })
    .await
    .map(Json)
}

#[derive(Debug, Deserialize)]
struct ExportQuery {
    format: Option<String>,
}

/// `?format=events` returns the raw event log, timestamps included;
/// the default is the timestamp-free record export.
async fn get_export(
    State(state): State<Shared>,
    Path(id): Path<String>,
    Query(q): Query<ExportQuery>,
) -> Result<Response, ApiError> {
    let events = match q.format.as_deref() {
        None | Some("records") => false,
        Some("events") => true,
        Some(other) => {
            return Err(ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_format", format!("{other:?}")));
        }
    };
    let body = with_session(&state, &id, move |store, s| {
        if events {
            std::fs::read_to_string(store.path_of(s.id())).map_err(ApiError::internal)
        } else {
            Ok(s.export_jsonl())
        }
    })
    .await?;
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], body).into_response())
}

/// Runs the service until Ctrl-C.
pub fn serve(config: ServiceConfig) -> Result<(), CliError> {
    config.validate()?;
    let store = SessionStore::open(&config.store_dir).map_err(|e| CliError::new("store_unwritable", e.to_string()))?;
    let state = Arc::new(AppState::new(store, config.session.clone(), config.expiry()));
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::new("io", e.to_string()))?;
    runtime.block_on(async move {
        let addr = format!("{}:{}", config.bind, config.port);
        let listener = tokio::net::TcpListener::bind(&addr)
            .await
            .map_err(|e| CliError::new("bind_failed", format!("{addr}: {e}")))?;
        tracing::info!(%addr, store = %config.store_dir.display(), "listening");

        let sweeper = state.clone();
        let period = (config.expiry() / 2).clamp(Duration::from_secs(1), Duration::from_secs(60));
        tokio::spawn(async move {
            let mut tick = tokio::time::interval(period);
            loop {
                tick.tick().await;
                let n = sweeper.evict_idle();
                if n > 0 {
                    tracing::debug!(evicted = n, "expired idle sessions");
                }
            }
        });

        axum::serve(listener, router(state))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .map_err(|e| CliError::new("io", e.to_string()))
    })
}
