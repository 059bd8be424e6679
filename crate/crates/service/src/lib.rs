//! HTTP + JSON service for live judging sessions.
//!
//! | method | path | |
//! |---|---|---|
//! | `GET` | `/health` | liveness, never needs a token |
//! | `GET` | `/sessions` | session ids |
//! | `POST` | `/sessions` | create a session ([`api::CreateSessionRequest`]) |
//! | `GET` | `/sessions/{id}` | [`api::SessionHandle`] |
//! | `GET` | `/sessions/{id}/scale` | grade labels for the session's task |
//! | `GET` | `/sessions/{id}/summary` | per-topic inclusion and totals |
//! | `GET` | `/sessions/{id}/topics/{t}` | status, judgment history, stopping decisions |
//! | `GET` | `/sessions/{id}/topics/{t}/next` | next document; `409` once the topic is finished or discarded |
//! | `POST` | `/sessions/{id}/judgments` | new judgment |
//! | `PATCH` | `/sessions/{id}/judgments` | revision of an earlier judgment |
//! | `GET` | `/sessions/{id}/qrels` | qrels of the included topics as text |
//!
//! The qrels export sets `X-Qrels-Partial` (`true` while any topic is still
//! being judged), `X-Total-Judged`, `X-Final-Size` and `X-Included-Topics`.
//!
//! State lives under the data directory: `sessions/<id>/events.jsonl` per
//! session, replayed on start. When a token is configured every route except
//! `/health` needs `Authorization: Bearer <token>`.

pub mod api;
pub mod error;
pub mod live;

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use axum::extract::{Path as UrlPath, Request, State};
use axum::http::{header, HeaderMap, HeaderValue};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use trecdl::trec_io::{TaskKind, TopicId};

use api::{CreateSessionRequest, JudgmentRequest, Scale, SessionList, SummaryResponse, Totals, SCHEMA_VERSION};
pub use error::ServiceError;
use live::LiveSession;

pub const DATA_DIR_ENV: &str = "TRECDL_DATA_DIR";
pub const TOKEN_ENV: &str = "TRECDL_TOKEN";

#[derive(Clone, Debug)]
pub struct ServiceConfig {
    pub data_dir: PathBuf,
    pub token: Option<String>,
}

impl ServiceConfig {
    /// `TRECDL_DATA_DIR` (default `./trecdl-data`) and optional `TRECDL_TOKEN`.
    pub fn from_env() -> Self {
        Self {
            data_dir: std::env::var_os(DATA_DIR_ENV).map_or_else(|| PathBuf::from("trecdl-data"), PathBuf::from),
            token: std::env::var(TOKEN_ENV).ok().filter(|t| !t.is_empty()),
        }
    }
}

pub struct AppState {
    config: ServiceConfig,
    sessions: RwLock<BTreeMap<String, Arc<LiveSession>>>,
    /// Serialises id allocation.
    creating: Mutex<()>,
}

impl AppState {
    /// Load every session found under the data directory.
    pub fn open(config: ServiceConfig) -> Result<Arc<Self>, ServiceError> {
        std::fs::create_dir_all(config.data_dir.join("sessions"))?;
        let mut sessions = BTreeMap::new();
        for (id, dir) in live::session_dirs(&config.data_dir)? {
            sessions.insert(id, Arc::new(LiveSession::open(&dir)?));
        }
        Ok(Arc::new(Self {
            config,
            sessions: RwLock::new(sessions),
            creating: Mutex::new(()),
        }))
    }

    pub fn data_dir(&self) -> &Path {
        &self.config.data_dir
    }

    pub fn session(&self, id: &str) -> Result<Arc<LiveSession>, ServiceError> {
        self.sessions
            .read()
            .map_err(|_| ServiceError::Internal("session table poisoned".into()))?
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::NotFound(format!("no session `{id}`")))
    }

    pub fn create(&self, req: &CreateSessionRequest) -> Result<Arc<LiveSession>, ServiceError> {
        let _guard = self.creating.lock().map_err(|_| ServiceError::Internal("create lock poisoned".into()))?;
        let n = self.sessions.read().map_err(|_| ServiceError::Internal("session table poisoned".into()))?.len();
        let mut id = format!("s{:04}", n + 1);
        let root = self.config.data_dir.join("sessions");
        while root.join(&id).exists() {
            id.push('x');
        }
        let (created, corpus) = LiveSession::prepare(id.clone(), req, &self.config.data_dir)?;
        let session = Arc::new(LiveSession::create(&root.join(&id), created, corpus)?);
        self.sessions
            .write()
            .map_err(|_| ServiceError::Internal("session table poisoned".into()))?
            .insert(id, session.clone());
        Ok(session)
    }

    fn scale(&self, task: TaskKind) -> Result<Scale, ServiceError> {
        let path = self.config.data_dir.join(format!("scale-{task}.json"));
        if !path.is_file() {
            return Ok(Scale::default_for(task));
        }
        let text = std::fs::read_to_string(&path)?;
        serde_json::from_str(&text).map_err(|e| ServiceError::Internal(format!("{}: {e}", path.display())))
    }
}

/// Run blocking work (model fitting, file IO) off the async workers.
async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, ServiceError> + Send + 'static,
) -> Result<T, ServiceError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ServiceError::Internal(format!("worker failed: {e}")))?
}

type Shared = State<Arc<AppState>>;

async fn health() -> Json<serde_json::Value> {
    Json(serde_json::json!({ "schema_version": SCHEMA_VERSION, "status": "ok" }))
}

async fn list_sessions(State(app): Shared) -> Result<Json<SessionList>, ServiceError> {
    let sessions = app.sessions.read().map_err(|_| ServiceError::Internal("session table poisoned".into()))?;
    Ok(Json(SessionList {
        schema_version: SCHEMA_VERSION,
        sessions: sessions.keys().cloned().collect(),
    }))
}

async fn create_session(State(app): Shared, body: Result<Json<CreateSessionRequest>, axum::extract::rejection::JsonRejection>) -> Result<Response, ServiceError> {
    let Json(req) = body.map_err(|e| ServiceError::BadRequest(e.body_text()))?;
    let handle = blocking(move || app.create(&req)?.handle()).await?;
    Ok((axum::http::StatusCode::CREATED, Json(handle)).into_response())
}

async fn get_session(State(app): Shared, UrlPath(id): UrlPath<String>) -> Result<Response, ServiceError> {
    let s = app.session(&id)?;
    Ok(Json(blocking(move || s.handle()).await?).into_response())
}

async fn get_scale(State(app): Shared, UrlPath(id): UrlPath<String>) -> Result<Json<Scale>, ServiceError> {
    let task = app.session(&id)?.task();
    Ok(Json(app.scale(task)?))
}

async fn get_summary(State(app): Shared, UrlPath(id): UrlPath<String>) -> Result<Json<SummaryResponse>, ServiceError> {
    let s = app.session(&id)?;
    let summary = blocking(move || s.summary()).await?;
    Ok(Json(SummaryResponse {
        schema_version: SCHEMA_VERSION,
        totals: Totals::of(&summary),
        summary,
    }))
}

async fn get_topic(State(app): Shared, UrlPath((id, t)): UrlPath<(String, String)>) -> Result<Response, ServiceError> {
    let s = app.session(&id)?;
    Ok(Json(blocking(move || s.detail(&TopicId::from(t))).await?).into_response())
}

async fn next_document(State(app): Shared, UrlPath((id, t)): UrlPath<(String, String)>) -> Result<Response, ServiceError> {
    let s = app.session(&id)?;
    Ok(Json(blocking(move || s.next(&TopicId::from(t))).await?).into_response())
}

async fn judge(
    app: Arc<AppState>,
    id: String,
    body: Result<Json<JudgmentRequest>, axum::extract::rejection::JsonRejection>,
    revision: bool,
) -> Result<Response, ServiceError> {
    let Json(req) = body.map_err(|e| ServiceError::BadRequest(e.body_text()))?;
    let s = app.session(&id)?;
    Ok(Json(blocking(move || s.judge(&req, revision)).await?).into_response())
}

async fn post_judgment(
    State(app): Shared,
    UrlPath(id): UrlPath<String>,
    body: Result<Json<JudgmentRequest>, axum::extract::rejection::JsonRejection>,
) -> Result<Response, ServiceError> {
    judge(app, id, body, false).await
}

async fn patch_judgment(
    State(app): Shared,
    UrlPath(id): UrlPath<String>,
    body: Result<Json<JudgmentRequest>, axum::extract::rejection::JsonRejection>,
) -> Result<Response, ServiceError> {
    judge(app, id, body, true).await
}

async fn export_qrels(State(app): Shared, UrlPath(id): UrlPath<String>) -> Result<Response, ServiceError> {
    let s = app.session(&id)?;
    let (body, summary) = blocking(move || s.export()).await?;
    let totals = Totals::of(&summary);
    let mut headers = HeaderMap::new();
    headers.insert(header::CONTENT_TYPE, HeaderValue::from_static("text/plain; charset=utf-8"));
    let mut set = |name: &'static str, v: String| {
        headers.insert(name, HeaderValue::from_str(&v).expect("ascii header value"));
    };
    set("x-qrels-partial", totals.partial.to_string());
    set("x-total-judged", totals.total_judged.to_string());
    set("x-final-size", totals.final_size.to_string());
    set("x-included-topics", totals.included_topics.to_string());
    Ok((headers, body).into_response())
}

async fn require_token(State(app): Shared, req: Request, next: Next) -> Response {
    if let Some(token) = &app.config.token {
        let ok = req
            .headers()
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "))
            .is_some_and(|given| given == token);
        if !ok {
            return ServiceError::Unauthorized.into_response();
        }
    }
    next.run(req).await
}

pub fn router(app: Arc<AppState>) -> Router {
    let api = Router::new()
        .route("/sessions", get(list_sessions).post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/scale", get(get_scale))
        .route("/sessions/{id}/summary", get(get_summary))
        .route("/sessions/{id}/topics/{t}", get(get_topic))
        .route("/sessions/{id}/topics/{t}/next", get(next_document))
        .route("/sessions/{id}/judgments", axum::routing::post(post_judgment).patch(patch_judgment))
        .route("/sessions/{id}/qrels", get(export_qrels))
        .route_layer(middleware::from_fn_with_state(app.clone(), require_token));
    Router::new().route("/health", get(health)).merge(api).with_state(app)
}

/// Serve until Ctrl-C.
pub async fn serve(addr: SocketAddr, app: Arc<AppState>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(app))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
