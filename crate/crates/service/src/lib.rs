//! HTTP API over the bevscene engine.
//!
//! Routes live under `/v1`. Sessions hold a semantic map plus its camera and
//! generator settings; every accepted edit bumps the session version, and
//! renders report the version they were produced from. Stitching runs as a
//! background job polled through `/v1/jobs/{id}`.

mod error;
mod ops;
mod state;

use std::net::SocketAddr;
use std::path::PathBuf;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use bevscene_core::bevmap::Edit;
use bevscene_core::renderer::Camera;
use serde_json::{json, Value};

pub use error::{ApiError, ApiResult};
pub use ops::{EqtQuery, RenderMeta, RenderQuery, StitchRequest, View};
pub use state::{AppState, CreateSession, Job, JobState, Session, SessionRecord, Snapshot};

pub const VERSION_HEADER: &str = "x-bevscene-version";
pub const META_HEADER: &str = "x-bevscene-meta";

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/v1/health", get(|| async { Json(json!({ "status": "ok", "version": env!("CARGO_PKG_VERSION") })) }))
        .route("/v1/sessions", post(create_session))
        .route("/v1/sessions/{id}", get(get_session))
        .route("/v1/sessions/{id}/bev", get(get_bev))
        .route("/v1/sessions/{id}/edits", put(put_edit))
        .route("/v1/sessions/{id}/camera", put(put_camera))
        .route("/v1/sessions/{id}/render", get(get_render))
        .route("/v1/sessions/{id}/stitch", post(post_stitch))
        .route("/v1/sessions/{id}/eqt", get(get_eqt))
        .route("/v1/jobs/{id}", get(get_job))
        .route("/v1/jobs/{id}/panorama", get(get_panorama))
        .with_state(state)
}

fn parse_json<T: serde::de::DeserializeOwned>(body: &[u8]) -> ApiResult<T> {
    Ok(serde_json::from_slice(body)?)
}

fn snapshot(state: &AppState, id: &str) -> ApiResult<Snapshot> {
    Ok(state.session(id)?.lock().unwrap().snapshot())
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> ApiResult<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f).await.map_err(|e| ApiError::Internal(format!("worker failed: {e}")))?
}

async fn create_session(State(state): State<AppState>, body: Bytes) -> ApiResult<(StatusCode, Json<Value>)> {
    let req: CreateSession = parse_json(&body)?;
    // Building a neural generator initializes its weights, which is not free.
    let session = blocking(move || Session::create(req)).await?;
    let summary = session.summary();
    state.insert_session(session);
    Ok((StatusCode::CREATED, Json(summary)))
}

async fn get_session(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    Ok(Json(state.session(&id)?.lock().unwrap().summary()))
}

async fn get_bev(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let snap = snapshot(&state, &id)?;
    let bytes = snap.bev.to_bytes()?;
    Ok(([(header::CONTENT_TYPE, HeaderValue::from_static("application/octet-stream"))], bytes).into_response())
}

/// Optional optimistic concurrency: `If-Match: <version>`.
fn expected_version(headers: &HeaderMap) -> ApiResult<Option<u64>> {
    headers
        .get(header::IF_MATCH)
        .map(|v| {
            v.to_str()
                .ok()
                .and_then(|s| s.trim().trim_matches('"').parse().ok())
                .ok_or_else(|| ApiError::BadRequest("If-Match must hold a session version".into()))
        })
        .transpose()
}

fn check_version(session: &Session, expected: Option<u64>) -> ApiResult<()> {
    match expected {
        Some(v) if v != session.record.version => Err(ApiError::Conflict(format!(
            "session is at version {}, request expected {v}",
            session.record.version
        ))),
        _ => Ok(()),
    }
}

async fn put_edit(
    State(state): State<AppState>,
    Path(id): Path<String>,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult<Json<Value>> {
    let session = state.session(&id)?;
    let edit = Edit::from_json(&body)?;
    let expected = expected_version(&headers)?;
    let mut s = session.lock().unwrap();
    check_version(&s, expected)?;
    s.apply(&edit)?;
    Ok(Json(s.summary()))
}

async fn put_camera(
    State(state): State<AppState>,
    Path(id): Path<String>,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult<Json<Value>> {
    let session = state.session(&id)?;
    let camera: Camera = parse_json(&body)?;
    let expected = expected_version(&headers)?;
    let mut s = session.lock().unwrap();
    check_version(&s, expected)?;
    s.set_camera(camera)?;
    Ok(Json(s.summary()))
}

async fn get_render(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<RenderQuery>,
) -> ApiResult<Response> {
    let snap = snapshot(&state, &id)?;
    let (png, meta) = blocking(move || {
        let (img, meta) = ops::render_image(&snap, &q)?;
        Ok((img.to_png(true)?, meta))
    })
    .await?;
    let meta_json = serde_json::to_string(&meta).map_err(|e| ApiError::Internal(e.to_string()))?;
    let mut resp = png.into_response();
    let h = resp.headers_mut();
    h.insert(header::CONTENT_TYPE, HeaderValue::from_static("image/png"));
    h.insert(VERSION_HEADER, HeaderValue::from(meta.version));
    h.insert(META_HEADER, HeaderValue::from_str(&meta_json).map_err(|e| ApiError::Internal(e.to_string()))?);
    Ok(resp)
}

async fn post_stitch(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<(StatusCode, Json<Value>)> {
    let snap = snapshot(&state, &id)?;
    let req: StitchRequest = if body.is_empty() { StitchRequest::default() } else { parse_json(&body)? };
    let cfg = req.config(&snap)?;
    let total = bevscene_core::stitcher::slide(&snap.bev, &cfg)?.len();
    let latent_seed = req.latent_seed.unwrap_or(snap.record.latent_seed);
    let job = state.insert_job(Job {
        id: uuid::Uuid::new_v4().to_string(),
        session: id,
        state: JobState::Queued,
        done: 0,
        total,
        report: None,
        panorama_png: None,
        error: None,
    });
    let status = job.lock().unwrap().status();
    let worker = job.clone();
    tokio::task::spawn_blocking(move || {
        worker.lock().unwrap().state = JobState::Running;
        let progress = |done: usize, total: usize| {
            let mut j = worker.lock().unwrap();
            j.done = j.done.max(done);
            j.total = total;
        };
        let result = ops::run_stitch(&snap, &cfg, latent_seed, &progress)
            .and_then(|(pano, report)| Ok((pano.to_png(true)?, report)));
        let mut j = worker.lock().unwrap();
        match result {
            Ok((png, report)) => {
                j.panorama_png = Some(png);
                j.report = Some(report);
                j.state = JobState::Done;
            }
            Err(e) => {
                tracing::warn!(job = %j.id, "stitch failed: {e:?}");
                j.error = Some(format!("{e:?}"));
                j.state = JobState::Failed;
            }
        }
    });
    Ok((StatusCode::ACCEPTED, Json(status)))
}

async fn get_job(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    Ok(Json(state.job(&id)?.lock().unwrap().status()))
}

async fn get_panorama(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let job = state.job(&id)?;
    let j = job.lock().unwrap();
    match &j.panorama_png {
        Some(png) => Ok(([(header::CONTENT_TYPE, HeaderValue::from_static("image/png"))], png.clone()).into_response()),
        None => Err(ApiError::Conflict(format!("job {id} is {:?}", j.state))),
    }
}

async fn get_eqt(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<EqtQuery>,
) -> ApiResult<Json<Value>> {
    let snap = snapshot(&state, &id)?;
    let version = snap.record.version;
    let report = blocking(move || ops::run_eqt(&snap, &q)).await?;
    Ok(Json(json!({ "version": version, "report": report, "fid": "unavailable" })))
}

/// Server settings, normally read from the environment.
#[derive(Clone, Debug)]
pub struct ServeConfig {
    pub addr: SocketAddr,
    /// Sessions are loaded from here at startup and written back on shutdown.
    pub snapshot: Option<PathBuf>,
}

impl ServeConfig {
    pub const DEFAULT_ADDR: &'static str = "127.0.0.1:8787";

    /// `BEVSCENE_ADDR` and `BEVSCENE_SNAPSHOT`.
    pub fn from_env() -> Result<Self, String> {
        let addr = std::env::var("BEVSCENE_ADDR").unwrap_or_else(|_| Self::DEFAULT_ADDR.into());
        let addr = addr.parse().map_err(|e| format!("BEVSCENE_ADDR {addr:?}: {e}"))?;
        let snapshot = std::env::var_os("BEVSCENE_SNAPSHOT").map(PathBuf::from);
        Ok(Self { addr, snapshot })
    }
}

pub fn load_snapshot(state: &AppState, path: &std::path::Path) -> Result<usize, String> {
    if !path.exists() {
        return Ok(0);
    }
    let bytes = std::fs::read(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let records: Vec<SessionRecord> = serde_json::from_slice(&bytes).map_err(|e| format!("{}: {e}", path.display()))?;
    state.restore(records).map_err(|e| format!("{e:?}"))
}

pub fn save_snapshot(state: &AppState, path: &std::path::Path) -> Result<(), String> {
    let json = serde_json::to_vec_pretty(&state.dump()).map_err(|e| e.to_string())?;
    std::fs::write(path, json).map_err(|e| format!("{}: {e}", path.display()))
}

/// Runs until Ctrl-C.
pub async fn serve(cfg: ServeConfig) -> Result<(), String> {
    let state = AppState::new();
    if let Some(path) = &cfg.snapshot {
        let n = load_snapshot(&state, path)?;
        tracing::info!("restored {n} sessions from {}", path.display());
    }
    let listener = tokio::net::TcpListener::bind(cfg.addr).await.map_err(|e| format!("bind {}: {e}", cfg.addr))?;
    tracing::info!("listening on {}", cfg.addr);
    axum::serve(listener, router(state.clone()))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| e.to_string())?;
    if let Some(path) = &cfg.snapshot {
        save_snapshot(&state, path)?;
        tracing::info!("saved sessions to {}", path.display());
    }
    Ok(())
}
