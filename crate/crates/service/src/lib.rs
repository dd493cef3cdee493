//! JSON-over-HTTP front end for the annotation protocol and for one-off
//! segmentation requests.
//!
//! | method | path | |
//! |---|---|---|
//! | POST | `/api/worker/{id}/register` | start a worker on qualification |
//! | GET | `/api/worker/{id}/next` | current task, or 204 when nothing is left |
//! | POST | `/api/worker/{id}/clicks` | `{task_id, shown_ms?, points}` |
//! | GET | `/api/worker/{id}/feedback` | qualification feedback |
//! | GET | `/api/images/{task_id}` | task image |
//! | GET | `/api/overlay/{task_id}/{role}` | accepted area of a clicked qualification image |
//! | POST | `/api/images` | ingest an image or edge map (raw bytes), returns `{ref}` |
//! | POST | `/api/segment` | GrabCut on an ingested image |
//! | GET | `/api/masks/{hash}.png` | segmentation output |
//! | GET | `/api/admin/metrics` | quality and timing aggregates |
//! | GET | `/api/admin/annotations` | every recorded annotation |

mod config;
mod error;
mod segment;

pub use config::ServiceConfig;
pub use error::{ApiError, ServiceError};
pub use segment::{resolve_ref, run_segment, sha256_hex, SegmentRequest, SegmentResponse, MAX_SIDE};

use std::collections::HashMap;
use std::future::Future;
use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tokio::net::TcpListener;
use tokio::sync::Mutex;
use xclick_core::grabcut::EnergyConfig;
use xclick_core::protocol::{AnnotationService, ErrorCode, PostedPoint};

/// Shared server state. The annotation service sits behind one lock, so
/// events are written by a single writer in request order.
pub struct AppState {
    protocol: Mutex<AnnotationService>,
    segment_cache: std::sync::Mutex<HashMap<String, SegmentResponse>>,
    energy: EnergyConfig,
    images_dir: PathBuf,
    masks_dir: PathBuf,
}

impl AppState {
    /// Creates the data directories, loads the manifests and replays the
    /// event log.
    pub fn from_config(config: &ServiceConfig) -> Result<Self, ServiceError> {
        for dir in [config.data_dir.clone(), config.images_dir(), config.masks_dir()] {
            std::fs::create_dir_all(&dir).map_err(|source| ServiceError::Io { path: dir, source })?;
        }
        let service = AnnotationService::open(config.setup()?, config.log_path())?;
        Ok(Self {
            protocol: Mutex::new(service),
            segment_cache: Default::default(),
            energy: config.energy.clone(),
            images_dir: config.images_dir(),
            masks_dir: config.masks_dir(),
        })
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/worker/{id}/register", post(register))
        .route("/api/worker/{id}/next", get(next_task))
        .route("/api/worker/{id}/clicks", post(post_clicks))
        .route("/api/worker/{id}/feedback", get(feedback))
        .route("/api/images", post(ingest))
        .route("/api/images/{task}", get(task_image))
        .route("/api/overlay/{task}/{role}", get(overlay))
        .route("/api/segment", post(segment))
        .route("/api/masks/{file}", get(mask))
        .route("/api/admin/metrics", get(metrics))
        .route("/api/admin/annotations", get(annotations))
        .layer(DefaultBodyLimit::max(64 << 20))
        .with_state(state)
}

/// Serves on `listener` until `shutdown` resolves.
pub async fn serve_on(
    listener: TcpListener,
    state: Arc<AppState>,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(state)).with_graceful_shutdown(shutdown).await
}

/// Binds the configured address and serves until Ctrl-C.
pub async fn serve(config: &ServiceConfig) -> Result<(), ServiceError> {
    let state = Arc::new(AppState::from_config(config)?);
    let addr = format!("{}:{}", config.bind, config.port);
    let listener = TcpListener::bind(&addr)
        .await
        .map_err(|source| ServiceError::Bind { addr: addr.clone(), source })?;
    log::info!("listening on {addr}");
    serve_on(listener, state, async {
        let _ = tokio::signal::ctrl_c().await;
    })
    .await
    .map_err(|source| ServiceError::Bind { addr, source })
}

fn parse<T: for<'de> Deserialize<'de>>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("request body: {e}")))
}

async fn register(State(s): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Response, ApiError> {
    s.protocol.lock().await.register(&id)?;
    Ok((StatusCode::CREATED, Json(serde_json::json!({ "worker": id }))).into_response())
}

async fn next_task(State(s): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Response, ApiError> {
    match s.protocol.lock().await.next_task(&id) {
        Ok(task) => Ok(Json(task).into_response()),
        Err(e) if e.code == ErrorCode::NoTask => Ok(StatusCode::NO_CONTENT.into_response()),
        Err(e) => Err(e.into()),
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ClicksBody {
    task_id: String,
    #[serde(default)]
    shown_ms: Option<u64>,
    points: Vec<PostedPoint>,
}

async fn post_clicks(State(s): State<Arc<AppState>>, Path(id): Path<String>, body: Bytes) -> Result<Response, ApiError> {
    let b: ClicksBody = parse(&body)?;
    let r = s.protocol.lock().await.post_clicks(&id, &b.task_id, b.shown_ms, &b.points)?;
    Ok(Json(r).into_response())
}

async fn feedback(State(s): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Response, ApiError> {
    Ok(Json(s.protocol.lock().await.feedback(&id)?).into_response())
}

fn content_type(path: &std::path::Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("png") => "image/png",
        Some("jpg" | "jpeg") => "image/jpeg",
        _ => "application/octet-stream",
    }
}

async fn send_file(path: PathBuf) -> Result<Response, ApiError> {
    let bytes = tokio::task::spawn_blocking({
        let path = path.clone();
        move || std::fs::read(path)
    })
    .await
    .map_err(|e| ApiError::internal(e.to_string()))?
    .map_err(|_| ApiError::not_found(format!("{} is missing", path.display())))?;
    Ok(([(header::CONTENT_TYPE, content_type(&path))], bytes).into_response())
}

async fn task_image(State(s): State<Arc<AppState>>, Path(task): Path<String>) -> Result<Response, ApiError> {
    let path = s.protocol.lock().await.image_path(&task)?.to_path_buf();
    send_file(path).await
}

async fn overlay(State(s): State<Arc<AppState>>, Path((task, role)): Path<(String, String)>) -> Result<Response, ApiError> {
    let role = role.parse().map_err(ApiError::bad_request)?;
    let png = s.protocol.lock().await.overlay_png(&task, role)?;
    Ok(([(header::CONTENT_TYPE, "image/png")], png).into_response())
}

#[derive(Serialize)]
struct Ingested {
    #[serde(rename = "ref")]
    reference: String,
    width: u32,
    height: u32,
}

async fn ingest(State(s): State<Arc<AppState>>, body: Bytes) -> Result<Response, ApiError> {
    let ext = match image::guess_format(&body) {
        Ok(image::ImageFormat::Png) => "png",
        Ok(image::ImageFormat::Jpeg) => "jpg",
        _ => return Err(ApiError::bad_request("expected a PNG or JPEG body")),
    };
    let reference = format!("{}.{ext}", sha256_hex(&body));
    let path = s.images_dir.join(&reference);
    let (width, height) = tokio::task::spawn_blocking(move || -> Result<(u32, u32), ApiError> {
        let img = image::load_from_memory(&body).map_err(|e| ApiError::bad_request(e.to_string()))?;
        if !path.exists() {
            std::fs::write(&path, &body).map_err(|e| ApiError::internal(e.to_string()))?;
        }
        Ok((img.width(), img.height()))
    })
    .await
    .map_err(|e| ApiError::internal(e.to_string()))??;
    Ok((StatusCode::CREATED, Json(Ingested { reference, width, height })).into_response())
}

async fn segment(State(s): State<Arc<AppState>>, body: Bytes) -> Result<Response, ApiError> {
    let req: SegmentRequest = parse(&body)?;
    let key = req.key();
    if let Some(hit) = s.segment_cache.lock().expect("cache lock").get(&key) {
        return Ok(Json(hit.clone()).into_response());
    }
    let state = s.clone();
    let resp = tokio::task::spawn_blocking(move || -> Result<SegmentResponse, ApiError> {
        let (resp, png) = run_segment(&req, &state.images_dir, &state.energy)?;
        let path = state.masks_dir.join(format!("{}.png", sha256_hex(&png)));
        if !path.exists() {
            std::fs::write(&path, &png).map_err(|e| ApiError::internal(e.to_string()))?;
        }
        Ok(resp)
    })
    .await
    .map_err(|e| ApiError::internal(e.to_string()))??;
    s.segment_cache.lock().expect("cache lock").insert(key, resp.clone());
    Ok(Json(resp).into_response())
}

async fn mask(State(s): State<Arc<AppState>>, Path(file): Path<String>) -> Result<Response, ApiError> {
    let path = resolve_ref(&s.masks_dir, &file).map_err(|_| ApiError::not_found(format!("no mask {file:?}")))?;
    send_file(path).await
}

async fn metrics(State(s): State<Arc<AppState>>) -> Response {
    Json(s.protocol.lock().await.metrics()).into_response()
}

async fn annotations(State(s): State<Arc<AppState>>) -> Response {
    Json(s.protocol.lock().await.annotations()).into_response()
}
