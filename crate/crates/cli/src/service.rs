//! Local HTTP service over one session.
//!
//! Reads are served from an in-memory snapshot. Mutations take the writer
//! lock; after an accepted selection the session advances on a blocking
//! worker that keeps holding the lock, so a selection posted meanwhile is
//! judged against the state the advance leaves behind.

use std::collections::{BTreeSet, HashMap};
use std::io::Write;
use std::net::SocketAddr;
use std::sync::{Arc, Mutex, RwLock};

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use maskfuse_core::io::mask_png;
use maskfuse_core::preview::{candidate_grid, overlay_png};
use maskfuse_core::session::SelectOutcome;
use maskfuse_core::{Choice, Error, ManifestDir, Phase, Result, Session};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::net::TcpListener;
use tokio::sync::{Mutex as AsyncMutex, Notify, OwnedMutexGuard};

pub struct AppState {
    snapshot: RwLock<Session>,
    writer: Arc<AsyncMutex<()>>,
    foreground: ManifestDir,
    previews: Mutex<HashMap<(usize, usize), Bytes>>,
    shutdown: Notify,
}

impl AppState {
    pub fn new(session: Session) -> Result<Arc<Self>> {
        let foreground = session.foreground()?;
        Ok(Arc::new(Self {
            snapshot: RwLock::new(session),
            writer: Arc::new(AsyncMutex::new(())),
            foreground,
            previews: Mutex::new(HashMap::new()),
            shutdown: Notify::new(),
        }))
    }

    pub fn session(&self) -> Session {
        self.snapshot.read().expect("snapshot lock").clone()
    }

    fn store(&self, session: Session) {
        *self.snapshot.write().expect("snapshot lock") = session;
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionRequest {
    pub frame: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidate: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<BTreeSet<usize>>,
}

struct ApiError(StatusCode, Error);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({ "error": self.1.kind(), "message": self.1.to_string() });
        if let Some(frame) = self.1.frame() {
            body["frame"] = json!(frame);
        }
        (self.0, Json(body)).into_response()
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::WrongPhase(_) => StatusCode::CONFLICT,
            Error::InvalidSelection { .. } | Error::Validation(_) => StatusCode::UNPROCESSABLE_ENTITY,
            Error::MissingAsset(_) => StatusCode::NOT_FOUND,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError(status, e)
    }
}

fn not_found(what: String) -> ApiError {
    ApiError(StatusCode::NOT_FOUND, Error::Validation(what))
}

type ApiResult<T> = std::result::Result<T, ApiError>;

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/session", get(get_session))
        .route("/api/frames/{frame}/image", get(get_frame_image))
        .route("/api/frames/{frame}/candidates", get(get_candidates))
        .route("/api/previews/{frame}/{file}", get(get_preview))
        .route("/api/masks/{frame}/{file}", get(get_mask))
        .route("/api/selection", post(post_selection))
        .route("/api/trace", get(get_trace))
        .route("/api/shutdown", post(post_shutdown))
        .with_state(state)
}

async fn get_session(State(st): State<Arc<AppState>>) -> Json<serde_json::Value> {
    let session = st.session();
    let phase = session.phase();
    let mut body = json!({
        "phase": phase.name(),
        "frame_count": st.foreground.frame_count(),
        "pending": phase.pending(),
        "mode": session.state().config.mode,
    });
    if let Phase::Failed { reason } = phase {
        body["reason"] = json!(reason);
    }
    Json(body)
}

fn check_frame(st: &AppState, frame: usize) -> ApiResult<()> {
    if frame < st.foreground.frame_count() {
        Ok(())
    } else {
        Err(not_found(format!("no frame {frame}")))
    }
}

fn png(bytes: impl Into<Bytes>) -> Response {
    ([(header::CONTENT_TYPE, "image/png")], bytes.into()).into_response()
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, Error::Validation(e.to_string())))?
        .map_err(ApiError::from)
}

async fn get_frame_image(State(st): State<Arc<AppState>>, Path(frame): Path<usize>) -> ApiResult<Response> {
    check_frame(&st, frame)?;
    let rel = &st.foreground.manifest().frames[frame].image_path;
    let path = st.foreground.root().join(rel);
    let bytes = blocking(move || std::fs::read(&path).map_err(|e| Error::Io { path, source: e })).await?;
    Ok(png(bytes))
}

async fn get_candidates(State(st): State<Arc<AppState>>, Path(frame): Path<usize>) -> ApiResult<Response> {
    check_frame(&st, frame)?;
    Ok(Json(candidate_grid(st.foreground.manifest(), frame)?).into_response())
}

fn candidate_path(st: &AppState, frame: usize, file: &str) -> ApiResult<usize> {
    check_frame(st, frame)?;
    let index: usize = file
        .strip_suffix(".png")
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| not_found(format!("no such image {file}")))?;
    let count = st.foreground.candidate_count(frame)?;
    if index >= count {
        return Err(not_found(format!("frame {frame} has {count} candidates")));
    }
    Ok(index)
}

async fn get_preview(
    State(st): State<Arc<AppState>>,
    Path((frame, file)): Path<(usize, String)>,
) -> ApiResult<Response> {
    let index = candidate_path(&st, frame, &file)?;
    if let Some(bytes) = st.previews.lock().expect("preview cache").get(&(frame, index)) {
        return Ok(png(bytes.clone()));
    }
    let fg = st.foreground.clone();
    let bytes = blocking(move || {
        let image = fg.frame_image(frame)?.into_rgb();
        let mask = fg.candidate_mask(frame, index)?;
        overlay_png(&image, &mask, index)
    })
    .await?;
    let bytes = Bytes::from(bytes);
    st.previews
        .lock()
        .expect("preview cache")
        .insert((frame, index), bytes.clone());
    Ok(png(bytes))
}

async fn get_mask(
    State(st): State<Arc<AppState>>,
    Path((frame, file)): Path<(usize, String)>,
) -> ApiResult<Response> {
    let index = candidate_path(&st, frame, &file)?;
    let fg = st.foreground.clone();
    let bytes = blocking(move || Ok(mask_png(&fg.candidate_mask(frame, index)?))).await?;
    Ok(png(bytes))
}

async fn get_trace(State(st): State<Arc<AppState>>) -> ApiResult<Response> {
    let session = st.session();
    let trace = blocking(move || session.current_trace()).await?;
    Ok(Json(trace).into_response())
}

async fn post_shutdown(State(st): State<Arc<AppState>>) -> Json<serde_json::Value> {
    st.shutdown.notify_one();
    Json(json!({ "shutting_down": true }))
}

async fn post_selection(
    State(st): State<Arc<AppState>>,
    Json(req): Json<SelectionRequest>,
) -> ApiResult<Json<SelectionRequest>> {
    let choice = match (req.candidate, &req.labels) {
        (Some(i), None) => Choice::Candidate(i),
        (None, Some(labels)) => Choice::Labels(labels.clone()),
        _ => {
            return Err(Error::Validation(
                "selection needs exactly one of \"candidate\" or \"labels\"".into(),
            )
            .into())
        }
    };
    let frame = req.frame;
    let guard = st.writer.clone().lock_owned().await;
    let mut session = st.session();
    let (session, outcome) = blocking(move || {
        let outcome = session.select(frame, choice)?;
        Ok((session, outcome))
    })
    .await?;
    if outcome == SelectOutcome::Accepted {
        st.store(session.clone());
        spawn_advance(st.clone(), session, guard);
    }
    Ok(Json(req))
}

/// Advances `session` on a blocking worker, holding the writer lock until
/// the result is stored.
fn spawn_advance(st: Arc<AppState>, mut session: Session, guard: OwnedMutexGuard<()>) {
    tokio::spawn(async move {
        let done = tokio::task::spawn_blocking(move || {
            // errors are recorded in the session as a Failed phase
            let _ = session.advance();
            session
        })
        .await;
        if let Ok(session) = done {
            st.store(session);
        }
        drop(guard);
    });
}

/// Serves until `POST /api/shutdown` or Ctrl-C and returns the final session. A
/// session that already has its initial selection starts advancing at once.
pub async fn run(listener: TcpListener, session: Session) -> Result<Session> {
    let state = AppState::new(session)?;
    if matches!(state.session().phase(), Phase::Tracking) {
        let guard = state.writer.clone().lock_owned().await;
        spawn_advance(state.clone(), state.session(), guard);
    }
    let app = router(state.clone());
    let stop = state.clone();
    axum::serve(listener, app)
        .with_graceful_shutdown(async move {
            tokio::select! {
                _ = stop.shutdown.notified() => {}
                _ = tokio::signal::ctrl_c() => {}
            }
        })
        .await
        .map_err(|e| Error::Io { path: "<listener>".into(), source: e })?;
    // let a running advance finish before reporting
    let _ = state.writer.lock().await;
    Ok(state.session())
}

/// Binds `addr`, prints the URL, and serves on a fresh runtime.
pub fn serve_blocking(session: Session, addr: SocketAddr) -> Result<Session> {
    let runtime = tokio::runtime::Runtime::new()
        .map_err(|e| Error::Io { path: "<runtime>".into(), source: e })?;
    runtime.block_on(async move {
        let listener = TcpListener::bind(addr)
            .await
            .map_err(|e| Error::Io { path: addr.to_string().into(), source: e })?;
        let local = listener
            .local_addr()
            .map_err(|e| Error::Io { path: addr.to_string().into(), source: e })?;
        println!("listening on http://{local}");
        let _ = std::io::stdout().flush();
        run(listener, session).await
    })
}
