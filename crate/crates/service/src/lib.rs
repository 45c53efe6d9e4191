//! Read-only HTTP API over a [`Snapshot`].
//!
//! Handlers read the current snapshot through an `Arc`; a reload builds a
//! new snapshot off to the side and swaps the pointer, so requests already
//! in flight finish on the snapshot they started with.

use std::net::SocketAddr;
use std::sync::{Arc, RwLock};

use adlsense_core::report::{parse_overlays, ReportError, Snapshot};
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderName, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::Router;
use chrono::NaiveDate;
use serde::Deserialize;
use serde_json::{json, Value};
use thiserror::Error;
use tokio::net::TcpListener;
use tower_http::cors::CorsLayer;

pub const FINGERPRINT_HEADER: &str = "x-adlsense-fingerprint";

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("cannot listen on {addr}: {source}")]
    Bind { addr: String, source: std::io::Error },
    #[error("server failed: {0}")]
    Serve(std::io::Error),
    #[error("reload failed: {0}")]
    Reload(String),
    #[error("no loader configured; snapshots can only be published directly")]
    NoLoader,
}

/// Builds a fresh snapshot, e.g. by re-reading the input files.
pub type Loader = Arc<dyn Fn() -> Result<Snapshot, String> + Send + Sync>;

#[derive(Clone, Default)]
pub struct ServiceState {
    current: Arc<RwLock<Option<Arc<Snapshot>>>>,
    loader: Option<Loader>,
}

impl ServiceState {
    pub fn new(snapshot: Option<Snapshot>, loader: Option<Loader>) -> Self {
        ServiceState {
            current: Arc::new(RwLock::new(snapshot.map(Arc::new))),
            loader,
        }
    }

    pub fn current(&self) -> Option<Arc<Snapshot>> {
        self.current.read().expect("snapshot lock").clone()
    }

    pub fn publish(&self, snapshot: Snapshot) {
        *self.current.write().expect("snapshot lock") = Some(Arc::new(snapshot));
    }

    /// Runs the loader and publishes its snapshot; the old one stays live
    /// if loading fails. Returns the new fingerprint.
    pub fn reload(&self) -> Result<String, ServiceError> {
        let loader = self.loader.as_ref().ok_or(ServiceError::NoLoader)?;
        let snapshot = loader().map_err(ServiceError::Reload)?;
        let fingerprint = snapshot.fingerprint.clone();
        self.publish(snapshot);
        Ok(fingerprint)
    }
}

#[derive(Debug)]
pub enum ApiError {
    NoSnapshot,
    BadQuery(String),
    Report(ReportError),
}

impl From<ReportError> for ApiError {
    fn from(e: ReportError) -> Self {
        ApiError::Report(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, body) = match &self {
            ApiError::NoSnapshot => (
                StatusCode::SERVICE_UNAVAILABLE,
                json!({ "error": "no_snapshot", "detail": "no data has been loaded yet" }),
            ),
            ApiError::BadQuery(detail) => (
                StatusCode::UNPROCESSABLE_ENTITY,
                json!({ "error": "invalid_parameter", "detail": detail }),
            ),
            ApiError::Report(e) => {
                let status = if e.is_not_found() {
                    StatusCode::NOT_FOUND
                } else if matches!(e, ReportError::InvalidParameter(_)) {
                    StatusCode::UNPROCESSABLE_ENTITY
                } else {
                    StatusCode::INTERNAL_SERVER_ERROR
                };
                (status, e.body())
            }
        };
        (status, axum::Json(body)).into_response()
    }
}

type ApiResult = Result<Response, ApiError>;

fn snapshot(state: &ServiceState) -> Result<Arc<Snapshot>, ApiError> {
    state.current().ok_or(ApiError::NoSnapshot)
}

fn fingerprint_header(snap: &Snapshot) -> (HeaderName, HeaderValue) {
    (
        HeaderName::from_static(FINGERPRINT_HEADER),
        HeaderValue::from_str(&snap.fingerprint).expect("hex fingerprint is a valid header"),
    )
}

fn json_response(snap: &Snapshot, body: Value) -> Response {
    (
        [
            fingerprint_header(snap),
            (header::CONTENT_TYPE, HeaderValue::from_static("application/json")),
        ],
        serde_json::to_string(&body).expect("JSON value serializes"),
    )
        .into_response()
}

fn svg_response(snap: &Snapshot, svg: String) -> Response {
    (
        [
            fingerprint_header(snap),
            (header::CONTENT_TYPE, HeaderValue::from_static("image/svg+xml")),
        ],
        svg,
    )
        .into_response()
}

/// Query parameters arrive as strings so malformed values get the JSON
/// error body instead of the extractor's plain-text rejection.
#[derive(Debug, Default, Deserialize)]
pub struct Params {
    date: Option<String>,
    k: Option<String>,
    exclude_self: Option<String>,
    factor: Option<String>,
    window: Option<String>,
    overlay: Option<String>,
}

impl Params {
    fn date(&self) -> Result<Option<NaiveDate>, ApiError> {
        self.date
            .as_deref()
            .map(|d| {
                NaiveDate::parse_from_str(d, "%Y-%m-%d")
                    .map_err(|_| ApiError::BadQuery(format!("date `{d}` is not YYYY-MM-DD")))
            })
            .transpose()
    }

    fn int(name: &str, value: &Option<String>) -> Result<Option<i64>, ApiError> {
        value
            .as_deref()
            .map(|v| {
                v.parse()
                    .map_err(|_| ApiError::BadQuery(format!("{name} `{v}` is not an integer")))
            })
            .transpose()
    }

    fn flag(&self) -> Result<bool, ApiError> {
        match self.exclude_self.as_deref() {
            None | Some("false") | Some("0") => Ok(false),
            Some("true") | Some("1") => Ok(true),
            Some(v) => Err(ApiError::BadQuery(format!("exclude_self `{v}` is not a boolean"))),
        }
    }

    fn factor(&self) -> Result<&str, ApiError> {
        self.factor
            .as_deref()
            .ok_or_else(|| ApiError::BadQuery("missing required parameter `factor`".into()))
    }
}

async fn residents(State(state): State<ServiceState>) -> ApiResult {
    let snap = snapshot(&state)?;
    Ok(json_response(&snap, snap.residents_json()))
}

async fn risk(State(state): State<ServiceState>, Path(id): Path<String>, Query(p): Query<Params>) -> ApiResult {
    let snap = snapshot(&state)?;
    let body = snap.risk_json(&id, p.date()?)?;
    Ok(json_response(&snap, body))
}

async fn profile(State(state): State<ServiceState>, Path(id): Path<String>, Query(p): Query<Params>) -> ApiResult {
    let snap = snapshot(&state)?;
    let body = snap.profile_json(&id, p.date()?)?;
    Ok(json_response(&snap, body))
}

async fn similar(State(state): State<ServiceState>, Path(id): Path<String>, Query(p): Query<Params>) -> ApiResult {
    let snap = snapshot(&state)?;
    let body = snap.similar_json(&id, p.date()?, Params::int("k", &p.k)?, p.flag()?)?;
    Ok(json_response(&snap, body))
}

async fn trend(State(state): State<ServiceState>, Path(id): Path<String>, Query(p): Query<Params>) -> ApiResult {
    let snap = snapshot(&state)?;
    let body = snap.trend_json(&id, p.factor()?)?;
    Ok(json_response(&snap, body))
}

async fn trend_svg(State(state): State<ServiceState>, Path(id): Path<String>, Query(p): Query<Params>) -> ApiResult {
    let snap = snapshot(&state)?;
    let svg = snap.trend_svg(&id, p.factor()?)?;
    Ok(svg_response(&snap, svg))
}

async fn self_similarity(
    State(state): State<ServiceState>,
    Path(id): Path<String>,
    Query(p): Query<Params>,
) -> ApiResult {
    let snap = snapshot(&state)?;
    let body = snap.self_similarity_json(&id, Params::int("window", &p.window)?)?;
    Ok(json_response(&snap, body))
}

async fn radar_svg(State(state): State<ServiceState>, Path(id): Path<String>, Query(p): Query<Params>) -> ApiResult {
    let snap = snapshot(&state)?;
    let overlays = parse_overlays(p.overlay.as_deref().unwrap_or(""))?;
    let svg = snap.radar_svg(&id, p.date()?, &overlays)?;
    Ok(svg_response(&snap, svg))
}

async fn fallback() -> Response {
    (
        StatusCode::NOT_FOUND,
        axum::Json(json!({ "error": "not_found", "detail": "no such endpoint" })),
    )
        .into_response()
}

pub fn router(state: ServiceState, cors: bool) -> Router {
    let router = Router::new()
        .route("/api/residents", get(residents))
        .route("/api/residents/{id}/risk", get(risk))
        .route("/api/residents/{id}/profile", get(profile))
        .route("/api/residents/{id}/similar", get(similar))
        .route("/api/residents/{id}/trend", get(trend))
        .route("/api/residents/{id}/trend.svg", get(trend_svg))
        .route("/api/residents/{id}/self-similarity", get(self_similarity))
        .route("/api/residents/{id}/radar.svg", get(radar_svg))
        .fallback(fallback)
        .with_state(state);
    if cors {
        router.layer(CorsLayer::permissive().expose_headers([HeaderName::from_static(FINGERPRINT_HEADER)]))
    } else {
        router
    }
}

pub async fn bind(addr: &str) -> Result<TcpListener, ServiceError> {
    TcpListener::bind(addr).await.map_err(|source| ServiceError::Bind {
        addr: addr.to_string(),
        source,
    })
}

/// Serves until Ctrl-C. On Unix, SIGHUP reloads the snapshot.
pub async fn serve(listener: TcpListener, state: ServiceState, cors: bool) -> Result<(), ServiceError> {
    let local: Option<SocketAddr> = listener.local_addr().ok();
    tracing::info!(?local, "listening");
    #[cfg(unix)]
    if state.loader.is_some() {
        tokio::spawn(reload_on_hangup(state.clone()));
    }
    axum::serve(listener, router(state, cors))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(ServiceError::Serve)
}

#[cfg(unix)]
async fn reload_on_hangup(state: ServiceState) {
    use tokio::signal::unix::{signal, SignalKind};
    let Ok(mut hangups) = signal(SignalKind::hangup()) else {
        tracing::warn!("cannot install SIGHUP handler; reload disabled");
        return;
    };
    while hangups.recv().await.is_some() {
        let state = state.clone();
        match tokio::task::spawn_blocking(move || state.reload()).await {
            Ok(Ok(fingerprint)) => tracing::info!(%fingerprint, "snapshot reloaded"),
            Ok(Err(e)) => tracing::error!("{e}"),
            Err(e) => tracing::error!("reload task panicked: {e}"),
        }
    }
}
