//! The slice-management interface: a small JSON-over-HTTP service wrapping
//! the slice engine.
//!
//! Endpoints (schema v1):
//! - `POST   /slices`      create a slice, responds 201 with the record
//! - `GET    /slices/{id}` fetch a record
//! - `PATCH  /slices/{id}` update bandwidth and/or attendees
//! - `DELETE /slices/{id}` decommission
//! - `GET    /stats`       latest statistics snapshot
//!
//! All mutations funnel through the engine's single writer; reads serve from
//! shared snapshots. Every error response carries a machine-readable code and
//! a human message: `{"error": {"code": "...", "message": "..."}}`.
//!
//! Status mapping: 400 malformed/invalid request, 404 unknown slice,
//! 409 infeasible embedding/placement (or a decommissioned target),
//! 503 backend unavailable.

use std::net::SocketAddr;
use std::sync::{Arc, RwLock, RwLockReadGuard, RwLockWriteGuard};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use serde::Serialize;

use holoslice_core::monitor::{AdapterError, StatsSnapshot};
use holoslice_core::slice::{
    SliceEngine, SliceError, SliceId, SliceRecord, SliceRequest, SliceUpdate,
};

pub const DEFAULT_ADDR: &str = "127.0.0.1:8080";
/// Environment variable overriding the listen address.
pub const ADDR_ENV: &str = "HOLOSLICE_ADDR";

pub type SharedEngine = Arc<RwLock<SliceEngine>>;

pub fn shared(engine: SliceEngine) -> SharedEngine {
    Arc::new(RwLock::new(engine))
}

#[derive(Debug, Serialize)]
struct ErrorBody {
    error: ErrorDetail,
}

#[derive(Debug, Serialize)]
struct ErrorDetail {
    code: &'static str,
    message: String,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
        }
    }

    fn malformed(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, "malformed_request", message)
    }

    fn internal(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (
            self.status,
            Json(ErrorBody {
                error: ErrorDetail {
                    code: self.code,
                    message: self.message,
                },
            }),
        )
            .into_response()
    }
}

impl From<SliceError> for ApiError {
    fn from(err: SliceError) -> Self {
        let message = err.to_string();
        match err {
            SliceError::InvalidRequest(_) => {
                ApiError::new(StatusCode::BAD_REQUEST, "invalid_request", message)
            }
            SliceError::UnknownProgram(_) => {
                ApiError::new(StatusCode::BAD_REQUEST, "unknown_program", message)
            }
            SliceError::UnknownSlice(_) => {
                ApiError::new(StatusCode::NOT_FOUND, "unknown_slice", message)
            }
            SliceError::NotActive(_) => {
                ApiError::new(StatusCode::CONFLICT, "slice_not_active", message)
            }
            SliceError::InfeasibleEmbedding { .. }
            | SliceError::NoFeasiblePlacement(_)
            | SliceError::TagsExhausted => {
                ApiError::new(StatusCode::CONFLICT, "infeasible", message)
            }
            SliceError::Adapter(AdapterError::Unavailable) => ApiError::new(
                StatusCode::SERVICE_UNAVAILABLE,
                "backend_unavailable",
                message,
            ),
            SliceError::Adapter(_) => ApiError::internal(message),
        }
    }
}

impl From<AdapterError> for ApiError {
    fn from(err: AdapterError) -> Self {
        match err {
            AdapterError::Unavailable => ApiError::new(
                StatusCode::SERVICE_UNAVAILABLE,
                "backend_unavailable",
                err.to_string(),
            ),
            other => ApiError::internal(other.to_string()),
        }
    }
}

fn read_engine(engine: &SharedEngine) -> Result<RwLockReadGuard<'_, SliceEngine>, ApiError> {
    engine
        .read()
        .map_err(|_| ApiError::internal("engine lock poisoned"))
}

fn write_engine(engine: &SharedEngine) -> Result<RwLockWriteGuard<'_, SliceEngine>, ApiError> {
    engine
        .write()
        .map_err(|_| ApiError::internal("engine lock poisoned"))
}

fn parse_id(raw: &str) -> Result<SliceId, ApiError> {
    raw.parse::<u64>()
        .map(SliceId)
        .map_err(|_| ApiError::malformed(format!("slice id {raw:?} is not an integer")))
}

async fn create_slice(
    State(engine): State<SharedEngine>,
    payload: Result<Json<SliceRequest>, JsonRejection>,
) -> Result<(StatusCode, Json<SliceRecord>), ApiError> {
    let Json(request) = payload.map_err(|e| ApiError::malformed(e.body_text()))?;
    let record = write_engine(&engine)?.create_slice(request)?;
    Ok((StatusCode::CREATED, Json(record)))
}

async fn get_slice(
    State(engine): State<SharedEngine>,
    Path(id): Path<String>,
) -> Result<Json<SliceRecord>, ApiError> {
    let id = parse_id(&id)?;
    let engine = read_engine(&engine)?;
    let record = engine.get_slice(id).ok_or(SliceError::UnknownSlice(id))?;
    Ok(Json(record.clone()))
}

async fn update_slice(
    State(engine): State<SharedEngine>,
    Path(id): Path<String>,
    payload: Result<Json<SliceUpdate>, JsonRejection>,
) -> Result<Json<SliceRecord>, ApiError> {
    let id = parse_id(&id)?;
    let Json(update) = payload.map_err(|e| ApiError::malformed(e.body_text()))?;
    let record = write_engine(&engine)?.update_slice(id, update)?;
    Ok(Json(record))
}

async fn delete_slice(
    State(engine): State<SharedEngine>,
    Path(id): Path<String>,
) -> Result<Json<SliceRecord>, ApiError> {
    let id = parse_id(&id)?;
    let record = write_engine(&engine)?.delete_slice(id)?;
    Ok(Json(record))
}

async fn stats(State(engine): State<SharedEngine>) -> Result<Json<StatsSnapshot>, ApiError> {
    let snapshot = write_engine(&engine)?.collect_stats()?;
    Ok(Json(snapshot))
}

pub fn router(engine: SharedEngine) -> Router {
    Router::new()
        .route("/slices", axum::routing::post(create_slice))
        .route(
            "/slices/{id}",
            get(get_slice).patch(update_slice).delete(delete_slice),
        )
        .route("/stats", get(stats))
        .with_state(engine)
}

/// Resolve the listen address: explicit flag, then `HOLOSLICE_ADDR`, then the
/// default.
pub fn resolve_addr(flag: Option<&str>) -> Result<SocketAddr, String> {
    let raw = match flag {
        Some(addr) => addr.to_owned(),
        None => std::env::var(ADDR_ENV).unwrap_or_else(|_| DEFAULT_ADDR.to_owned()),
    };
    raw.parse()
        .map_err(|e| format!("invalid listen address {raw:?}: {e}"))
}

/// Serve the management interface on an already-bound listener.
pub async fn serve_on(
    listener: tokio::net::TcpListener,
    engine: SharedEngine,
) -> std::io::Result<()> {
    axum::serve(listener, router(engine)).await
}

/// Bind and serve the management interface.
pub async fn serve(addr: SocketAddr, engine: SharedEngine) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    serve_on(listener, engine).await
}
