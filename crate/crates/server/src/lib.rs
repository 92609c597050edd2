//! HTTP/JSON front end for [`hvcm_core::api`].
//!
//! Every operation is CPU-bound, so handlers hand the request to a blocking
//! thread and await the result.

use std::net::SocketAddr;

use axum::extract::rejection::JsonRejection;
use axum::extract::DefaultBodyLimit;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use hvcm_core::api::{self, ErrorBody};
use serde::de::DeserializeOwned;
use serde::Serialize;
use tokio::net::TcpListener;

/// Request bodies carry whole logs and traces.
pub const BODY_LIMIT: usize = 1 << 30;

pub struct ApiError(StatusCode, ErrorBody);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(self.1)).into_response()
    }
}

impl From<hvcm_core::Error> for ApiError {
    fn from(e: hvcm_core::Error) -> Self {
        let body = ErrorBody::from(&e);
        let status = if body.is_client_error() {
            StatusCode::UNPROCESSABLE_ENTITY
        } else {
            StatusCode::INTERNAL_SERVER_ERROR
        };
        ApiError(status, body)
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        ApiError(
            e.status(),
            ErrorBody {
                kind: "bad_request".into(),
                message: e.body_text(),
            },
        )
    }
}

async fn run<Req, Resp>(
    body: Result<Json<Req>, JsonRejection>,
    op: fn(&Req) -> hvcm_core::Result<Resp>,
) -> Result<Json<Resp>, ApiError>
where
    Req: DeserializeOwned + Send + 'static,
    Resp: Serialize + Send + 'static,
{
    let Json(req) = body?;
    let out = tokio::task::spawn_blocking(move || op(&req))
        .await
        .map_err(|e| {
            tracing::error!("worker failed: {e}");
            ApiError(
                StatusCode::INTERNAL_SERVER_ERROR,
                ErrorBody {
                    kind: "internal".into(),
                    message: e.to_string(),
                },
            )
        })??;
    Ok(Json(out))
}

async fn health() -> &'static str {
    "ok"
}

async fn simulate(
    body: Result<Json<api::SimulateRequest>, JsonRejection>,
) -> Result<Json<api::SimulateResponse>, ApiError> {
    run(body, api::simulate).await
}

async fn fit(body: Result<Json<api::FitRequest>, JsonRejection>) -> Result<Json<api::FitResponse>, ApiError> {
    run(body, api::fit_log).await
}

async fn ppc(body: Result<Json<api::PpcRequest>, JsonRejection>) -> Result<Json<api::PpcResponse>, ApiError> {
    run(body, api::ppc).await
}

async fn stats(body: Result<Json<api::StatsRequest>, JsonRejection>) -> Result<Json<api::StatsResponse>, ApiError> {
    run(body, api::stats).await
}

async fn overlap(
    body: Result<Json<api::OverlapRequest>, JsonRejection>,
) -> Result<Json<api::OverlapResponse>, ApiError> {
    run(body, api::overlap).await
}

pub fn router() -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/v1/simulate", post(simulate))
        .route("/v1/fit", post(fit))
        .route("/v1/ppc", post(ppc))
        .route("/v1/stats", post(stats))
        .route("/v1/overlap", post(overlap))
        .layer(DefaultBodyLimit::max(BODY_LIMIT))
}

/// Binds `addr` and serves in a background task. Returns the bound address,
/// which matters when the port is 0.
pub async fn spawn(addr: SocketAddr) -> std::io::Result<SocketAddr> {
    let listener = TcpListener::bind(addr).await?;
    let local = listener.local_addr()?;
    tokio::spawn(async move {
        if let Err(e) = axum::serve(listener, router()).await {
            tracing::error!("server stopped: {e}");
        }
    });
    Ok(local)
}

/// Serves until ctrl-c.
pub async fn serve(addr: SocketAddr) -> std::io::Result<()> {
    let listener = TcpListener::bind(addr).await?;
    tracing::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router())
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
