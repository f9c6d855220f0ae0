use std::net::SocketAddr;
use std::path::Path;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use tower_http::services::ServeDir;

use crate::api::{ApiError, PredictRequest, Service};

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self)).into_response()
    }
}

fn parse<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body)
        .map_err(|e| ApiError::bad_request(format!("invalid request body: {e}")))
}

type Shared = State<Arc<Service>>;

async fn predict(State(svc): Shared, body: Bytes) -> Result<Response, ApiError> {
    let req: PredictRequest = parse(&body)?;
    Ok(Json(svc.handle_predict(&req)?).into_response())
}

async fn ingest(State(svc): Shared, body: Bytes) -> Result<Response, ApiError> {
    let msg = parse(&body)?;
    Ok(Json(svc.handle_ingest(&msg)?).into_response())
}

async fn prediction(
    State(svc): Shared,
    UrlPath(index): UrlPath<String>,
) -> Result<Response, ApiError> {
    let index: u64 = index
        .parse()
        .map_err(|_| ApiError::bad_request(format!("`{index}` is not a prediction index")))?;
    Ok(Json(svc.handle_get_prediction(index)?).into_response())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PageQuery {
    from: Option<u64>,
    limit: Option<usize>,
}

async fn blocks(State(svc): Shared, Query(q): Query<PageQuery>) -> Response {
    Json(svc.handle_chain_blocks(q.from, q.limit)).into_response()
}

async fn verify(State(svc): Shared) -> Response {
    Json(svc.handle_verify()).into_response()
}

async fn report(State(svc): Shared) -> Result<Response, ApiError> {
    let body = svc.handle_report()?;
    Ok(([(header::CONTENT_TYPE, "application/json")], body).into_response())
}

async fn health(State(svc): Shared) -> Response {
    Json(svc.health()).into_response()
}

/// API routes under `/api/v1`, with `static_dir` (if any) served for every
/// other path.
pub fn router(svc: Arc<Service>, static_dir: Option<&Path>) -> Router {
    let api = Router::new()
        .route("/predict", post(predict))
        .route("/ingest", post(ingest))
        .route("/predictions/:index", get(prediction))
        .route("/chain/blocks", get(blocks))
        .route("/chain/verify", get(verify))
        .route("/report", get(report))
        .route("/health", get(health))
        .with_state(svc);
    let app = Router::new().nest("/api/v1", api);
    match static_dir {
        Some(dir) => {
            app.fallback_service(ServeDir::new(dir).append_index_html_on_directories(true))
        }
        None => app,
    }
}

/// Binds `addr` and serves until `shutdown` resolves. Returns the bound
/// address through `on_bound` so callers can use port 0.
pub async fn serve(
    app: Router,
    addr: SocketAddr,
    on_bound: impl FnOnce(SocketAddr),
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> anyhow::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    on_bound(listener.local_addr()?);
    axum::serve(listener, app)
        .with_graceful_shutdown(shutdown)
        .await?;
    Ok(())
}
