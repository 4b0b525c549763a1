//! HTTP/JSON front end over one road network.
//!
//! | method | path        | body                | reply                 |
//! |--------|-------------|---------------------|-----------------------|
//! | GET    | `/health`   |                     | `{"status": "ok"}`    |
//! | GET    | `/network`  |                     | `NetworkDocument`     |
//! | POST   | `/diagnose` | `DiagnoseRequest`   | `DiagnoseResponse`    |
//! | POST   | `/solve`    | `SolveRequest`      | `SolveResponse`       |
//! | POST   | `/explain`  | `ExplainRequest`    | `ExplainResponse`     |
//!
//! Failures reply with an `ErrorBody`: 400 for malformed input or an invalid
//! network (with the violations), 422 when the flow cannot be determined
//! (with the diagnosis) or the observations are inconsistent, 404 for an
//! unknown component.

use axum::body::Bytes;
use axum::extract::State;
use axum::http::{header, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use sensorflow_core::api::{self, ErrorBody};
use sensorflow_core::{NetworkDocument, RoadNetwork};
use serde::de::DeserializeOwned;
use serde::Serialize;
use std::net::SocketAddr;
use std::sync::Arc;
use tokio::net::TcpListener;
use tower_http::cors::{AllowOrigin, CorsLayer};

pub const DEFAULT_PORT: u16 = 8787;

/// The loaded network, shared read-only by every request.
#[derive(Clone)]
pub struct AppState {
    network: Arc<RoadNetwork>,
}

impl AppState {
    pub fn new(net: RoadNetwork) -> Self {
        AppState { network: Arc::new(net) }
    }

    fn current(&self) -> Arc<RoadNetwork> {
        self.network.clone()
    }
}

/// Wrapper turning an [`ErrorBody`] into an HTTP response.
pub struct ApiError(pub ErrorBody);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        tracing::debug!(kind = ?self.0.kind, "{}", self.0.message);
        let status = StatusCode::from_u16(self.0.status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self.0)).into_response()
    }
}

impl From<ErrorBody> for ApiError {
    fn from(e: ErrorBody) -> Self {
        ApiError(e)
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

/// Cross-origin policy. `Local` admits browser pages served from localhost
/// or 127.0.0.1 on any port.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum CorsPolicy {
    Off,
    #[default]
    Local,
    Any,
}

fn is_local_origin(origin: &[u8]) -> bool {
    let Ok(origin) = std::str::from_utf8(origin) else {
        return false;
    };
    let host = origin
        .strip_prefix("http://")
        .or_else(|| origin.strip_prefix("https://"))
        .unwrap_or("");
    let host = host.split(':').next().unwrap_or("");
    matches!(host, "localhost" | "127.0.0.1")
}

pub fn router(state: AppState, cors: CorsPolicy) -> Router {
    let router = Router::new()
        .route("/health", get(health))
        .route("/network", get(get_network))
        .route("/diagnose", post(diagnose))
        .route("/solve", post(solve))
        .route("/explain", post(explain))
        .with_state(state);
    match cors {
        CorsPolicy::Off => router,
        CorsPolicy::Any => router.layer(CorsLayer::permissive()),
        CorsPolicy::Local => router.layer(
            CorsLayer::new()
                .allow_origin(AllowOrigin::predicate(|origin, _| is_local_origin(origin.as_bytes())))
                .allow_methods([Method::GET, Method::POST])
                .allow_headers([header::CONTENT_TYPE]),
        ),
    }
}

/// Serves until ctrl-c.
pub async fn serve(listener: TcpListener, router: Router) -> std::io::Result<()> {
    tracing::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

/// Binds an ephemeral local port and serves in the background. Returns the
/// bound address.
pub async fn spawn_local(net: RoadNetwork) -> std::io::Result<SocketAddr> {
    let listener = TcpListener::bind(("127.0.0.1", 0)).await?;
    let addr = listener.local_addr()?;
    let app = router(AppState::new(net), CorsPolicy::Off);
    tokio::spawn(async move { axum::serve(listener, app).await });
    Ok(addr)
}

fn parse<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError(ErrorBody::bad_request(format!("invalid request body: {e}"))))
}

/// Runs exact arithmetic off the async workers.
async fn compute<T, F>(state: &AppState, f: F) -> ApiResult<T>
where
    T: Serialize + Send + 'static,
    F: FnOnce(&RoadNetwork) -> Result<T, ErrorBody> + Send + 'static,
{
    let net = state.current();
    let out = tokio::task::spawn_blocking(move || f(&net))
        .await
        .map_err(|e| ApiError(ErrorBody::bad_request(format!("computation failed: {e}"))))?;
    Ok(Json(out?))
}

async fn health() -> Json<serde_json::Value> {
    Json(serde_json::json!({ "status": "ok" }))
}

async fn get_network(State(state): State<AppState>) -> Json<NetworkDocument> {
    Json(NetworkDocument::from_network(&state.current()))
}

async fn diagnose(State(state): State<AppState>, body: Bytes) -> ApiResult<api::DiagnoseResponse> {
    let req: api::DiagnoseRequest = parse(&body)?;
    compute(&state, move |net| api::diagnose(net, &req)).await
}

async fn solve(State(state): State<AppState>, body: Bytes) -> ApiResult<api::SolveResponse> {
    let req: api::SolveRequest = parse(&body)?;
    compute(&state, move |net| api::solve(net, &req)).await
}

async fn explain(State(state): State<AppState>, body: Bytes) -> ApiResult<api::ExplainResponse> {
    let req: api::ExplainRequest = parse(&body)?;
    compute(&state, move |net| api::explain(net, &req)).await
}

#[cfg(test)]
mod tests {
    use super::is_local_origin;

    #[test]
    fn local_origins() {
        assert!(is_local_origin(b"http://localhost:3000"));
        assert!(is_local_origin(b"http://127.0.0.1"));
        assert!(!is_local_origin(b"http://localhost.evil.com"));
        assert!(!is_local_origin(b"https://example.com"));
    }
}
