use sensorflow_core::api::{DiagnoseResponse, ErrorBody, ErrorKind, ExplainResponse, SolveRequest, SolveResponse};
use sensorflow_core::{fixtures, FlowDocument, NetworkDocument, Verdict};
use serde_json::json;
use std::net::SocketAddr;

async fn start(net: sensorflow_core::RoadNetwork) -> (SocketAddr, reqwest::Client) {
    let addr = sensorflow_service::spawn_local(net).await.unwrap();
    (addr, reqwest::Client::new())
}

async fn start_six_vertex() -> (SocketAddr, reqwest::Client) {
    start(fixtures::six_vertex_network()).await
}

fn url(addr: SocketAddr, path: &str) -> String {
    format!("http://{addr}{path}")
}

#[tokio::test]
async fn health_and_network() {
    let (addr, client) = start_six_vertex().await;
    let health: serde_json::Value = client
        .get(url(addr, "/health"))
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    assert_eq!(health["status"], "ok");
    let doc: NetworkDocument = client
        .get(url(addr, "/network"))
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    assert_eq!(doc.network().unwrap(), fixtures::six_vertex_network());
}

#[tokio::test]
async fn diagnose_six_vertex() {
    let (addr, client) = start_six_vertex().await;
    let res = client
        .post(url(addr, "/diagnose"))
        .json(&json!({"monitored": ["a"]}))
        .send()
        .await
        .unwrap();
    assert_eq!(res.status(), 200);
    let body: DiagnoseResponse = res.json().await.unwrap();
    assert_eq!(body.overall, Verdict::NotCalculable);
    assert_eq!(body.components[0].min_cut_size, 1);
}

#[tokio::test]
async fn solve_six_vertex_is_refused_with_422() {
    let (addr, client) = start_six_vertex().await;
    let net = fixtures::six_vertex_network();
    let req = SolveRequest::from_placement(&net, &fixtures::six_vertex_placement(&net));
    let res = client.post(url(addr, "/solve")).json(&req).send().await.unwrap();
    assert_eq!(res.status(), 422);
    let body: ErrorBody = res.json().await.unwrap();
    assert_eq!(body.kind, ErrorKind::NotCalculable);
    assert!(body.diagnosis.is_some());
}

#[tokio::test]
async fn solve_pentagon() {
    let net = fixtures::pentagon_network();
    let (addr, client) = start(net.clone()).await;
    let req = SolveRequest::from_placement(&net, &fixtures::pentagon_placement(&net));
    let res = client.post(url(addr, "/solve")).json(&req).send().await.unwrap();
    assert_eq!(res.status(), 200);
    let body: SolveResponse = res.json().await.unwrap();
    assert_eq!(
        body.flow,
        FlowDocument::from_state(&net, &fixtures::pentagon_ground_truth(&net))
    );
}

#[tokio::test]
async fn invalid_network_is_rejected_with_violations() {
    let one_way = NetworkDocument::parse(r#"{"vertices": ["x", "y"], "arcs": [{"tail": "x", "head": "y"}]}"#)
        .unwrap()
        .network()
        .unwrap();
    let (addr, client) = start(one_way).await;
    let res = client
        .post(url(addr, "/diagnose"))
        .json(&json!({"monitored": []}))
        .send()
        .await
        .unwrap();
    assert_eq!(res.status(), 400);
    let body: ErrorBody = res.json().await.unwrap();
    assert!(body.violations.iter().any(|v| v.to_string().contains("two-way")));
}

#[tokio::test]
async fn monitoring_everything_leaves_no_components() {
    let (addr, client) = start_six_vertex().await;
    let res = client
        .post(url(addr, "/diagnose"))
        .json(&json!({"monitored": ["a", "b", "c", "d", "e", "f"]}))
        .send()
        .await
        .unwrap();
    let body: DiagnoseResponse = res.json().await.unwrap();
    assert_eq!(body.overall, Verdict::Calculable);
    assert!(body.components.is_empty());
}

#[tokio::test]
async fn identical_concurrent_requests_agree() {
    let (addr, client) = start_six_vertex().await;
    let send = || {
        client
            .post(url(addr, "/explain"))
            .json(&json!({"monitored": ["a"], "component": 0}))
            .send()
    };
    let (a, b) = tokio::join!(send(), send());
    let a: serde_json::Value = a.unwrap().json().await.unwrap();
    let b: serde_json::Value = b.unwrap().json().await.unwrap();
    assert_eq!(a, b);
}

#[tokio::test]
async fn malformed_body_is_a_bad_request() {
    let (addr, client) = start_six_vertex().await;
    let res = client
        .post(url(addr, "/diagnose"))
        .header("content-type", "application/json")
        .body("{not json")
        .send()
        .await
        .unwrap();
    assert_eq!(res.status(), 400);
    let body: ErrorBody = res.json().await.unwrap();
    assert_eq!(body.kind, ErrorKind::BadRequest);
}

#[tokio::test]
async fn explain_and_missing_component() {
    let (addr, client) = start_six_vertex().await;
    let res = client
        .post(url(addr, "/explain"))
        .json(&json!({"monitored": ["a"], "component": 0}))
        .send()
        .await
        .unwrap();
    let body: ExplainResponse = res.json().await.unwrap();
    assert_eq!(body.certificate.zero_rows, ["b", "c"]);
    let res = client
        .post(url(addr, "/explain"))
        .json(&json!({"monitored": ["a"], "component": 3}))
        .send()
        .await
        .unwrap();
    assert_eq!(res.status(), 404);
}

#[tokio::test]
async fn local_origins_get_cors_headers() {
    use sensorflow_service::{router, AppState, CorsPolicy};
    let listener = tokio::net::TcpListener::bind(("127.0.0.1", 0)).await.unwrap();
    let addr = listener.local_addr().unwrap();
    let app = router(AppState::new(fixtures::six_vertex_network()), CorsPolicy::Local);
    tokio::spawn(async move { axum_serve(listener, app).await });
    let client = reqwest::Client::new();
    let allowed = |origin: &'static str| {
        let client = client.clone();
        async move {
            let res = client
                .get(url(addr, "/health"))
                .header("origin", origin)
                .send()
                .await
                .unwrap();
            res.headers()
                .get("access-control-allow-origin")
                .map(|v| v.to_str().unwrap().to_string())
        }
    };
    assert_eq!(
        allowed("http://localhost:5173").await.as_deref(),
        Some("http://localhost:5173")
    );
    assert_eq!(allowed("https://example.com").await, None);
}

async fn axum_serve(listener: tokio::net::TcpListener, app: axum::Router) {
    axum::serve(listener, app).await.unwrap();
}
