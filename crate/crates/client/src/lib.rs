//! Typed client for the sensorflow HTTP service.

use sensorflow_core::api::{
    DiagnoseRequest, DiagnoseResponse, ErrorBody, ExplainRequest, ExplainResponse, SolveRequest, SolveResponse,
};
use sensorflow_core::NetworkDocument;
use serde::de::DeserializeOwned;
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error("request failed: {0}")]
    Transport(#[from] reqwest::Error),
    /// The service answered with an error body.
    #[error("service returned {status}: {body}")]
    Api { status: u16, body: ErrorBody },
    #[error("unexpected reply ({status}): {text}")]
    Unexpected { status: u16, text: String },
}

impl ClientError {
    /// The service's error body, when there is one.
    pub fn body(&self) -> Option<&ErrorBody> {
        match self {
            ClientError::Api { body, .. } => Some(body),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Client {
    base: String,
    http: reqwest::Client,
}

impl Client {
    /// `base` is the service root, e.g. `http://127.0.0.1:8787`.
    pub fn new(base: impl Into<String>) -> Self {
        Client {
            base: base.into().trim_end_matches('/').to_string(),
            http: reqwest::Client::new(),
        }
    }

    pub fn base_url(&self) -> &str {
        &self.base
    }

    pub async fn health(&self) -> Result<(), ClientError> {
        let _: serde_json::Value = self.read(self.http.get(self.url("/health"))).await?;
        Ok(())
    }

    pub async fn network(&self) -> Result<NetworkDocument, ClientError> {
        self.read(self.http.get(self.url("/network"))).await
    }

    pub async fn diagnose(&self, req: &DiagnoseRequest) -> Result<DiagnoseResponse, ClientError> {
        self.post("/diagnose", req).await
    }

    pub async fn solve(&self, req: &SolveRequest) -> Result<SolveResponse, ClientError> {
        self.post("/solve", req).await
    }

    pub async fn explain(&self, req: &ExplainRequest) -> Result<ExplainResponse, ClientError> {
        self.post("/explain", req).await
    }

    fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }

    async fn post<B: Serialize, T: DeserializeOwned>(&self, path: &str, body: &B) -> Result<T, ClientError> {
        self.read(self.http.post(self.url(path)).json(body)).await
    }

    async fn read<T: DeserializeOwned>(&self, req: reqwest::RequestBuilder) -> Result<T, ClientError> {
        let res = req.send().await?;
        let status = res.status();
        let text = res.text().await?;
        if status.is_success() {
            return serde_json::from_str(&text).map_err(|_| ClientError::Unexpected {
                status: status.as_u16(),
                text,
            });
        }
        match serde_json::from_str::<ErrorBody>(&text) {
            Ok(body) => Err(ClientError::Api {
                status: status.as_u16(),
                body,
            }),
            Err(_) => Err(ClientError::Unexpected {
                status: status.as_u16(),
                text,
            }),
        }
    }
}
