//! Thin typed client for the HVCM service.

use hvcm_core::api::{
    ErrorBody, FitRequest, FitResponse, OverlapRequest, OverlapResponse, PpcRequest, PpcResponse, SimulateRequest,
    SimulateResponse, StatsRequest, StatsResponse,
};
use serde::de::DeserializeOwned;
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error("transport: {0}")]
    Transport(#[from] reqwest::Error),
    /// The service rejected the request.
    #[error("{} ({})", .body.message, .body.kind)]
    Service { status: u16, body: ErrorBody },
}

#[derive(Clone, Debug)]
pub struct Client {
    base: String,
    http: reqwest::Client,
}

impl Client {
    /// `base` is the service root, e.g. `http://127.0.0.1:8080`.
    pub fn new(base: impl Into<String>) -> Self {
        Client {
            base: base.into().trim_end_matches('/').to_string(),
            http: reqwest::Client::new(),
        }
    }

    pub fn base(&self) -> &str {
        &self.base
    }

    async fn post<Req: Serialize, Resp: DeserializeOwned>(&self, path: &str, req: &Req) -> Result<Resp, ClientError> {
        let resp = self.http.post(format!("{}{path}", self.base)).json(req).send().await?;
        let status = resp.status();
        if status.is_success() {
            Ok(resp.json().await?)
        } else {
            let body = resp.json::<ErrorBody>().await.unwrap_or_else(|e| ErrorBody {
                kind: "http".into(),
                message: format!("status {status}: {e}"),
            });
            Err(ClientError::Service {
                status: status.as_u16(),
                body,
            })
        }
    }

    pub async fn health(&self) -> Result<bool, ClientError> {
        let resp = self.http.get(format!("{}/health", self.base)).send().await?;
        Ok(resp.status().is_success())
    }

    pub async fn simulate(&self, req: &SimulateRequest) -> Result<SimulateResponse, ClientError> {
        self.post("/v1/simulate", req).await
    }

    pub async fn fit(&self, req: &FitRequest) -> Result<FitResponse, ClientError> {
        self.post("/v1/fit", req).await
    }

    pub async fn ppc(&self, req: &PpcRequest) -> Result<PpcResponse, ClientError> {
        self.post("/v1/ppc", req).await
    }

    pub async fn stats(&self, req: &StatsRequest) -> Result<StatsResponse, ClientError> {
        self.post("/v1/stats", req).await
    }

    pub async fn overlap(&self, req: &OverlapRequest) -> Result<OverlapResponse, ClientError> {
        self.post("/v1/overlap", req).await
    }
}
