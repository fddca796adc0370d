use std::time::Duration;

use reqwest::blocking::{Client, Response};
use serde::Deserialize;

use super::{LogitSource, ModelInfo, QueryContext};
use crate::error::ModelError;
use crate::types::LogitVector;

/// Environment variable holding the default server base URL.
pub const REMOTE_URL_ENV: &str = "CONTRAST_DECODE_REMOTE_URL";

/// Client for a server speaking the `/info` + `/logits` protocol.
#[derive(Debug, Clone)]
pub struct RemoteModel {
    base_url: String,
    client: Client,
    info: ModelInfo,
}

#[derive(Deserialize)]
struct LogitsResponse {
    logits: Vec<f64>,
}

impl RemoteModel {
    /// Connects and fetches the server's model info.
    pub fn connect(base_url: &str) -> Result<Self, ModelError> {
        let base_url = base_url.trim_end_matches('/').to_string();
        let client = Client::builder()
            .timeout(Duration::from_secs(60))
            .build()
            .map_err(|e| ModelError::Transport(e.to_string()))?;
        let info = remote_info(&client, &base_url)?;
        Ok(RemoteModel {
            base_url,
            client,
            info,
        })
    }

    /// Connects to the URL in [`REMOTE_URL_ENV`].
    pub fn from_env() -> Result<Self, ModelError> {
        let url = std::env::var(REMOTE_URL_ENV)
            .map_err(|_| ModelError::Transport(format!("{REMOTE_URL_ENV} is not set")))?;
        RemoteModel::connect(&url)
    }

    pub fn base_url(&self) -> &str {
        &self.base_url
    }
}

/// Fetches `GET /info`.
pub fn remote_info(client: &Client, base_url: &str) -> Result<ModelInfo, ModelError> {
    let resp = client
        .get(format!("{base_url}/info"))
        .send()
        .map_err(|e| ModelError::Transport(e.to_string()))?;
    let body = read_body(resp)?;
    let info: ModelInfo = serde_json::from_str(&body)
        .map_err(|e| ModelError::Protocol(format!("/info response: {e}")))?;
    info.validate()
        .map_err(|e| ModelError::Protocol(format!("/info response: {e}")))?;
    Ok(info)
}

fn read_body(resp: Response) -> Result<String, ModelError> {
    let status = resp.status();
    let body = resp
        .text()
        .map_err(|e| ModelError::Transport(e.to_string()))?;
    if !status.is_success() {
        return Err(ModelError::Status {
            status: status.as_u16(),
            body,
        });
    }
    Ok(body)
}

impl LogitSource for RemoteModel {
    fn info(&self) -> &ModelInfo {
        &self.info
    }

    fn next_logits(&self, ctx: &QueryContext) -> Result<LogitVector, ModelError> {
        self.info.check_context(ctx)?;
        let resp = self
            .client
            .post(format!("{}/logits", self.base_url))
            .json(ctx)
            .send()
            .map_err(|e| ModelError::Transport(e.to_string()))?;
        let body = read_body(resp)?;
        let parsed: LogitsResponse = serde_json::from_str(&body)
            .map_err(|e| ModelError::Protocol(format!("/logits response: {e}")))?;
        let logits = LogitVector::new(parsed.logits)
            .map_err(|e| ModelError::Protocol(format!("/logits response: {e}")))?;
        self.info.check_logits(&logits)?;
        Ok(logits)
    }
}
