//! Blocking HTTP transport for the agent wire protocol.

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::wire::{CHAT_PATH, HEALTH_PATH, IMAGE_PATH};
use super::{Agent, AgentEndpoint, AgentError, ChatReply, ChatRequest, HealthReply, ImageReply, ImageTaskRequest};

const MAX_REPLY_BYTES: u64 = 256 * 1024 * 1024;

pub struct HttpAgent {
    endpoint: AgentEndpoint,
    client: ureq::Agent,
}

impl HttpAgent {
    pub fn new(endpoint: AgentEndpoint) -> Self {
        let config = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(endpoint.timeout))
            .build();
        Self {
            client: ureq::Agent::new_with_config(config),
            endpoint,
        }
    }

    fn url(&self, path: &str) -> String {
        format!("{}{}", self.endpoint.base_url.trim_end_matches('/'), path)
    }

    fn read_reply<T: DeserializeOwned>(
        &self,
        path: &str,
        response: Result<ureq::http::Response<ureq::Body>, ureq::Error>,
    ) -> Result<T, AgentError> {
        let mut response = response.map_err(|e| AgentError::transport(format!("{path}: {e}")))?;
        let status = response.status().as_u16();
        let body = response
            .body_mut()
            .with_config()
            .limit(MAX_REPLY_BYTES)
            .read_to_string()
            .map_err(|e| AgentError::transport(format!("{path}: reading body: {e}")))?;
        match status {
            200 => serde_json::from_str(&body)
                .map_err(|e| AgentError::Payload(format!("{path}: malformed reply body: {e}"))),
            422 => Err(AgentError::Payload(format!("{path}: rejected (422): {body}"))),
            500..=599 => Err(AgentError::transport(format!("{path}: server error {status}: {body}"))),
            other => Err(AgentError::Transport {
                message: format!("{path}: unexpected status {other}: {body}"),
                retryable: false,
            }),
        }
    }

    fn post<B: Serialize, T: DeserializeOwned>(&self, path: &str, body: &B) -> Result<T, AgentError> {
        let payload = serde_json::to_string(body).map_err(|e| AgentError::Payload(e.to_string()))?;
        let mut req = self
            .client
            .post(&self.url(path))
            .header("content-type", "application/json");
        if let Some(token) = &self.endpoint.auth_token {
            req = req.header("authorization", &format!("Bearer {token}"));
        }
        self.read_reply(path, req.send(payload.as_str()))
    }
}

impl Agent for HttpAgent {
    fn chat(&self, request: &ChatRequest) -> Result<ChatReply, AgentError> {
        self.post(CHAT_PATH, request)
    }

    fn image_task(&self, request: &ImageTaskRequest) -> Result<ImageReply, AgentError> {
        self.post(IMAGE_PATH, request)
    }

    fn health(&self) -> Result<HealthReply, AgentError> {
        let mut req = self.client.get(&self.url(HEALTH_PATH));
        if let Some(token) = &self.endpoint.auth_token {
            req = req.header("authorization", &format!("Bearer {token}"));
        }
        self.read_reply(HEALTH_PATH, req.call())
    }
}
