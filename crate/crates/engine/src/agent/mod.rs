//! Every model-backed agent is reached through [`Agent`], which speaks the
//! three-path JSON wire protocol in [`wire`]. [`http::HttpAgent`] talks to a
//! real server; [`crate::mock`] provides deterministic in-process stand-ins.

pub mod client;
pub mod http;
pub mod wire;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

pub use client::{call_chat, call_image_task, ImageOutput, StructuredResponse};
pub use wire::{ChatReply, ChatRequest, HealthReply, ImageReply, ImageTask, ImageTaskRequest};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentRole {
    Narrator,
    Thinker,
    Ranker,
    Analyzer,
    Segmenter,
    TemplateGenerator,
    Inpainter,
    Refiner,
}

impl AgentRole {
    pub const ALL: [AgentRole; 8] = [
        AgentRole::Narrator,
        AgentRole::Thinker,
        AgentRole::Ranker,
        AgentRole::Analyzer,
        AgentRole::Segmenter,
        AgentRole::TemplateGenerator,
        AgentRole::Inpainter,
        AgentRole::Refiner,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AgentRole::Narrator => "narrator",
            AgentRole::Thinker => "thinker",
            AgentRole::Ranker => "ranker",
            AgentRole::Analyzer => "analyzer",
            AgentRole::Segmenter => "segmenter",
            AgentRole::TemplateGenerator => "template_generator",
            AgentRole::Inpainter => "inpainter",
            AgentRole::Refiner => "refiner",
        }
    }

    /// Roles served on `/v1/chat`.
    pub fn is_chat(self) -> bool {
        matches!(
            self,
            AgentRole::Narrator | AgentRole::Thinker | AgentRole::Ranker | AgentRole::Analyzer
        )
    }

    /// Chat roles that receive an image.
    pub fn is_vision(self) -> bool {
        matches!(self, AgentRole::Narrator | AgentRole::Analyzer)
    }
}

impl fmt::Display for AgentRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AgentRole {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| format!("unknown agent role \"{s}\""))
    }
}

/// Where and how to reach one role.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentEndpoint {
    pub role: AgentRole,
    /// `http(s)://host:port` of a server, or `mock://<name>` for a built-in mock.
    pub base_url: String,
    pub timeout: Duration,
    pub max_retries: u32,
    pub auth_token: Option<String>,
    /// First retry delay; doubles per retry.
    pub backoff: Duration,
}

impl AgentEndpoint {
    pub fn new(role: AgentRole, base_url: impl Into<String>) -> Self {
        Self {
            role,
            base_url: base_url.into(),
            timeout: Duration::from_secs(120),
            max_retries: 2,
            auth_token: None,
            backoff: Duration::from_millis(500),
        }
    }

    pub fn is_mock(&self) -> bool {
        self.base_url.starts_with("mock:")
    }

    /// Delay before retry number `retry` (0-based).
    pub fn backoff_for(&self, retry: u32) -> Duration {
        self.backoff.saturating_mul(1u32.checked_shl(retry).unwrap_or(u32::MAX))
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AgentError {
    /// Network failure, timeout or 5xx. `retryable` is false only once the
    /// retry budget is spent.
    #[error("transport error: {message}")]
    Transport { message: String, retryable: bool },
    /// The request or reply violates the wire contract (HTTP 422, bad
    /// base64, wrong dimensions).
    #[error("payload error: {0}")]
    Payload(String),
    /// The chat reply never matched its schema within the repair budget.
    #[error("{error} (last reply: {raw_text:?})")]
    Schema {
        error: anywhere_core::schema::SchemaError,
        raw_text: String,
        attempts: u32,
    },
    #[error("role {0} is not bound to an agent")]
    RoleUnbound(AgentRole),
}

impl AgentError {
    pub fn transport(message: impl Into<String>) -> Self {
        AgentError::Transport {
            message: message.into(),
            retryable: true,
        }
    }

    pub fn is_retryable(&self) -> bool {
        matches!(self, AgentError::Transport { retryable: true, .. })
    }
}

/// One endpoint's worth of wire protocol.
pub trait Agent: Send + Sync {
    fn chat(&self, request: &ChatRequest) -> Result<ChatReply, AgentError>;

    fn image_task(&self, request: &ImageTaskRequest) -> Result<ImageReply, AgentError>;

    fn health(&self) -> Result<HealthReply, AgentError>;

    /// Whether wall-clock latency of calls is meaningful. In-process mocks
    /// return false so reports stay byte-stable.
    fn measures_latency(&self) -> bool {
        true
    }
}

/// The agent serving each role. Clones share the underlying clients.
#[derive(Clone, Default)]
pub struct AgentSet {
    agents: BTreeMap<AgentRole, Arc<dyn Agent>>,
}

impl AgentSet {
    /// Builds an HTTP client or a mock for every endpoint.
    pub fn from_endpoints<'a>(endpoints: impl IntoIterator<Item = &'a AgentEndpoint>) -> Result<Self, AgentError> {
        let mut set = Self::default();
        for ep in endpoints {
            let agent: Arc<dyn Agent> = if ep.is_mock() {
                Arc::new(crate::mock::MockAgent::from_url(ep.role, &ep.base_url).map_err(AgentError::Payload)?)
            } else {
                Arc::new(http::HttpAgent::new(ep.clone()))
            };
            set.agents.insert(ep.role, agent);
        }
        Ok(set)
    }

    pub fn with_agent(mut self, role: AgentRole, agent: Arc<dyn Agent>) -> Self {
        self.agents.insert(role, agent);
        self
    }

    pub fn get(&self, role: AgentRole) -> Result<&dyn Agent, AgentError> {
        self.agents
            .get(&role)
            .map(|a| a.as_ref())
            .ok_or(AgentError::RoleUnbound(role))
    }
}

impl fmt::Debug for AgentSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.agents.keys()).finish()
    }
}
