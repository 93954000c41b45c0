//! JSON bodies exchanged on `/v1/chat`, `/v1/image` and `/v1/health`.

use std::collections::BTreeMap;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use serde::{Deserialize, Serialize};

use super::{AgentError, AgentRole};

pub const CHAT_PATH: &str = "/v1/chat";
pub const IMAGE_PATH: &str = "/v1/image";
pub const HEALTH_PATH: &str = "/v1/health";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub role: AgentRole,
    pub system_prompt: String,
    pub user_prompt: String,
    /// Base64 PNG; vision roles only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_b64: Option<String>,
    pub response_schema_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl ChatRequest {
    pub fn new(role: AgentRole, user_prompt: String, schema_id: &str) -> Self {
        Self {
            role,
            system_prompt: String::new(),
            user_prompt,
            image_b64: None,
            response_schema_id: schema_id.to_string(),
            seed: None,
        }
    }

    pub fn with_image(mut self, png: &[u8]) -> Self {
        self.image_b64 = Some(B64.encode(png));
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn image_png(&self) -> Result<Option<Vec<u8>>, AgentError> {
        self.image_b64.as_deref().map(decode_b64).transpose()
    }

    pub fn validate(&self) -> Result<(), AgentError> {
        if !self.role.is_chat() {
            return Err(AgentError::Payload(format!("{} is not a chat role", self.role)));
        }
        if self.user_prompt.trim().is_empty() {
            return Err(AgentError::Payload("user_prompt must not be empty".into()));
        }
        if self.role.is_vision() != self.image_b64.is_some() {
            return Err(AgentError::Payload(format!(
                "image must be present exactly for vision roles ({} {})",
                self.role,
                if self.image_b64.is_some() { "got one" } else { "got none" }
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatReply {
    pub text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImageTask {
    Segment,
    Canny2img,
    Inpaint,
    Img2img,
}

impl ImageTask {
    /// Named payloads the task cannot run without.
    pub fn required_images(self) -> &'static [&'static str] {
        match self {
            ImageTask::Segment => &["image"],
            ImageTask::Canny2img => &["edge"],
            ImageTask::Inpaint => &["image", "mask"],
            ImageTask::Img2img => &["image"],
        }
    }

    pub fn role(self) -> AgentRole {
        match self {
            ImageTask::Segment => AgentRole::Segmenter,
            ImageTask::Canny2img => AgentRole::TemplateGenerator,
            ImageTask::Inpaint => AgentRole::Inpainter,
            ImageTask::Img2img => AgentRole::Refiner,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageTaskRequest {
    pub task: ImageTask,
    /// Payload name to base64 PNG.
    pub images: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub negative_prompt: Option<String>,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strength: Option<f64>,
}

impl ImageTaskRequest {
    pub fn new(task: ImageTask, seed: u64) -> Self {
        Self {
            task,
            images: BTreeMap::new(),
            prompt: None,
            negative_prompt: None,
            seed,
            strength: None,
        }
    }

    pub fn with_image(mut self, name: &str, png: &[u8]) -> Self {
        self.images.insert(name.to_string(), B64.encode(png));
        self
    }

    pub fn with_prompt(mut self, prompt: impl Into<String>) -> Self {
        self.prompt = Some(prompt.into());
        self
    }

    pub fn with_negative_prompt(mut self, prompt: impl Into<String>) -> Self {
        self.negative_prompt = Some(prompt.into());
        self
    }

    pub fn with_strength(mut self, strength: f64) -> Self {
        self.strength = Some(strength);
        self
    }

    pub fn image_png(&self, name: &str) -> Result<Vec<u8>, AgentError> {
        let b64 = self
            .images
            .get(name)
            .ok_or_else(|| AgentError::Payload(format!("missing image \"{name}\"")))?;
        decode_b64(b64)
    }

    /// Per-task payload rules, checked before anything is sent.
    pub fn validate(&self) -> Result<(), AgentError> {
        for name in self.task.required_images() {
            if !self.images.contains_key(*name) {
                return Err(AgentError::Payload(format!(
                    "{:?} request requires image \"{name}\"",
                    self.task
                )));
            }
        }
        let needs_prompt = !matches!(self.task, ImageTask::Segment);
        if needs_prompt && self.prompt.as_deref().is_none_or(|p| p.trim().is_empty()) {
            return Err(AgentError::Payload(format!("{:?} request requires a prompt", self.task)));
        }
        match (self.task, self.strength) {
            (ImageTask::Img2img, None) => {
                return Err(AgentError::Payload("img2img request requires strength".into()))
            }
            (ImageTask::Img2img, Some(s)) if !(0.0..=1.0).contains(&s) => {
                return Err(AgentError::Payload(format!("strength {s} outside [0, 1]")))
            }
            _ => {}
        }
        Ok(())
    }
}

/// Exactly one of the two fields is set: `mask_b64` for segment, `image_b64`
/// for every other task.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ImageReply {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_b64: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask_b64: Option<String>,
}

impl ImageReply {
    pub fn image(png: &[u8]) -> Self {
        Self {
            image_b64: Some(B64.encode(png)),
            mask_b64: None,
        }
    }

    pub fn mask(png: &[u8]) -> Self {
        Self {
            image_b64: None,
            mask_b64: Some(B64.encode(png)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HealthReply {
    pub status: String,
    pub roles: Vec<AgentRole>,
}

pub fn decode_b64(s: &str) -> Result<Vec<u8>, AgentError> {
    B64.decode(s.trim())
        .map_err(|e| AgentError::Payload(format!("invalid base64: {e}")))
}
