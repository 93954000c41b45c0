//! Retrying, schema-enforcing calls on top of an [`Agent`].

use std::thread;
use std::time::Instant;

use anywhere_core::schema::{validate_json, Schema};
use anywhere_core::{BinaryMask, RasterImage};
use serde_json::Value;

use super::wire::decode_b64;
use super::{Agent, AgentEndpoint, AgentError, ChatRequest, ImageTask, ImageTaskRequest};
use crate::codec::{decode_mask_png, decode_png};

/// Appended to the user prompt when a reply fails schema validation.
pub const REPAIR_INSTRUCTION: &str =
    "Your previous reply was not valid JSON for the required schema; reply with ONLY the JSON object.";

/// Bookkeeping for one logical call.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CallStats {
    /// Request/reply exchanges that returned a body (1 + schema repairs).
    pub attempts: u32,
    /// Every send, including transport retries.
    pub transport_attempts: u32,
    /// Wall-clock total; 0 for agents that do not measure latency.
    pub latency_ms: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StructuredResponse {
    pub raw_text: String,
    pub parsed: Value,
    pub attempts_used: u32,
    pub stats: CallStats,
}

fn with_retries<T>(
    agent: &dyn Agent,
    endpoint: &AgentEndpoint,
    stats: &mut CallStats,
    mut send: impl FnMut() -> Result<T, AgentError>,
) -> Result<T, AgentError> {
    let mut retry = 0;
    loop {
        stats.transport_attempts += 1;
        let started = Instant::now();
        let result = send();
        if agent.measures_latency() {
            stats.latency_ms += started.elapsed().as_millis() as u64;
        }
        match result {
            Err(e) if e.is_retryable() && retry < endpoint.max_retries => {
                log::warn!(
                    "{} call failed ({e}); retry {}/{}",
                    endpoint.role,
                    retry + 1,
                    endpoint.max_retries
                );
                let delay = endpoint.backoff_for(retry);
                if !delay.is_zero() {
                    thread::sleep(delay);
                }
                retry += 1;
            }
            Err(AgentError::Transport { message, .. }) => {
                return Err(AgentError::Transport {
                    message: format!("{message} (after {} attempt(s))", retry + 1),
                    retryable: false,
                })
            }
            other => return other,
        }
    }
}

/// Sends a chat request and returns the first reply that validates against
/// `schema`, re-asking with [`REPAIR_INSTRUCTION`] up to `max_json_repairs`
/// times.
pub fn call_chat(
    agent: &dyn Agent,
    endpoint: &AgentEndpoint,
    request: &ChatRequest,
    schema: &Schema,
    max_json_repairs: u32,
) -> Result<StructuredResponse, AgentError> {
    request.validate()?;
    if request.role != endpoint.role {
        return Err(AgentError::Payload(format!(
            "request for {} sent to {} endpoint",
            request.role, endpoint.role
        )));
    }
    if request.response_schema_id != schema.id().as_str() {
        return Err(AgentError::Payload(format!(
            "request names schema {} but {} is enforced",
            request.response_schema_id,
            schema.id()
        )));
    }
    let mut stats = CallStats::default();
    let mut repaired;
    let mut last_error = None;
    for attempt in 0..=max_json_repairs {
        let req = if attempt == 0 {
            request
        } else {
            repaired = request.clone();
            repaired.user_prompt = format!("{}\n\n{}", request.user_prompt, REPAIR_INSTRUCTION);
            &repaired
        };
        let reply = with_retries(agent, endpoint, &mut stats, || agent.chat(req))?;
        stats.attempts += 1;
        match validate_json(&reply.text, schema) {
            Ok(parsed) => {
                return Ok(StructuredResponse {
                    raw_text: reply.text,
                    parsed,
                    attempts_used: stats.attempts,
                    stats,
                })
            }
            Err(e) => {
                log::debug!("{} reply failed {}: {e}", endpoint.role, schema.id());
                last_error = Some((e, reply.text));
            }
        }
    }
    let (error, raw_text) = last_error.expect("at least one attempt is always made");
    Err(AgentError::Schema {
        error,
        raw_text,
        attempts: stats.attempts,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum ImageOutput {
    Image(RasterImage),
    Mask(BinaryMask),
}

impl ImageOutput {
    pub fn into_image(self) -> Result<RasterImage, AgentError> {
        match self {
            ImageOutput::Image(i) => Ok(i),
            ImageOutput::Mask(_) => Err(AgentError::Payload("expected an image, got a mask".into())),
        }
    }

    pub fn into_mask(self) -> Result<BinaryMask, AgentError> {
        match self {
            ImageOutput::Mask(m) => Ok(m),
            ImageOutput::Image(_) => Err(AgentError::Payload("expected a mask, got an image".into())),
        }
    }
}

/// Sends an image task. Segment replies must carry `mask_b64`, the others
/// `image_b64`; either way the decoded result must be `expected_dims`.
pub fn call_image_task(
    agent: &dyn Agent,
    endpoint: &AgentEndpoint,
    request: &ImageTaskRequest,
    expected_dims: (u32, u32),
) -> Result<(ImageOutput, CallStats), AgentError> {
    request.validate()?;
    if request.task.role() != endpoint.role {
        return Err(AgentError::Payload(format!(
            "{:?} task sent to {} endpoint",
            request.task, endpoint.role
        )));
    }
    let mut stats = CallStats::default();
    let reply = with_retries(agent, endpoint, &mut stats, || agent.image_task(request))?;
    stats.attempts = 1;
    let payload_err = |e: crate::codec::CodecError| AgentError::Payload(e.to_string());
    let output = match (request.task, reply.mask_b64, reply.image_b64) {
        (ImageTask::Segment, Some(mask), _) => {
            ImageOutput::Mask(decode_mask_png(&decode_b64(&mask)?).map_err(payload_err)?)
        }
        (ImageTask::Segment, None, _) => {
            return Err(AgentError::Payload("segment reply lacks mask_b64".into()))
        }
        (_, _, Some(image)) => ImageOutput::Image(decode_png(&decode_b64(&image)?).map_err(payload_err)?),
        (task, _, None) => return Err(AgentError::Payload(format!("{task:?} reply lacks image_b64"))),
    };
    let dims = match &output {
        ImageOutput::Image(i) => i.dimensions(),
        ImageOutput::Mask(m) => m.dimensions(),
    };
    if dims != expected_dims {
        return Err(AgentError::Payload(format!(
            "{:?} reply is {}x{}, expected {}x{}",
            request.task, dims.0, dims.1, expected_dims.0, expected_dims.1
        )));
    }
    Ok((output, stats))
}
