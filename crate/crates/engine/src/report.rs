//! The audit trail of one run, serialized as canonical JSON: object keys
//! sorted, floats rounded to six decimals, two-space indentation, trailing
//! newline.

use std::collections::BTreeMap;
use std::fmt;

use anywhere_core::analysis::{AnalysisReport, Decision};
use anywhere_core::mask::OverlapStats;
use anywhere_core::prompt::{FinalPrompt, ForegroundDescription};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::agent::client::CallStats;
use crate::agent::AgentRole;

/// Pipeline steps, in the order they run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Load,
    SegmentForeground,
    Narrate,
    Brainstorm,
    Rank,
    Select,
    Canny,
    Template,
    Segment,
    Detect,
    Repaint,
    Resegment,
    Composite,
    Refine,
    Analyze,
    Decide,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Load => "load",
            Stage::SegmentForeground => "segment_foreground",
            Stage::Narrate => "narrate",
            Stage::Brainstorm => "brainstorm",
            Stage::Rank => "rank",
            Stage::Select => "select",
            Stage::Canny => "canny",
            Stage::Template => "template",
            Stage::Segment => "segment",
            Stage::Detect => "detect",
            Stage::Repaint => "repaint",
            Stage::Resegment => "resegment",
            Stage::Composite => "composite",
            Stage::Refine => "refine",
            Stage::Analyze => "analyze",
            Stage::Decide => "decide",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One line of the agent call log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: Stage,
    /// Agent contacted, if any.
    pub role: Option<AgentRole>,
    pub attempts: u32,
    pub transport_attempts: u32,
    pub latency_ms: u64,
    /// Result reused from an earlier iteration; no call was made.
    #[serde(default)]
    pub cached: bool,
}

impl StageRecord {
    pub fn local(stage: Stage) -> Self {
        Self {
            stage,
            role: None,
            attempts: 0,
            transport_attempts: 0,
            latency_ms: 0,
            cached: false,
        }
    }

    pub fn call(stage: Stage, role: AgentRole, stats: CallStats) -> Self {
        Self {
            stage,
            role: Some(role),
            attempts: stats.attempts,
            transport_attempts: stats.transport_attempts,
            latency_ms: stats.latency_ms,
            cached: false,
        }
    }

    pub fn cached(stage: Stage, role: AgentRole) -> Self {
        Self {
            cached: true,
            role: Some(role),
            ..Self::local(stage)
        }
    }
}

/// Everything that happened in one feedback round. Fields past the failing
/// stage of an aborted run stay empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct IterationRecord {
    /// 1-based.
    pub iteration: u32,
    pub seed: u64,
    /// Feedback rendered into the thinker prompt ("" in round 1).
    pub feedback_in: String,
    pub scenes: Vec<String>,
    pub ranks: Vec<u32>,
    pub final_prompt: Option<FinalPrompt>,
    pub overlap_stats: Option<OverlapStats>,
    pub detection_triggered: Option<bool>,
    pub repaint_area: Option<u64>,
    pub repaint_prompt: Option<String>,
    /// Detection re-run on the repainted template; recorded, never acted on.
    pub post_repaint_stats: Option<OverlapStats>,
    pub analysis_report: Option<AnalysisReport>,
    pub decision: Option<Decision>,
    /// Artifact name to path relative to the artifact directory.
    pub artifact_paths: BTreeMap<String, String>,
    pub trace: Vec<StageRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Termination {
    Accepted,
    Exhausted,
    Failed { stage: Stage, error: String },
}

impl Termination {
    pub fn as_str(&self) -> &'static str {
        match self {
            Termination::Accepted => "accepted",
            Termination::Exhausted => "exhausted",
            Termination::Failed { .. } => "failed",
        }
    }

    /// Process exit status for this outcome.
    pub fn exit_code(&self) -> i32 {
        match self {
            Termination::Accepted => 0,
            Termination::Exhausted => 2,
            Termination::Failed { .. } => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub run_id: String,
    /// SHA-256 of the input PNG bytes, hex.
    pub input_digest: String,
    pub seed: u64,
    pub resolution: u32,
    pub max_iterations: u32,
    /// Repaint margin in pixels at `resolution`.
    pub repaint_margin: u32,
    pub foreground: Option<ForegroundDescription>,
    pub setup_artifacts: BTreeMap<String, String>,
    pub setup_trace: Vec<StageRecord>,
    pub iterations: Vec<IterationRecord>,
    pub termination: Termination,
    /// 1-based index into `iterations` of the delivered candidate.
    pub selected_iteration: Option<u32>,
}

impl RunReport {
    pub fn selected(&self) -> Option<&IterationRecord> {
        let k = self.selected_iteration?;
        self.iterations.get(k.checked_sub(1)? as usize)
    }

    /// Path of the delivered candidate, relative to the artifact directory.
    pub fn selected_candidate(&self) -> Option<&str> {
        self.selected()?.artifact_paths.get("candidate").map(String::as_str)
    }

    /// Structural checks a well-formed report satisfies.
    pub fn check_invariants(&self) -> Result<(), String> {
        if self.iterations.len() > self.max_iterations as usize {
            return Err(format!(
                "{} iterations exceed max_iterations {}",
                self.iterations.len(),
                self.max_iterations
            ));
        }
        for (i, it) in self.iterations.iter().enumerate() {
            if it.iteration as usize != i + 1 {
                return Err(format!("iteration {} recorded at position {}", it.iteration, i + 1));
            }
        }
        if self.termination == Termination::Accepted {
            let last_passed = self
                .iterations
                .last()
                .and_then(|it| it.analysis_report.as_ref())
                .is_some_and(|r| r.passed);
            if !last_passed {
                return Err("accepted run whose last report did not pass".into());
            }
        }
        match self.selected_iteration {
            Some(k) if k == 0 || k as usize > self.iterations.len() => {
                Err(format!("selected_iteration {k} out of range"))
            }
            None if !matches!(self.termination, Termination::Failed { .. }) => {
                Err("finished run without a selected iteration".into())
            }
            _ => Ok(()),
        }
    }

    /// Canonical JSON text.
    pub fn to_canonical_json(&self) -> String {
        canonical_json(&serde_json::to_value(self).expect("report is always serializable"))
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

fn round_floats(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().expect("f64 number");
            let rounded: f64 = format!("{x:.6}").parse().expect("formatted float parses");
            // -0.0 and 0.0 must print the same.
            let rounded = if rounded == 0.0 { 0.0 } else { rounded };
            serde_json::Number::from_f64(rounded).map_or(Value::Null, Value::Number)
        }
        Value::Array(a) => Value::Array(a.into_iter().map(round_floats).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, round_floats(v))).collect()),
        other => other,
    }
}

/// Sorted keys (serde_json's map is ordered), six-decimal floats,
/// pretty-printed with a trailing newline.
pub fn canonical_json(value: &Value) -> String {
    let mut out = serde_json::to_string_pretty(&round_floats(value.clone())).expect("value serializes");
    out.push('\n');
    out
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// `<first 12 hex digits of the input digest>-s<seed>`.
pub fn run_id_for(input_digest: &str, seed: u64) -> String {
    format!("{}-s{seed}", &input_digest[..12.min(input_digest.len())])
}
