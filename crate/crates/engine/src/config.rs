//! Pipeline configuration: a TOML file with top-level knobs and one
//! `[endpoints.<role>]` table per agent role.
//!
//! ```toml
//! seed = 7
//! resolution = 512
//!
//! [endpoints.narrator]
//! base_url = "http://127.0.0.1:8600"
//! timeout_secs = 60
//!
//! [endpoints.analyzer]
//! base_url = "mock://always-pass"
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::time::Duration;

use anywhere_core::analysis::{default_questions, AnalyzerSettings, Question};
use anywhere_core::canny::{DEFAULT_HIGH_THRESHOLD, DEFAULT_LOW_THRESHOLD};
use anywhere_core::detect::{DEFAULT_DILATE_RADIUS, DEFAULT_TAU, REFERENCE_RESOLUTION};
use anywhere_core::mask::DEFAULT_ALPHA_THRESHOLD;
use anywhere_core::prompt::DEFAULT_SCENE_COUNT;
use serde::{Deserialize, Serialize};

use crate::agent::{AgentEndpoint, AgentRole};
use crate::mock::{MockAgent, DEFAULT_MOCK_URL};

pub const DEFAULT_MAX_ITERATIONS: u32 = 3;
pub const DEFAULT_REFINE_STRENGTH: f64 = 0.3;
pub const DEFAULT_MAX_JSON_REPAIRS: u32 = 2;
pub const DEFAULT_RESULTS_PER_INPUT: u32 = 4;
pub const DEFAULT_ARTIFACT_DIR: &str = "runs";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{field}: {constraint}")]
pub struct ConfigError {
    pub field: String,
    pub constraint: String,
}

impl ConfigError {
    pub fn new(field: impl Into<String>, constraint: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            constraint: constraint.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub endpoints: BTreeMap<AgentRole, AgentEndpoint>,
    pub n_scenes: usize,
    pub tau: f64,
    /// Repaint margin at 1024 px; scaled to `resolution`.
    pub dilate_radius: u32,
    pub resolution: u32,
    pub refine_strength: f64,
    pub max_iterations: u32,
    pub max_json_repairs: u32,
    pub alpha_threshold: u8,
    pub canny_low: f32,
    pub canny_high: f32,
    pub seed: u64,
    pub artifact_dir: PathBuf,
    pub results_per_input: u32,
    pub analyzer: AnalyzerSettings,
    pub narrator_inquiries: Vec<String>,
}

impl PipelineConfig {
    /// Defaults with every role bound to `base_url`.
    pub fn with_all_roles(base_url: &str) -> Self {
        Self {
            endpoints: AgentRole::ALL
                .into_iter()
                .map(|r| (r, AgentEndpoint::new(r, base_url)))
                .collect(),
            n_scenes: DEFAULT_SCENE_COUNT,
            tau: DEFAULT_TAU,
            dilate_radius: DEFAULT_DILATE_RADIUS,
            resolution: REFERENCE_RESOLUTION,
            refine_strength: DEFAULT_REFINE_STRENGTH,
            max_iterations: DEFAULT_MAX_ITERATIONS,
            max_json_repairs: DEFAULT_MAX_JSON_REPAIRS,
            alpha_threshold: DEFAULT_ALPHA_THRESHOLD,
            canny_low: DEFAULT_LOW_THRESHOLD,
            canny_high: DEFAULT_HIGH_THRESHOLD,
            seed: 0,
            artifact_dir: PathBuf::from(DEFAULT_ARTIFACT_DIR),
            results_per_input: DEFAULT_RESULTS_PER_INPUT,
            analyzer: AnalyzerSettings::default(),
            narrator_inquiries: Vec::new(),
        }
    }

    /// Every role bound to its fixture mock.
    pub fn mock() -> Self {
        Self::with_all_roles(DEFAULT_MOCK_URL)
    }

    pub fn endpoint(&self, role: AgentRole) -> &AgentEndpoint {
        &self.endpoints[&role]
    }

    /// Replaces every endpoint URL with the fixture mock, keeping mocks that
    /// were already configured.
    pub fn bind_mocks(&mut self) {
        for ep in self.endpoints.values_mut() {
            if !ep.is_mock() {
                ep.base_url = DEFAULT_MOCK_URL.to_string();
            }
        }
    }

    /// Re-runs the range checks, for configs built in code.
    pub fn validate(&self) -> Result<(), ConfigError> {
        for role in AgentRole::ALL {
            let ep = self
                .endpoints
                .get(&role)
                .ok_or_else(|| ConfigError::new(format!("endpoints.{role}"), "required"))?;
            check_endpoint(ep)?;
        }
        if self.n_scenes == 0 || self.n_scenes > 64 {
            return Err(ConfigError::new("n_scenes", "must be in [1,64]"));
        }
        if !(0.0..1.0).contains(&self.tau) {
            return Err(ConfigError::new("tau", "must be in [0,1)"));
        }
        if self.dilate_radius > 256 {
            return Err(ConfigError::new("dilate_radius", "must be in [0,256]"));
        }
        if !(16..=8192).contains(&self.resolution) {
            return Err(ConfigError::new("resolution", "must be in [16,8192]"));
        }
        if !(0.0..=1.0).contains(&self.refine_strength) {
            return Err(ConfigError::new("refine_strength", "must be in [0,1]"));
        }
        if !(1..=100).contains(&self.max_iterations) {
            return Err(ConfigError::new("max_iterations", "must be in [1,100]"));
        }
        if self.max_json_repairs > 10 {
            return Err(ConfigError::new("max_json_repairs", "must be in [0,10]"));
        }
        if !self.canny_low.is_finite() || self.canny_low < 0.0 {
            return Err(ConfigError::new("canny_low", "must be >= 0"));
        }
        if !self.canny_high.is_finite() || self.canny_high < self.canny_low {
            return Err(ConfigError::new("canny_high", "must be >= canny_low"));
        }
        if !(1..=1000).contains(&self.results_per_input) {
            return Err(ConfigError::new("results_per_input", "must be in [1,1000]"));
        }
        if let Some(floor) = self.analyzer.aesthetic_floor {
            if !(1..=5).contains(&floor) {
                return Err(ConfigError::new("aesthetic_floor", "must be in [1,5]"));
            }
        }
        if self.analyzer.questions.is_empty() {
            return Err(ConfigError::new("questions", "at least one question is required"));
        }
        let mut ids = std::collections::BTreeSet::new();
        for (i, q) in self.analyzer.questions.iter().enumerate() {
            if q.id.is_empty() || !q.id.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                return Err(ConfigError::new(format!("questions[{i}].id"), "must be non-empty [A-Za-z0-9_]"));
            }
            if !ids.insert(q.id.as_str()) {
                return Err(ConfigError::new(format!("questions[{i}].id"), "must be unique"));
            }
            if q.text.trim().is_empty() {
                return Err(ConfigError::new(format!("questions[{i}].text"), "must not be empty"));
            }
            if q.mandatory && q.feedback.trim().is_empty() {
                return Err(ConfigError::new(
                    format!("questions[{i}].feedback"),
                    "must not be empty for a mandatory question",
                ));
            }
        }
        Ok(())
    }
}

fn check_endpoint(ep: &AgentEndpoint) -> Result<(), ConfigError> {
    let field = |f: &str| format!("endpoints.{}.{f}", ep.role);
    if ep.timeout.is_zero() {
        return Err(ConfigError::new(field("timeout_secs"), "must be > 0"));
    }
    if ep.max_retries > 20 {
        return Err(ConfigError::new(field("max_retries"), "must be in [0,20]"));
    }
    if ep.is_mock() {
        MockAgent::from_url(ep.role, &ep.base_url).map_err(|e| ConfigError::new(field("base_url"), e))?;
    } else {
        let url = url::Url::parse(&ep.base_url)
            .map_err(|e| ConfigError::new(field("base_url"), format!("invalid URL: {e}")))?;
        if !matches!(url.scheme(), "http" | "https") {
            return Err(ConfigError::new(field("base_url"), "scheme must be http, https or mock"));
        }
    }
    Ok(())
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct RawEndpoint {
    base_url: String,
    timeout_secs: Option<f64>,
    max_retries: Option<i64>,
    auth_token: Option<String>,
    backoff_ms: Option<u64>,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct RawQuestion {
    id: String,
    text: String,
    #[serde(default)]
    feedback: String,
    mandatory: Option<bool>,
}

#[derive(Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    endpoints: Option<BTreeMap<String, RawEndpoint>>,
    n_scenes: Option<i64>,
    tau: Option<f64>,
    dilate_radius: Option<i64>,
    resolution: Option<i64>,
    refine_strength: Option<f64>,
    max_iterations: Option<i64>,
    max_json_repairs: Option<i64>,
    alpha_threshold: Option<i64>,
    canny_low: Option<f64>,
    canny_high: Option<f64>,
    seed: Option<i64>,
    artifact_dir: Option<String>,
    results_per_input: Option<i64>,
    aesthetic_floor: Option<i64>,
    narrator_inquiries: Option<Vec<String>>,
    questions: Option<Vec<RawQuestion>>,
}

fn int_in<T: TryFrom<i64>>(field: &str, v: i64, lo: i64, hi: i64) -> Result<T, ConfigError> {
    if v < lo || v > hi {
        return Err(ConfigError::new(field, format!("must be in [{lo},{hi}]")));
    }
    T::try_from(v).map_err(|_| ConfigError::new(field, format!("must be in [{lo},{hi}]")))
}

/// Parses and range-checks a configuration file. Absent keys take their
/// defaults; `endpoints` must bind all eight roles.
pub fn validate_config(text: &str) -> Result<PipelineConfig, ConfigError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| {
        let field = e
            .message()
            .split('`')
            .nth(1)
            .filter(|_| e.message().starts_with("unknown field"))
            .unwrap_or("<syntax>")
            .to_string();
        ConfigError::new(field, e.message().trim().to_string())
    })?;

    let mut cfg = PipelineConfig::mock();
    let raw_endpoints = raw
        .endpoints
        .ok_or_else(|| ConfigError::new("endpoints", "required: one [endpoints.<role>] table per agent role"))?;
    let mut endpoints = BTreeMap::new();
    for (name, re) in raw_endpoints {
        let role: AgentRole = name
            .parse()
            .map_err(|e: String| ConfigError::new(format!("endpoints.{name}"), e))?;
        let mut ep = AgentEndpoint::new(role, re.base_url);
        if let Some(t) = re.timeout_secs {
            if !(t.is_finite() && t > 0.0 && t <= 86_400.0) {
                return Err(ConfigError::new(format!("endpoints.{name}.timeout_secs"), "must be in (0,86400]"));
            }
            ep.timeout = Duration::from_secs_f64(t);
        }
        if let Some(r) = re.max_retries {
            ep.max_retries = int_in(&format!("endpoints.{name}.max_retries"), r, 0, 20)?;
        }
        if let Some(b) = re.backoff_ms {
            ep.backoff = Duration::from_millis(b);
        }
        ep.auth_token = re.auth_token.filter(|t| !t.is_empty());
        endpoints.insert(role, ep);
    }
    for role in AgentRole::ALL {
        if !endpoints.contains_key(&role) {
            return Err(ConfigError::new(format!("endpoints.{role}"), "required"));
        }
    }
    cfg.endpoints = endpoints;

    if let Some(v) = raw.n_scenes {
        cfg.n_scenes = int_in("n_scenes", v, 1, 64)?;
    }
    if let Some(v) = raw.tau {
        cfg.tau = v;
    }
    if let Some(v) = raw.dilate_radius {
        cfg.dilate_radius = int_in("dilate_radius", v, 0, 256)?;
    }
    if let Some(v) = raw.resolution {
        cfg.resolution = int_in("resolution", v, 16, 8192)?;
    }
    if let Some(v) = raw.refine_strength {
        cfg.refine_strength = v;
    }
    if let Some(v) = raw.max_iterations {
        cfg.max_iterations = int_in("max_iterations", v, 1, 100)?;
    }
    if let Some(v) = raw.max_json_repairs {
        cfg.max_json_repairs = int_in("max_json_repairs", v, 0, 10)?;
    }
    if let Some(v) = raw.alpha_threshold {
        cfg.alpha_threshold = int_in("alpha_threshold", v, 0, 255)?;
    }
    if let Some(v) = raw.canny_low {
        cfg.canny_low = v as f32;
    }
    if let Some(v) = raw.canny_high {
        cfg.canny_high = v as f32;
    }
    if let Some(v) = raw.seed {
        cfg.seed = int_in("seed", v, 0, i64::MAX)?;
    }
    if let Some(v) = raw.artifact_dir {
        if v.trim().is_empty() {
            return Err(ConfigError::new("artifact_dir", "must not be empty"));
        }
        cfg.artifact_dir = PathBuf::from(v);
    }
    if let Some(v) = raw.results_per_input {
        cfg.results_per_input = int_in("results_per_input", v, 1, 1000)?;
    }
    if let Some(v) = raw.aesthetic_floor {
        cfg.analyzer.aesthetic_floor = Some(int_in("aesthetic_floor", v, 1, 5)?);
    }
    if let Some(v) = raw.narrator_inquiries {
        cfg.narrator_inquiries = v;
    }
    if let Some(qs) = raw.questions {
        cfg.analyzer.questions = qs
            .into_iter()
            .map(|q| Question {
                id: q.id,
                text: q.text,
                feedback: q.feedback,
                mandatory: q.mandatory.unwrap_or(true),
            })
            .collect();
    } else {
        cfg.analyzer.questions = default_questions();
    }
    cfg.validate()?;
    Ok(cfg)
}

/// A config file binding every role to `base_url`, with optional extra
/// top-level lines.
pub fn render_uniform_config(base_url: &str, extra: &str) -> String {
    let mut out = String::new();
    out.push_str(extra);
    if !extra.is_empty() && !extra.ends_with('\n') {
        out.push('\n');
    }
    for role in AgentRole::ALL {
        out.push_str(&format!("\n[endpoints.{role}]\nbase_url = \"{base_url}\"\n"));
    }
    out
}

impl fmt::Display for PipelineConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "n_scenes = {}", self.n_scenes)?;
        writeln!(f, "tau = {}", self.tau)?;
        writeln!(f, "dilate_radius = {}", self.dilate_radius)?;
        writeln!(f, "resolution = {}", self.resolution)?;
        writeln!(f, "refine_strength = {}", self.refine_strength)?;
        writeln!(f, "max_iterations = {}", self.max_iterations)?;
        writeln!(f, "max_json_repairs = {}", self.max_json_repairs)?;
        writeln!(f, "alpha_threshold = {}", self.alpha_threshold)?;
        writeln!(f, "canny_low = {}", self.canny_low)?;
        writeln!(f, "canny_high = {}", self.canny_high)?;
        writeln!(f, "seed = {}", self.seed)?;
        writeln!(f, "artifact_dir = {:?}", self.artifact_dir.display().to_string())?;
        writeln!(f, "results_per_input = {}", self.results_per_input)?;
        if let Some(floor) = self.analyzer.aesthetic_floor {
            writeln!(f, "aesthetic_floor = {floor}")?;
        }
        for (role, ep) in &self.endpoints {
            writeln!(f, "\n[endpoints.{role}]")?;
            writeln!(f, "base_url = {:?}", ep.base_url)?;
            writeln!(f, "timeout_secs = {}", ep.timeout.as_secs_f64())?;
            writeln!(f, "max_retries = {}", ep.max_retries)?;
            writeln!(f, "backoff_ms = {}", ep.backoff.as_millis())?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_needs_endpoints() {
        let err = validate_config("").unwrap_err();
        assert_eq!(err.field, "endpoints");
    }

    #[test]
    fn tau_out_of_range() {
        let text = render_uniform_config("mock://fixture", "tau = 1.5");
        assert_eq!(validate_config(&text).unwrap_err().to_string(), "tau: must be in [0,1)");
    }

    #[test]
    fn minimal_mock_file_takes_defaults() {
        let cfg = validate_config(&render_uniform_config("mock://fixture", "")).unwrap();
        assert_eq!(cfg.n_scenes, 5);
        assert_eq!(cfg.max_iterations, 3);
        assert_eq!(cfg.resolution, 1024);
        assert_eq!(cfg.tau, 0.01);
        assert_eq!(cfg.refine_strength, 0.3);
        assert_eq!(cfg.analyzer.questions.len(), 4);
        assert_eq!(cfg.analyzer.aesthetic_floor, None);
    }

    #[test]
    fn field_precise_errors() {
        let cases = [
            ("refine_strength = 1.2", "refine_strength"),
            ("max_iterations = 0", "max_iterations"),
            ("alpha_threshold = 300", "alpha_threshold"),
            ("canny_low = 50.0\ncanny_high = 10.0", "canny_high"),
            ("bogus = 1", "bogus"),
            ("seed = \"x\"", "<syntax>"),
        ];
        for (extra, field) in cases {
            let err = validate_config(&render_uniform_config("mock://fixture", extra)).unwrap_err();
            assert_eq!(err.field, field, "{extra}: {err}");
        }
    }

    #[test]
    fn missing_role_is_named() {
        let text = render_uniform_config("mock://fixture", "").replace("[endpoints.refiner]", "[endpoints.ranker2]");
        let err = validate_config(&text).unwrap_err();
        assert_eq!(err.field, "endpoints.ranker2");
        let text = "[endpoints.narrator]\nbase_url = \"mock://fixture\"\n";
        assert_eq!(validate_config(text).unwrap_err().field, "endpoints.thinker");
    }

    #[test]
    fn endpoint_fields() {
        let mut text = render_uniform_config("mock://fixture", "");
        text = text.replacen(
            "[endpoints.narrator]\nbase_url = \"mock://fixture\"",
            "[endpoints.narrator]\nbase_url = \"https://models.example:8443\"\ntimeout_secs = 30\nmax_retries = 4\nauth_token = \"t0k\"",
            1,
        );
        let cfg = validate_config(&text).unwrap();
        let ep = cfg.endpoint(AgentRole::Narrator);
        assert_eq!(ep.timeout, Duration::from_secs(30));
        assert_eq!(ep.max_retries, 4);
        assert_eq!(ep.auth_token.as_deref(), Some("t0k"));
        let bad = text.replace("timeout_secs = 30", "timeout_secs = 0");
        assert_eq!(validate_config(&bad).unwrap_err().field, "endpoints.narrator.timeout_secs");
        let ftp = text.replace("https://models.example:8443", "ftp://x");
        assert_eq!(validate_config(&ftp).unwrap_err().field, "endpoints.narrator.base_url");
    }

    #[test]
    fn custom_questions() {
        let extra = "aesthetic_floor = 4\n[[questions]]\nid = \"lit\"\ntext = \"Is the [{subject}] lit like the scene?\"\nfeedback = \"Match the lighting.\"\n";
        let cfg = validate_config(&render_uniform_config("mock://fixture", extra)).unwrap();
        assert_eq!(cfg.analyzer.questions.len(), 1);
        assert_eq!(cfg.analyzer.aesthetic_floor, Some(4));
        let dup = format!("{extra}[[questions]]\nid = \"lit\"\ntext = \"again\"\nfeedback = \"x\"\n");
        assert_eq!(
            validate_config(&render_uniform_config("mock://fixture", &dup)).unwrap_err().field,
            "questions[1].id"
        );
    }

    #[test]
    fn display_round_trips() {
        let mut cfg = validate_config(&render_uniform_config("mock://fixture", "seed = 9\nresolution = 256")).unwrap();
        cfg.analyzer = AnalyzerSettings::default();
        let again = validate_config(&cfg.to_string()).unwrap();
        assert_eq!(again, cfg);
    }
}
