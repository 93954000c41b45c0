//! Extraction and validation of the JSON objects that chat agents return.
//!
//! Replies are located by scanning for balanced `{ ... }` regions (string and
//! escape aware), so prose or fenced code blocks around the object are
//! tolerated. Validation is strict about required fields and types and
//! ignores extra fields.

use alloc::borrow::ToOwned;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde_json::{Map, Value};

/// First violated constraint of a reply.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchemaError {
    field: String,
    reason: String,
}

impl SchemaError {
    pub fn new(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// Field (or pseudo-field such as `$`) the violation was found at.
    pub fn field(&self) -> &str {
        &self.field
    }

    pub fn reason(&self) -> &str {
        &self.reason
    }
}

impl fmt::Display for SchemaError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "schema violation at {}: {}", self.field, self.reason)
    }
}

impl core::error::Error for SchemaError {}

/// Registered reply shapes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SchemaId {
    ForegroundDescription,
    SceneSet,
    SceneRanking,
    AnalysisAnswers,
}

impl SchemaId {
    pub const ALL: [SchemaId; 4] = [
        SchemaId::ForegroundDescription,
        SchemaId::SceneSet,
        SchemaId::SceneRanking,
        SchemaId::AnalysisAnswers,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SchemaId::ForegroundDescription => "foreground_description",
            SchemaId::SceneSet => "scene_set",
            SchemaId::SceneRanking => "scene_ranking",
            SchemaId::AnalysisAnswers => "analysis_answers",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|id| id.as_str() == name)
    }
}

impl fmt::Display for SchemaId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A schema together with the parameters its constraints depend on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Schema {
    ForegroundDescription,
    SceneSet { count: usize },
    SceneRanking { count: usize },
    AnalysisAnswers { questions: Vec<String>, require_aesthetic: bool },
}

impl Schema {
    pub fn id(&self) -> SchemaId {
        match self {
            Schema::ForegroundDescription => SchemaId::ForegroundDescription,
            Schema::SceneSet { .. } => SchemaId::SceneSet,
            Schema::SceneRanking { .. } => SchemaId::SceneRanking,
            Schema::AnalysisAnswers { .. } => SchemaId::AnalysisAnswers,
        }
    }

    fn check(&self, obj: &Map<String, Value>) -> Result<(), SchemaError> {
        match self {
            Schema::ForegroundDescription => {
                for field in ["name", "viewpoint", "description"] {
                    non_empty_string(obj, field)?;
                }
                Ok(())
            }
            Schema::SceneSet { count } => {
                let scenes = array_of_len(obj, "scenes", *count)?;
                for (i, scene) in scenes.iter().enumerate() {
                    if scene_text(scene).is_none() {
                        return Err(SchemaError::new(
                            format!("scenes[{i}]"),
                            "expected a non-empty string",
                        ));
                    }
                }
                Ok(())
            }
            Schema::SceneRanking { count } => {
                let ranks = array_of_len(obj, "ranks", *count)?;
                let mut seen = alloc::vec![false; *count];
                for (i, r) in ranks.iter().enumerate() {
                    let field = format!("ranks[{i}]");
                    let v = r
                        .as_u64()
                        .ok_or_else(|| SchemaError::new(field.clone(), "expected a positive integer"))?;
                    if v == 0 || v as usize > *count {
                        return Err(SchemaError::new(field, format!("rank {v} outside 1..={count}")));
                    }
                    if core::mem::replace(&mut seen[v as usize - 1], true) {
                        return Err(SchemaError::new(field, format!("duplicate rank {v}")));
                    }
                }
                Ok(())
            }
            Schema::AnalysisAnswers {
                questions,
                require_aesthetic,
            } => {
                let answers = obj
                    .get("answers")
                    .ok_or_else(|| SchemaError::new("answers", "missing required field"))?
                    .as_object()
                    .ok_or_else(|| SchemaError::new("answers", "expected an object"))?;
                for q in questions {
                    let v = answers
                        .get(q.as_str())
                        .ok_or_else(|| SchemaError::new(format!("answers.{q}"), "missing required field"))?;
                    if yes_no(v).is_none() {
                        return Err(SchemaError::new(format!("answers.{q}"), "expected yes or no"));
                    }
                }
                if *require_aesthetic {
                    let score = obj
                        .get("aesthetic_score")
                        .ok_or_else(|| SchemaError::new("aesthetic_score", "missing required field"))?;
                    match score.as_u64() {
                        Some(1..=5) => {}
                        _ => {
                            return Err(SchemaError::new(
                                "aesthetic_score",
                                "expected an integer in 1..=5",
                            ))
                        }
                    }
                }
                Ok(())
            }
        }
    }
}

fn non_empty_string<'a>(obj: &'a Map<String, Value>, field: &str) -> Result<&'a str, SchemaError> {
    let v = obj
        .get(field)
        .ok_or_else(|| SchemaError::new(field, "missing required field"))?;
    let s = v
        .as_str()
        .ok_or_else(|| SchemaError::new(field, "expected a string"))?;
    if s.trim().is_empty() {
        return Err(SchemaError::new(field, "must not be empty"));
    }
    Ok(s)
}

fn array_of_len<'a>(
    obj: &'a Map<String, Value>,
    field: &str,
    len: usize,
) -> Result<&'a Vec<Value>, SchemaError> {
    let arr = obj
        .get(field)
        .ok_or_else(|| SchemaError::new(field, "missing required field"))?
        .as_array()
        .ok_or_else(|| SchemaError::new(field, "expected an array"))?;
    if arr.len() != len {
        return Err(SchemaError::new(
            field,
            format!("expected exactly {len} entries, got {}", arr.len()),
        ));
    }
    Ok(arr)
}

/// Scene text from either a bare string or an object with a `description`.
pub fn scene_text(v: &Value) -> Option<&str> {
    let s = match v {
        Value::String(s) => s.as_str(),
        Value::Object(o) => o.get("description")?.as_str()?,
        _ => return None,
    };
    (!s.trim().is_empty()).then_some(s)
}

/// Interprets `true`/`false` or a yes/no string (case and trailing
/// punctuation ignored).
pub fn yes_no(v: &Value) -> Option<bool> {
    match v {
        Value::Bool(b) => Some(*b),
        Value::String(s) => {
            let t = s
                .trim()
                .trim_end_matches(|c: char| c.is_ascii_punctuation())
                .to_ascii_lowercase();
            match t.as_str() {
                "yes" | "true" => Some(true),
                "no" | "false" => Some(false),
                _ => None,
            }
        }
        _ => None,
    }
}

/// The balanced `{ ... }` region opening at byte `start`, ignoring braces
/// inside JSON strings.
fn balanced_object_at(text: &str, start: usize) -> Option<&str> {
    let bytes = text.as_bytes();
    let mut depth = 0usize;
    let mut in_string = false;
    let mut escaped = false;
    for (i, &b) in bytes.iter().enumerate().skip(start) {
        if in_string {
            if escaped {
                escaped = false;
            } else if b == b'\\' {
                escaped = true;
            } else if b == b'"' {
                in_string = false;
            }
            continue;
        }
        match b {
            b'"' => in_string = true,
            b'{' => depth += 1,
            b'}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(&text[start..=i]);
                }
            }
            _ => {}
        }
    }
    None
}

/// Locates the first balanced JSON object in `raw` that satisfies `schema`.
///
/// When some object parses but fails validation, the error from the first
/// such object is returned.
pub fn validate_json(raw: &str, schema: &Schema) -> Result<Value, SchemaError> {
    let mut first_error: Option<SchemaError> = None;
    for (start, _) in raw.match_indices('{') {
        let Some(candidate) = balanced_object_at(raw, start) else {
            continue;
        };
        let Ok(Value::Object(obj)) = serde_json::from_str::<Value>(candidate) else {
            continue;
        };
        match schema.check(&obj) {
            Ok(()) => return Ok(Value::Object(obj)),
            Err(e) => {
                first_error.get_or_insert(e);
            }
        }
    }
    Err(first_error.unwrap_or_else(|| SchemaError::new("$", "no JSON object found in reply")))
}

/// Shortens `s` to at most `max` characters for error reports.
pub fn truncate(s: &str, max: usize) -> String {
    match s.char_indices().nth(max) {
        Some((i, _)) => {
            let mut out = s[..i].to_owned();
            out.push('…');
            out
        }
        None => s.to_string(),
    }
}
