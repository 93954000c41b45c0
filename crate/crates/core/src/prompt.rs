//! Prompt generation: narrator, divergent-thinker and ranker templates, reply
//! decoding, and top-1 scene selection with final prompt assembly.
//!
//! Template assets keep the original wording. Slots are written `{name}` and
//! are substituted in a single pass, so slot-like text inside a substituted
//! value is never expanded again. With the default scene count of 5 the
//! rendered text is identical to the published templates.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::schema::{scene_text, SchemaError};

pub const NARRATOR_TEMPLATE: &str = include_str!("../assets/narrator.txt");
pub const THINKER_TEMPLATE: &str = include_str!("../assets/thinker.txt");
pub const RANKER_TEMPLATE: &str = include_str!("../assets/ranker.txt");

pub const DEFAULT_SCENE_COUNT: usize = 5;
/// Feedback slot content before any analysis has run.
pub const FIRST_ROUND_FEEDBACK: &str = "none";

/// Substitutes `{slot}` markers in one left-to-right pass. Unknown markers
/// are copied through unchanged.
pub fn render(template: &str, slots: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len() + 64);
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let replaced = after.find('}').and_then(|close| {
            let name = &after[..close];
            slots
                .iter()
                .find(|(slot, _)| *slot == name)
                .map(|(_, value)| (close, *value))
        });
        match replaced {
            Some((close, value)) => {
                out.push_str(value);
                rest = &after[close + 1..];
            }
            None => {
                out.push('{');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}

/// Narrator output for one foreground.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForegroundDescription {
    pub description: String,
    pub object_name: String,
    pub viewpoint: String,
}

impl ForegroundDescription {
    /// Decodes a reply already checked against the foreground_description schema.
    pub fn from_reply(value: &Value) -> core::result::Result<Self, SchemaError> {
        let field = |name: &str| -> core::result::Result<String, SchemaError> {
            match value.get(name).and_then(Value::as_str).map(str::trim) {
                Some(s) if !s.is_empty() => Ok(s.to_string()),
                _ => Err(SchemaError::new(name, "expected a non-empty string")),
            }
        };
        Ok(Self {
            object_name: field("name")?,
            viewpoint: field("viewpoint")?,
            description: field("description")?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SceneSet {
    pub scenes: Vec<String>,
    /// Feedback text that was rendered into the thinker prompt.
    pub generation_feedback: String,
}

impl SceneSet {
    pub fn from_reply(value: &Value, count: usize, feedback: &str) -> core::result::Result<Self, SchemaError> {
        let arr = value
            .get("scenes")
            .and_then(Value::as_array)
            .ok_or_else(|| SchemaError::new("scenes", "expected an array"))?;
        if arr.len() != count {
            return Err(SchemaError::new(
                "scenes",
                format!("expected exactly {count} entries, got {}", arr.len()),
            ));
        }
        let scenes = arr
            .iter()
            .enumerate()
            .map(|(i, v)| {
                scene_text(v)
                    .map(|s| s.trim().to_string())
                    .ok_or_else(|| SchemaError::new(format!("scenes[{i}]"), "expected a non-empty string"))
            })
            .collect::<core::result::Result<Vec<_>, _>>()?;
        Ok(Self {
            scenes,
            generation_feedback: feedback.to_string(),
        })
    }

    pub fn len(&self) -> usize {
        self.scenes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenes.is_empty()
    }
}

/// Rank per scene, index-aligned with [`SceneSet::scenes`]; 1 is best.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SceneRanking {
    pub ranks: Vec<u32>,
}

impl SceneRanking {
    /// Accepts only permutations of `1..=len`.
    pub fn new(ranks: Vec<u32>) -> Result<Self> {
        let n = ranks.len();
        let mut seen = alloc::vec![false; n];
        for &r in &ranks {
            if r == 0 || r as usize > n {
                return Err(Error::InvalidRanking(format!("rank {r} outside 1..={n}")));
            }
            if core::mem::replace(&mut seen[r as usize - 1], true) {
                return Err(Error::InvalidRanking(format!("duplicate rank {r}")));
            }
        }
        Ok(Self { ranks })
    }

    pub fn from_reply(value: &Value, count: usize) -> core::result::Result<Self, SchemaError> {
        let arr = value
            .get("ranks")
            .and_then(Value::as_array)
            .ok_or_else(|| SchemaError::new("ranks", "expected an array"))?;
        if arr.len() != count {
            return Err(SchemaError::new(
                "ranks",
                format!("expected exactly {count} entries, got {}", arr.len()),
            ));
        }
        let ranks = arr
            .iter()
            .enumerate()
            .map(|(i, v)| {
                v.as_u64()
                    .and_then(|r| u32::try_from(r).ok())
                    .ok_or_else(|| SchemaError::new(format!("ranks[{i}]"), "expected a positive integer"))
            })
            .collect::<core::result::Result<Vec<_>, _>>()?;
        Self::new(ranks).map_err(|e| SchemaError::new("ranks", e.to_string()))
    }

    /// Index of the scene holding rank 1.
    pub fn top_index(&self) -> usize {
        self.ranks
            .iter()
            .position(|&r| r == 1)
            .expect("a valid ranking always contains rank 1")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FinalPrompt {
    pub scene_text: String,
    /// `"{scene}, {object name}, {viewpoint}"`
    pub assembled: String,
}

/// JSON shape shown to the narrator.
pub fn narrator_json_format() -> String {
    r#"{"description": "<detailed description of the object and its important features>", "name": "<name of the object>", "viewpoint": "<viewpoint of the object>"}"#.to_string()
}

pub fn thinker_json_format(count: usize) -> String {
    let entries: Vec<String> = (1..=count)
        .map(|i| format!("\"<scene description {i}>\""))
        .collect();
    format!("{{\"scenes\": [{}]}}", entries.join(", "))
}

/// The ranking polarity is stated here, inside the format slot, so the
/// template text itself stays untouched.
pub fn ranker_json_format(count: usize) -> String {
    let entries: Vec<String> = (1..=count)
        .map(|i| format!("<sort number of scene {i}>"))
        .collect();
    format!(
        "{{\"ranks\": [{}]}} where each sort number is an integer from 1 to {count}, every number is used exactly once, and 1 marks the scene most appropriate with the object",
        entries.join(", ")
    )
}

/// Narrator prompt. Extra inquiries, when configured, follow the template on
/// their own lines.
pub fn render_narrator_prompt(extra_inquiries: &[String]) -> String {
    let mut out = render(NARRATOR_TEMPLATE, &[("YOUR_JSON_FORMAT", &narrator_json_format())]);
    for q in extra_inquiries {
        out.push('\n');
        out.push_str(q);
    }
    out
}

/// Divergent-thinker prompt; empty feedback renders as [`FIRST_ROUND_FEEDBACK`].
pub fn render_thinker_prompt(desc: &ForegroundDescription, feedback: &str, count: usize) -> String {
    let feedback = if feedback.trim().is_empty() {
        FIRST_ROUND_FEEDBACK
    } else {
        feedback
    };
    let n = count.to_string();
    render(
        THINKER_TEMPLATE,
        &[
            ("object_name", &desc.object_name),
            ("viewpoint", &desc.viewpoint),
            ("feedback", feedback),
            ("n", &n),
            ("prompt", &desc.description),
            ("YOUR_JSON_FORMAT", &thinker_json_format(count)),
        ],
    )
}

/// Numbered scene list for the ranker, e.g. `1. a beach; 2. a kitchen`.
pub fn format_scene_list(scenes: &SceneSet) -> String {
    scenes
        .scenes
        .iter()
        .enumerate()
        .map(|(i, s)| format!("{}. {}", i + 1, s))
        .collect::<Vec<_>>()
        .join("; ")
}

pub fn render_ranker_prompt(desc: &ForegroundDescription, scenes: &SceneSet) -> String {
    let n = scenes.len().to_string();
    render(
        RANKER_TEMPLATE,
        &[
            ("img_desc", &desc.description),
            ("n", &n),
            ("scene_descs", &format_scene_list(scenes)),
            ("json_format", &ranker_json_format(scenes.len())),
        ],
    )
}

/// Picks the rank-1 scene and appends the object name and viewpoint.
pub fn select_and_assemble(
    scenes: &SceneSet,
    ranking: &SceneRanking,
    desc: &ForegroundDescription,
) -> Result<FinalPrompt> {
    if ranking.ranks.len() != scenes.len() || scenes.is_empty() {
        return Err(Error::InvalidRanking(format!(
            "{} ranks for {} scenes",
            ranking.ranks.len(),
            scenes.len()
        )));
    }
    let scene_text = scenes.scenes[ranking.top_index()].clone();
    let assembled = format!("{}, {}, {}", scene_text, desc.object_name, desc.viewpoint);
    Ok(FinalPrompt {
        scene_text,
        assembled,
    })
}

/// Background-only prompt for the inpainter: the scene text with every
/// case-insensitive occurrence of the object name removed and the leftover
/// punctuation tidied.
pub fn repaint_prompt(prompt: &FinalPrompt, desc: &ForegroundDescription) -> String {
    let name = desc.object_name.trim();
    let mut text = prompt.scene_text.clone();
    if !name.is_empty() {
        let needle = name.to_lowercase();
        loop {
            let lower = text.to_lowercase();
            // Lowercasing can change byte lengths outside ASCII; only cut when
            // the offsets line up with the original.
            match lower.find(&needle) {
                Some(i) if lower.len() == text.len() && text.is_char_boundary(i) => {
                    text.replace_range(i..i + needle.len(), "");
                }
                _ => break,
            }
        }
    }
    let words: Vec<&str> = text.split_whitespace().collect();
    let mut out = words.join(" ");
    for (from, to) in [(" ,", ","), (",,", ","), (" .", ".")] {
        while out.contains(from) {
            out = out.replace(from, to);
        }
    }
    let out = out
        .trim_matches(|c: char| c == ',' || c.is_whitespace())
        .to_string();
    if out.is_empty() {
        prompt.scene_text.clone()
    } else {
        out
    }
}
