//! Outcome analysis: analyzer prompt, verdict, feedback text and the
//! accept / regenerate / exhausted decision.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::prompt::render;
use crate::schema::{yes_no, Schema, SchemaError};

pub const ANALYZER_TEMPLATE: &str = include_str!("../assets/analyzer.txt");
const DEFAULT_QUESTIONS: &str = include_str!("../assets/analyzer_questions.tsv");

pub const DEFAULT_AESTHETIC_FLOOR: u8 = 3;
pub const AESTHETIC_FEEDBACK: &str =
    "The previous image scored {score} of 5 for aesthetics; propose a more visually pleasing scene for the {subject}.";

/// One yes/no question put to the analyzer. `{subject}` in either text is
/// replaced with the object name.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Question {
    pub id: String,
    pub text: String,
    /// Sentence added to the feedback when the answer is no.
    pub feedback: String,
    #[serde(default = "default_true")]
    pub mandatory: bool,
}

fn default_true() -> bool {
    true
}

/// Parses the tab-separated question asset: `id<TAB>question<TAB>feedback`,
/// `#` comments and blank lines skipped.
pub fn parse_question_table(table: &str) -> Result<Vec<Question>, String> {
    table
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|(i, line)| {
            let mut cols = line.split('\t');
            match (cols.next(), cols.next(), cols.next(), cols.next()) {
                (Some(id), Some(text), Some(feedback), None) if !id.is_empty() => Ok(Question {
                    id: id.to_string(),
                    text: text.to_string(),
                    feedback: feedback.to_string(),
                    mandatory: true,
                }),
                _ => Err(format!("line {}: expected 3 tab-separated columns", i + 1)),
            }
        })
        .collect()
}

/// The two published questions plus perspective and background relevance.
pub fn default_questions() -> Vec<Question> {
    parse_question_table(DEFAULT_QUESTIONS).expect("bundled question table is well formed")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalyzerSettings {
    pub questions: Vec<Question>,
    /// When set, the analyzer is asked for a 1-5 score that must reach this floor.
    pub aesthetic_floor: Option<u8>,
}

impl Default for AnalyzerSettings {
    fn default() -> Self {
        Self {
            questions: default_questions(),
            aesthetic_floor: None,
        }
    }
}

impl AnalyzerSettings {
    pub fn schema(&self) -> Schema {
        Schema::AnalysisAnswers {
            questions: self.questions.iter().map(|q| q.id.clone()).collect(),
            require_aesthetic: self.aesthetic_floor.is_some(),
        }
    }

    /// The JSON shape shown to the analyzer. Every question appears with its
    /// text, which is how questions beyond the two in the template reach the
    /// model.
    pub fn json_format(&self, subject: &str) -> String {
        let mut out = String::from("{\"answers\": {");
        for (i, q) in self.questions.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            let text = render(&q.text, &[("subject", subject)]);
            let entry = serde_json::to_string(&format!("yes or no: {text}")).expect("string");
            out.push_str(&format!("\"{}\": {}", q.id, entry));
        }
        out.push('}');
        if self.aesthetic_floor.is_some() {
            out.push_str(", \"aesthetic_score\": \"integer from 1 to 5\"");
        }
        out.push('}');
        out
    }

    pub fn render_prompt(&self, subject: &str) -> String {
        render(
            ANALYZER_TEMPLATE,
            &[("subject", subject), ("json_format", &self.json_format(subject))],
        )
    }

    /// Builds the verdict from a reply already validated against [`Self::schema`].
    pub fn report_from_reply(&self, value: &Value, subject: &str) -> Result<AnalysisReport, SchemaError> {
        let answers_obj = value
            .get("answers")
            .and_then(Value::as_object)
            .ok_or_else(|| SchemaError::new("answers", "expected an object"))?;
        let mut answers = BTreeMap::new();
        for q in &self.questions {
            let ans = answers_obj
                .get(q.id.as_str())
                .and_then(yes_no)
                .ok_or_else(|| SchemaError::new(format!("answers.{}", q.id), "expected yes or no"))?;
            answers.insert(q.id.clone(), ans);
        }
        let aesthetic_estimate = match self.aesthetic_floor {
            Some(_) => Some(
                value
                    .get("aesthetic_score")
                    .and_then(Value::as_u64)
                    .filter(|s| (1..=5).contains(s))
                    .ok_or_else(|| SchemaError::new("aesthetic_score", "expected an integer in 1..=5"))?
                    as u8,
            ),
            None => None,
        };
        Ok(self.build_report(answers, aesthetic_estimate, subject))
    }

    pub fn build_report(
        &self,
        answers: BTreeMap<String, bool>,
        aesthetic_estimate: Option<u8>,
        subject: &str,
    ) -> AnalysisReport {
        let mut sentences = Vec::new();
        let mut mandatory_passed = 0u32;
        let mut all_mandatory = true;
        for q in self.questions.iter().filter(|q| q.mandatory) {
            if answers.get(&q.id).copied().unwrap_or(false) {
                mandatory_passed += 1;
            } else {
                all_mandatory = false;
                sentences.push(render(&q.feedback, &[("subject", subject)]));
            }
        }
        let aesthetic_ok = match (self.aesthetic_floor, aesthetic_estimate) {
            (Some(floor), Some(score)) if score < floor => {
                let score = score.to_string();
                sentences.push(render(
                    AESTHETIC_FEEDBACK,
                    &[("score", &score), ("subject", subject)],
                ));
                false
            }
            _ => true,
        };
        AnalysisReport {
            answers,
            aesthetic_estimate,
            feedback_text: sentences.join(" "),
            passed: all_mandatory && aesthetic_ok,
            mandatory_passed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub answers: BTreeMap<String, bool>,
    pub aesthetic_estimate: Option<u8>,
    /// One sentence per failed check; empty when passed.
    pub feedback_text: String,
    pub passed: bool,
    /// Count of mandatory questions answered yes.
    pub mandatory_passed: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "feedback", rename_all = "snake_case")]
pub enum Decision {
    Accept,
    Regenerate(String),
    Exhausted,
}

/// `iteration` is 1-based.
pub fn decide(report: &AnalysisReport, iteration: u32, max_iterations: u32) -> Decision {
    if report.passed {
        Decision::Accept
    } else if iteration < max_iterations {
        Decision::Regenerate(report.feedback_text.clone())
    } else {
        Decision::Exhausted
    }
}

/// Best-so-far among `(iteration, report)` pairs: most mandatory questions
/// passed, ties going to the later iteration.
pub fn best_so_far<'a, I>(reports: I) -> Option<u32>
where
    I: IntoIterator<Item = (u32, &'a AnalysisReport)>,
{
    reports
        .into_iter()
        .max_by_key(|(iteration, r)| (r.mandatory_passed, *iteration))
        .map(|(iteration, _)| iteration)
}
