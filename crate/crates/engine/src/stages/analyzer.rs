//! Questioning the candidate image.

use anywhere_core::analysis::AnalysisReport;
use anywhere_core::prompt::ForegroundDescription;
use anywhere_core::Error as CoreError;

use super::imaging::CandidateImage;
use super::StageContext;
use crate::agent::{call_chat, AgentRole, ChatRequest};
use crate::codec::encode_png;
use crate::error::{AtStage, StageError};
use crate::report::{Stage, StageRecord};

/// Renders the analyzer prompt for `subject.object_name`, sends it with the
/// candidate and turns the yes/no answers into a verdict.
pub fn analyze_candidate(
    ctx: StageContext<'_>,
    candidate: &CandidateImage,
    subject: &ForegroundDescription,
) -> Result<(AnalysisReport, StageRecord), StageError> {
    let settings = &ctx.config.analyzer;
    let name = subject.object_name.as_str();
    let png = encode_png(&candidate.image).at(Stage::Analyze)?;
    let request = ChatRequest::new(AgentRole::Analyzer, settings.render_prompt(name), "analysis_answers")
        .with_image(&png)
        .with_seed(candidate.provenance.seed);
    let agent = ctx.agents.get(AgentRole::Analyzer).at(Stage::Analyze)?;
    let response = call_chat(
        agent,
        ctx.config.endpoint(AgentRole::Analyzer),
        &request,
        &settings.schema(),
        ctx.config.max_json_repairs,
    )
    .at(Stage::Analyze)?;
    let report = settings
        .report_from_reply(&response.parsed, name)
        .map_err(|e| StageError::new(Stage::Analyze, CoreError::Schema(e)))?;
    Ok((report, StageRecord::call(Stage::Analyze, AgentRole::Analyzer, response.stats)))
}
