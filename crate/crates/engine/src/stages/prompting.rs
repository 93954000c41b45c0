//! Narrate, brainstorm and rank: the language-agent half of the pipeline.

use anywhere_core::prompt::{
    render_narrator_prompt, render_ranker_prompt, render_thinker_prompt, ForegroundDescription, SceneRanking,
    SceneSet,
};
use anywhere_core::schema::Schema;
use anywhere_core::{Error as CoreError, RasterImage};

use super::StageContext;
use crate::agent::{call_chat, AgentRole, ChatRequest};
use crate::codec::encode_png;
use crate::error::{AtStage, StageError, StageFailure};
use crate::report::{Stage, StageRecord};

fn chat(
    ctx: StageContext<'_>,
    stage: Stage,
    request: &ChatRequest,
    schema: &Schema,
) -> Result<(serde_json::Value, StageRecord), StageError> {
    let role = request.role;
    let agent = ctx.agents.get(role).at(stage)?;
    let response = call_chat(
        agent,
        ctx.config.endpoint(role),
        request,
        schema,
        ctx.config.max_json_repairs,
    )
    .at(stage)?;
    Ok((response.parsed, StageRecord::call(stage, role, response.stats)))
}

fn schema_failure(stage: Stage, e: anywhere_core::schema::SchemaError) -> StageError {
    StageError::new(stage, StageFailure::Core(CoreError::Schema(e)))
}

/// Describes a background-removed foreground.
pub fn narrate_foreground(
    ctx: StageContext<'_>,
    foreground: &RasterImage,
    seed: u64,
) -> Result<(ForegroundDescription, StageRecord), StageError> {
    if !foreground.has_alpha() {
        return Err(StageError::new(Stage::Narrate, CoreError::MissingAlpha));
    }
    let png = encode_png(foreground).at(Stage::Narrate)?;
    let request = ChatRequest::new(
        AgentRole::Narrator,
        render_narrator_prompt(&ctx.config.narrator_inquiries),
        "foreground_description",
    )
    .with_image(&png)
    .with_seed(seed);
    let (value, record) = chat(ctx, Stage::Narrate, &request, &Schema::ForegroundDescription)?;
    let desc = ForegroundDescription::from_reply(&value).map_err(|e| schema_failure(Stage::Narrate, e))?;
    Ok((desc, record))
}

/// Asks the divergent thinker for `n_scenes` scenes; empty `feedback` means
/// first round.
pub fn brainstorm_scenes(
    ctx: StageContext<'_>,
    desc: &ForegroundDescription,
    feedback: &str,
    seed: u64,
) -> Result<(SceneSet, StageRecord), StageError> {
    let n = ctx.config.n_scenes;
    let request = ChatRequest::new(AgentRole::Thinker, render_thinker_prompt(desc, feedback, n), "scene_set")
        .with_seed(seed);
    let (value, record) = chat(ctx, Stage::Brainstorm, &request, &Schema::SceneSet { count: n })?;
    let scenes = SceneSet::from_reply(&value, n, feedback).map_err(|e| schema_failure(Stage::Brainstorm, e))?;
    Ok((scenes, record))
}

pub fn rank_scenes(
    ctx: StageContext<'_>,
    desc: &ForegroundDescription,
    scenes: &SceneSet,
    seed: u64,
) -> Result<(SceneRanking, StageRecord), StageError> {
    let request =
        ChatRequest::new(AgentRole::Ranker, render_ranker_prompt(desc, scenes), "scene_ranking").with_seed(seed);
    let schema = Schema::SceneRanking { count: scenes.len() };
    let (value, record) = chat(ctx, Stage::Rank, &request, &schema)?;
    let ranking = SceneRanking::from_reply(&value, scenes.len()).map_err(|e| schema_failure(Stage::Rank, e))?;
    Ok((ranking, record))
}
