//! Template generation, pseudo-foreground segmentation, repainting,
//! compositing and refinement.

use anywhere_core::composite::composite_copy_paste;
use anywhere_core::detect::DetectionResult;
use anywhere_core::prompt::FinalPrompt;
use anywhere_core::{BinaryMask, EdgeMap, RasterImage};
use serde::{Deserialize, Serialize};

use super::StageContext;
use crate::agent::{call_image_task, ImageOutput, ImageTask, ImageTaskRequest};
use crate::codec::{encode_edge_png, encode_mask_png, encode_png};
use crate::error::{AtStage, StageError, StageFailure};
use crate::report::{Stage, StageRecord};

#[derive(Debug, Clone, PartialEq)]
pub struct TemplateImage {
    pub image: RasterImage,
    /// Set by [`segment_pseudo_foreground`].
    pub pseudo_mask: Option<BinaryMask>,
    pub repainted: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub prompt: String,
    pub template_repainted: bool,
    pub iteration: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateImage {
    pub image: RasterImage,
    pub provenance: Provenance,
}

fn send(
    ctx: StageContext<'_>,
    stage: Stage,
    request: &ImageTaskRequest,
    dims: (u32, u32),
) -> Result<(ImageOutput, StageRecord), StageError> {
    let role = request.task.role();
    let agent = ctx.agents.get(role).at(stage)?;
    let (output, stats) = call_image_task(agent, ctx.config.endpoint(role), request, dims).at(stage)?;
    Ok((output, StageRecord::call(stage, role, stats)))
}

fn generation_dims(ctx: StageContext<'_>) -> (u32, u32) {
    (ctx.config.resolution, ctx.config.resolution)
}

/// Edge-conditioned generation of the scene template.
pub fn generate_template(
    ctx: StageContext<'_>,
    edges: &EdgeMap,
    prompt: &FinalPrompt,
    seed: u64,
) -> Result<(TemplateImage, StageRecord), StageError> {
    let dims = generation_dims(ctx);
    if edges.dimensions() != dims {
        return Err(StageError::new(
            Stage::Template,
            StageFailure::Precondition(format!(
                "edge map is {}x{}, generation resolution is {}x{}",
                edges.width(),
                edges.height(),
                dims.0,
                dims.1
            )),
        ));
    }
    let png = encode_edge_png(edges).at(Stage::Template)?;
    let request = ImageTaskRequest::new(ImageTask::Canny2img, seed)
        .with_image("edge", &png)
        .with_prompt(prompt.assembled.clone());
    let (output, record) = send(ctx, Stage::Template, &request, dims)?;
    let image = output.into_image().at(Stage::Template)?.to_rgb();
    Ok((
        TemplateImage {
            image,
            pseudo_mask: None,
            repainted: false,
        },
        record,
    ))
}

/// Segments the template's subject and stores it as the pseudo-foreground.
/// `stage` is [`Stage::Segment`] or, after repainting, [`Stage::Resegment`].
pub fn segment_pseudo_foreground(
    ctx: StageContext<'_>,
    template: &mut TemplateImage,
    seed: u64,
    stage: Stage,
) -> Result<(BinaryMask, StageRecord), StageError> {
    let png = encode_png(&template.image).at(stage)?;
    let request = ImageTaskRequest::new(ImageTask::Segment, seed).with_image("image", &png);
    let (output, record) = send(ctx, stage, &request, template.image.dimensions())?;
    let mask = output.into_mask().at(stage)?;
    template.pseudo_mask = Some(mask.clone());
    Ok((mask, record))
}

/// Inpaints the repaint region with a background-only prompt.
pub fn repaint_template(
    ctx: StageContext<'_>,
    template: &mut TemplateImage,
    detection: &DetectionResult,
    background_prompt: &str,
    object_name: &str,
    seed: u64,
) -> Result<StageRecord, StageError> {
    let mask = match (detection.triggered, detection.repaint_mask()) {
        (true, Some(m)) => m,
        _ => {
            return Err(StageError::new(
                Stage::Repaint,
                StageFailure::Precondition("repaint requested without a triggered detection".into()),
            ))
        }
    };
    let image_png = encode_png(&template.image).at(Stage::Repaint)?;
    let mask_png = encode_mask_png(mask).at(Stage::Repaint)?;
    let mut request = ImageTaskRequest::new(ImageTask::Inpaint, seed)
        .with_image("image", &image_png)
        .with_image("mask", &mask_png)
        .with_prompt(background_prompt);
    if !object_name.trim().is_empty() {
        request = request.with_negative_prompt(object_name);
    }
    let (output, record) = send(ctx, Stage::Repaint, &request, template.image.dimensions())?;
    template.image = output.into_image().at(Stage::Repaint)?.to_rgb();
    template.repainted = true;
    template.pseudo_mask = None;
    Ok(record)
}

/// Copy-paste of the foreground over the template.
pub fn compose(foreground: &RasterImage, template: &TemplateImage) -> Result<(RasterImage, StageRecord), StageError> {
    let composite = composite_copy_paste(foreground, &template.image).at(Stage::Composite)?;
    Ok((composite, StageRecord::local(Stage::Composite)))
}

/// Image-to-image pass over the composite at `refine_strength`.
pub fn refine(
    ctx: StageContext<'_>,
    composite: &RasterImage,
    template: &TemplateImage,
    prompt: &FinalPrompt,
    seed: u64,
    iteration: u32,
) -> Result<(CandidateImage, StageRecord), StageError> {
    let png = encode_png(composite).at(Stage::Refine)?;
    let request = ImageTaskRequest::new(ImageTask::Img2img, seed)
        .with_image("image", &png)
        .with_prompt(prompt.assembled.clone())
        .with_strength(ctx.config.refine_strength);
    let (output, record) = send(ctx, Stage::Refine, &request, generation_dims(ctx))?;
    let image = output.into_image().at(Stage::Refine)?.to_rgb();
    let candidate = CandidateImage {
        image,
        provenance: Provenance {
            seed,
            prompt: prompt.assembled.clone(),
            template_repainted: template.repainted,
            iteration,
        },
    };
    Ok((candidate, record))
}

/// [`compose`] then [`refine`]; returns the raw composite too.
pub fn compose_and_refine(
    ctx: StageContext<'_>,
    foreground: &RasterImage,
    template: &TemplateImage,
    prompt: &FinalPrompt,
    seed: u64,
    iteration: u32,
) -> Result<(RasterImage, CandidateImage, [StageRecord; 2]), StageError> {
    let (composite, composed) = compose(foreground, template)?;
    let (candidate, refined) = refine(ctx, &composite, template, prompt, seed, iteration)?;
    Ok((composite, candidate, [composed, refined]))
}
