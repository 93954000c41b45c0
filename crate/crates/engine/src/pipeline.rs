//! The feedback loop: set up the foreground once, then per iteration
//! narrate (first round only) → brainstorm → rank → select → canny (first
//! round only) → template → segment → detect → [repaint → resegment] →
//! composite → refine → analyze → decide.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use anywhere_core::analysis::{best_so_far, decide, Decision};
use anywhere_core::canny::canny_edges;
use anywhere_core::composite::apply_mask_to_alpha;
use anywhere_core::detect::{detect_over_imagination, scaled_radius};
use anywhere_core::mask::{binarize_alpha, overlap_stats};
use anywhere_core::prompt::{repaint_prompt, select_and_assemble, ForegroundDescription};
use anywhere_core::{BinaryMask, EdgeMap, RasterImage};

use crate::agent::{call_image_task, AgentError, AgentRole, AgentSet, ImageTask, ImageTaskRequest};
use crate::codec::{decode_png, encode_edge_png, encode_mask_png, encode_png, letterbox};
use crate::config::PipelineConfig;
use crate::error::{AtStage, StageError, StageFailure};
use crate::report::{run_id_for, sha256_hex, IterationRecord, RunReport, Stage, StageRecord, Termination};
use crate::stages::analyzer::analyze_candidate;
use crate::stages::imaging::{compose, generate_template, refine, repaint_template, segment_pseudo_foreground};
use crate::stages::prompting::{brainstorm_scenes, narrate_foreground, rank_scenes};
use crate::stages::StageContext;

/// Used when removing the object name leaves nothing to inpaint with.
const FALLBACK_BACKGROUND_PROMPT: &str = "background";

pub const REPORT_FILE: &str = "report.json";

/// A configured pipeline. Cheap to share across threads; each run is
/// independent.
#[derive(Debug, Clone)]
pub struct Pipeline {
    config: PipelineConfig,
    agents: AgentSet,
}

struct ArtifactStore {
    root: PathBuf,
    run_id: String,
}

impl ArtifactStore {
    fn run_dir(&self) -> PathBuf {
        self.root.join(&self.run_id)
    }

    /// Writes `{run_id}/{group}/{name}.png` and returns that relative path.
    fn put(&self, group: &str, name: &str, png: &[u8]) -> io::Result<String> {
        let dir = self.run_dir().join(group);
        fs::create_dir_all(&dir)?;
        fs::write(dir.join(format!("{name}.png")), png)?;
        Ok(format!("{}/{group}/{name}.png", self.run_id))
    }
}

/// Per-run values fixed during setup.
struct Prepared {
    foreground: RasterImage,
    fg_mask: BinaryMask,
}

impl Pipeline {
    /// Binds every configured endpoint to an HTTP client or mock.
    pub fn new(config: PipelineConfig) -> Result<Self, AgentError> {
        let agents = AgentSet::from_endpoints(config.endpoints.values())?;
        Ok(Self { config, agents })
    }

    pub fn with_agents(config: PipelineConfig, agents: AgentSet) -> Self {
        Self { config, agents }
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    fn ctx(&self) -> StageContext<'_> {
        StageContext {
            agents: &self.agents,
            config: &self.config,
        }
    }

    /// Runs with the configured seed and the digest-derived run id.
    pub fn run(&self, foreground_png: &[u8]) -> io::Result<RunReport> {
        self.run_with(foreground_png, self.config.seed, None)
    }

    /// Runs one foreground and writes `{artifact_dir}/{run_id}/report.json`.
    /// Stage failures end up in the report's termination; only a failure to
    /// write the report itself is returned as an error.
    pub fn run_with(&self, foreground_png: &[u8], seed: u64, run_id: Option<&str>) -> io::Result<RunReport> {
        let input_digest = sha256_hex(foreground_png);
        let run_id = run_id.map_or_else(|| run_id_for(&input_digest, seed), str::to_string);
        let store = ArtifactStore {
            root: self.config.artifact_dir.clone(),
            run_id: run_id.clone(),
        };
        clear_previous_run(&store.run_dir())?;

        let mut report = RunReport {
            run_id,
            input_digest,
            seed,
            resolution: self.config.resolution,
            max_iterations: self.config.max_iterations,
            repaint_margin: scaled_radius(self.config.dilate_radius, self.config.resolution),
            foreground: None,
            setup_artifacts: Default::default(),
            setup_trace: Vec::new(),
            iterations: Vec::new(),
            termination: Termination::Exhausted,
            selected_iteration: None,
        };
        if let Err(e) = self.execute(foreground_png, seed, &store, &mut report) {
            log::error!("run {} failed: {e}", report.run_id);
            report.termination = Termination::Failed {
                stage: e.stage,
                error: e.failure.to_string(),
            };
            report.selected_iteration = None;
        }
        log::info!(
            "run {} finished: {} after {} iteration(s)",
            report.run_id,
            report.termination.as_str(),
            report.iterations.len()
        );
        fs::create_dir_all(store.run_dir())?;
        fs::write(store.run_dir().join(REPORT_FILE), report.to_canonical_json())?;
        Ok(report)
    }

    fn setup(&self, png: &[u8], store: &ArtifactStore, report: &mut RunReport) -> Result<Prepared, StageError> {
        let cfg = &self.config;
        let decoded = decode_png(png).at(Stage::Load)?;
        report.setup_trace.push(StageRecord::local(Stage::Load));

        let stage = Stage::SegmentForeground;
        let cutout = if decoded.has_alpha() {
            report.setup_trace.push(StageRecord::local(stage));
            decoded
        } else {
            // No alpha: ask the segmenter for the subject.
            let request = ImageTaskRequest::new(ImageTask::Segment, report.seed)
                .with_image("image", &encode_png(&decoded).at(stage)?);
            let role = AgentRole::Segmenter;
            let agent = self.agents.get(role).at(stage)?;
            let (out, stats) =
                call_image_task(agent, cfg.endpoint(role), &request, decoded.dimensions()).at(stage)?;
            report.setup_trace.push(StageRecord::call(stage, role, stats));
            apply_mask_to_alpha(&decoded, &out.into_mask().at(stage)?).at(stage)?
        };
        let placed = letterbox(&cutout, cfg.resolution).at(stage)?;
        let fg_mask = binarize_alpha(&placed, cfg.alpha_threshold).at(stage)?;
        if fg_mask.is_empty() {
            return Err(StageError::new(
                stage,
                StageFailure::Precondition("foreground has no pixels above the alpha threshold".into()),
            ));
        }
        let foreground = apply_mask_to_alpha(&placed, &fg_mask).at(stage)?;
        let artifacts = &mut report.setup_artifacts;
        artifacts.insert("foreground".into(), store.put("setup", "foreground", &encode_png(&foreground).at(stage)?).at(stage)?);
        artifacts.insert("fg_mask".into(), store.put("setup", "fg_mask", &encode_mask_png(&fg_mask).at(stage)?).at(stage)?);
        Ok(Prepared { foreground, fg_mask })
    }

    fn execute(&self, png: &[u8], seed: u64, store: &ArtifactStore, report: &mut RunReport) -> Result<(), StageError> {
        let cfg = &self.config;
        let prepared = self.setup(png, store, report)?;
        let mut desc: Option<ForegroundDescription> = None;
        let mut edges: Option<(EdgeMap, String)> = None;
        let mut feedback = String::new();

        for k in 1..=cfg.max_iterations {
            report.iterations.push(IterationRecord {
                iteration: k,
                seed: seed.wrapping_add(u64::from(k - 1)),
                feedback_in: feedback.clone(),
                ..Default::default()
            });
            let it = report.iterations.last_mut().expect("just pushed");
            let result = self.iterate(&prepared, seed, store, it, &mut desc, &mut edges);
            if report.foreground.is_none() {
                report.foreground = desc.clone();
            }
            let decision = result?;
            match decision {
                Decision::Accept => {
                    report.termination = Termination::Accepted;
                    report.selected_iteration = Some(k);
                    return Ok(());
                }
                Decision::Regenerate(next) => feedback = next,
                Decision::Exhausted => break,
            }
        }
        report.termination = Termination::Exhausted;
        report.selected_iteration = best_so_far(
            report
                .iterations
                .iter()
                .filter_map(|it| it.analysis_report.as_ref().map(|r| (it.iteration, r))),
        );
        Ok(())
    }

    fn iterate(
        &self,
        prepared: &Prepared,
        run_seed: u64,
        store: &ArtifactStore,
        it: &mut IterationRecord,
        desc_cache: &mut Option<ForegroundDescription>,
        edge_cache: &mut Option<(EdgeMap, String)>,
    ) -> Result<Decision, StageError> {
        let ctx = self.ctx();
        let cfg = &self.config;
        let k = it.iteration;
        let seed = it.seed;
        let group = format!("iter{k}");
        let put = |name: &str, png: Vec<u8>, stage: Stage| store.put(&group, name, &png).at(stage);

        let desc = match desc_cache {
            Some(d) => {
                it.trace.push(StageRecord::cached(Stage::Narrate, AgentRole::Narrator));
                d.clone()
            }
            None => {
                let (d, rec) = narrate_foreground(ctx, &prepared.foreground, run_seed)?;
                it.trace.push(rec);
                *desc_cache = Some(d.clone());
                d
            }
        };

        let (scenes, rec) = brainstorm_scenes(ctx, &desc, &it.feedback_in, seed)?;
        it.trace.push(rec);
        it.scenes = scenes.scenes.clone();

        let (ranking, rec) = rank_scenes(ctx, &desc, &scenes, seed)?;
        it.trace.push(rec);
        it.ranks = ranking.ranks.clone();

        let prompt = select_and_assemble(&scenes, &ranking, &desc).at(Stage::Select)?;
        it.trace.push(StageRecord::local(Stage::Select));
        it.final_prompt = Some(prompt.clone());

        let edges = match edge_cache {
            Some((e, path)) => {
                it.trace.push(StageRecord {
                    cached: true,
                    ..StageRecord::local(Stage::Canny)
                });
                it.artifact_paths.insert("edge".into(), path.clone());
                e.clone()
            }
            None => {
                let e = canny_edges(&prepared.foreground, cfg.canny_low, cfg.canny_high).at(Stage::Canny)?;
                let path = put("edge", encode_edge_png(&e).at(Stage::Canny)?, Stage::Canny)?;
                it.trace.push(StageRecord::local(Stage::Canny));
                it.artifact_paths.insert("edge".into(), path.clone());
                *edge_cache = Some((e.clone(), path));
                e
            }
        };

        let (mut template, rec) = generate_template(ctx, &edges, &prompt, seed)?;
        it.trace.push(rec);
        let path = put("template", encode_png(&template.image).at(Stage::Template)?, Stage::Template)?;
        it.artifact_paths.insert("template".into(), path);

        let (pseudo, rec) = segment_pseudo_foreground(ctx, &mut template, seed, Stage::Segment)?;
        it.trace.push(rec);
        let path = put("pseudo_mask", encode_mask_png(&pseudo).at(Stage::Segment)?, Stage::Segment)?;
        it.artifact_paths.insert("pseudo_mask".into(), path);

        let margin = scaled_radius(cfg.dilate_radius, cfg.resolution);
        let detection = detect_over_imagination(&prepared.fg_mask, &pseudo, cfg.tau, margin).at(Stage::Detect)?;
        it.trace.push(StageRecord::local(Stage::Detect));
        it.overlap_stats = Some(detection.stats);
        it.detection_triggered = Some(detection.triggered);

        if let Some(mask) = detection.repaint_mask() {
            it.repaint_area = Some(mask.area());
            let path = put("repaint_mask", encode_mask_png(mask).at(Stage::Repaint)?, Stage::Repaint)?;
            it.artifact_paths.insert("repaint_mask".into(), path);
            let mut background = repaint_prompt(&prompt, &desc);
            if background.trim().is_empty() {
                background = FALLBACK_BACKGROUND_PROMPT.to_string();
            }
            let rec = repaint_template(ctx, &mut template, &detection, &background, &desc.object_name, seed)?;
            it.trace.push(rec);
            it.repaint_prompt = Some(background);
            let path = put(
                "repainted_template",
                encode_png(&template.image).at(Stage::Repaint)?,
                Stage::Repaint,
            )?;
            it.artifact_paths.insert("repainted_template".into(), path);

            let (post, rec) = segment_pseudo_foreground(ctx, &mut template, seed, Stage::Resegment)?;
            it.trace.push(rec);
            let path = put(
                "pseudo_mask_repainted",
                encode_mask_png(&post).at(Stage::Resegment)?,
                Stage::Resegment,
            )?;
            it.artifact_paths.insert("pseudo_mask_repainted".into(), path);
            it.post_repaint_stats = Some(overlap_stats(&prepared.fg_mask, &post).at(Stage::Resegment)?);
        }

        let (composite, rec) = compose(&prepared.foreground, &template)?;
        it.trace.push(rec);
        let path = put("composite", encode_png(&composite).at(Stage::Composite)?, Stage::Composite)?;
        it.artifact_paths.insert("composite".into(), path);
        let (candidate, rec) = refine(ctx, &composite, &template, &prompt, seed, k)?;
        it.trace.push(rec);
        let path = put("candidate", encode_png(&candidate.image).at(Stage::Refine)?, Stage::Refine)?;
        it.artifact_paths.insert("candidate".into(), path);

        let (analysis, rec) = analyze_candidate(ctx, &candidate, &desc)?;
        it.trace.push(rec);
        let decision = decide(&analysis, k, cfg.max_iterations);
        it.trace.push(StageRecord::local(Stage::Decide));
        it.analysis_report = Some(analysis);
        it.decision = Some(decision.clone());
        Ok(decision)
    }
}

/// Removes artifacts of an earlier run with the same id so the directory
/// matches the new report. Only directories holding a report are touched.
fn clear_previous_run(dir: &Path) -> io::Result<()> {
    if dir.join(REPORT_FILE).is_file() {
        fs::remove_dir_all(dir)?;
    }
    Ok(())
}

/// Validated config in, report out: binds endpoints and runs once.
pub fn run_pipeline(foreground_png: &[u8], config: &PipelineConfig) -> Result<RunReport, PipelineError> {
    config.validate().map_err(PipelineError::Config)?;
    let pipeline = Pipeline::new(config.clone()).map_err(PipelineError::Bind)?;
    pipeline.run(foreground_png).map_err(PipelineError::Io)
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    Config(crate::config::ConfigError),
    #[error("binding agents: {0}")]
    Bind(AgentError),
    #[error("writing report: {0}")]
    Io(io::Error),
}
