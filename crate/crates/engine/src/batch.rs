//! Many foregrounds, several results each, on a bounded thread pool.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::pipeline::Pipeline;
use crate::report::{canonical_json, Termination};

pub const SUMMARY_FILE: &str = "summary.json";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BatchInput {
    /// File stem; used in run ids.
    pub name: String,
    pub png: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchRecord {
    pub input: String,
    pub result_index: u32,
    pub run_id: String,
    pub seed: u64,
    /// "accepted", "exhausted" or "failed".
    pub termination: String,
    pub iterations: usize,
    pub selected_iteration: Option<u32>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub inputs: usize,
    pub total_runs: usize,
    pub accepted: usize,
    pub exhausted: usize,
    pub failed: usize,
    /// Over runs that finished (accepted or exhausted).
    pub mean_iterations: f64,
    pub runs: Vec<BatchRecord>,
}

impl BatchSummary {
    pub fn to_canonical_json(&self) -> String {
        canonical_json(&serde_json::to_value(self).expect("summary serializes"))
    }
}

/// `*.png` files directly inside `dir`, sorted by file name.
pub fn load_inputs(dir: &Path) -> io::Result<Vec<BatchInput>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|e| e.eq_ignore_ascii_case("png")))
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|p| {
            Ok(BatchInput {
                name: p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
                png: fs::read(&p)?,
            })
        })
        .collect()
}

/// Seed for result `index` of an input: results are spaced by
/// `max_iterations` so their per-iteration seeds never collide.
pub fn result_seed(base: u64, index: u32, max_iterations: u32) -> u64 {
    base.wrapping_add(u64::from(index) * u64::from(max_iterations))
}

/// Runs `results_per_input` pipelines per input on `parallel` threads and
/// writes `summary.json` to the artifact directory. Records come back in
/// input order regardless of scheduling.
pub fn run_batch(pipeline: &Pipeline, inputs: &[BatchInput], parallel: usize) -> io::Result<BatchSummary> {
    let cfg = pipeline.config();
    let jobs: Vec<(&BatchInput, u32)> = inputs
        .iter()
        .flat_map(|input| (0..cfg.results_per_input).map(move |j| (input, j)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallel.max(1))
        .build()
        .map_err(io::Error::other)?;
    let runs: Vec<BatchRecord> = pool.install(|| {
        jobs.par_iter()
            .map(|&(input, j)| {
                let seed = result_seed(cfg.seed, j, cfg.max_iterations);
                let run_id = format!("{}-r{j}", input.name);
                match pipeline.run_with(&input.png, seed, Some(&run_id)) {
                    Ok(report) => BatchRecord {
                        input: input.name.clone(),
                        result_index: j,
                        run_id,
                        seed,
                        termination: report.termination.as_str().to_string(),
                        iterations: report.iterations.len(),
                        selected_iteration: report.selected_iteration,
                        error: match report.termination {
                            Termination::Failed { stage, error } => Some(format!("{stage}: {error}")),
                            _ => None,
                        },
                    },
                    Err(e) => BatchRecord {
                        input: input.name.clone(),
                        result_index: j,
                        run_id,
                        seed,
                        termination: "failed".into(),
                        iterations: 0,
                        selected_iteration: None,
                        error: Some(format!("writing report: {e}")),
                    },
                }
            })
            .collect()
    });

    let count = |t: &str| runs.iter().filter(|r| r.termination == t).count();
    let finished: Vec<&BatchRecord> = runs.iter().filter(|r| r.termination != "failed").collect();
    let mean_iterations = if finished.is_empty() {
        0.0
    } else {
        finished.iter().map(|r| r.iterations as f64).sum::<f64>() / finished.len() as f64
    };
    let summary = BatchSummary {
        inputs: inputs.len(),
        total_runs: runs.len(),
        accepted: count("accepted"),
        exhausted: count("exhausted"),
        failed: count("failed"),
        mean_iterations,
        runs,
    };
    fs::create_dir_all(&cfg.artifact_dir)?;
    fs::write(cfg.artifact_dir.join(SUMMARY_FILE), summary.to_canonical_json())?;
    Ok(summary)
}
