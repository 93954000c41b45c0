//! Command-line front end.
//!
//! Data goes to stdout, logs to stderr. Each command ends with one
//! `key=value` line meant for scripts:
//!
//! ```text
//! run_id=<id> termination=<accepted|exhausted|failed> iterations=<n> selected=<k|none> report=<path>
//! batch runs=<n> accepted=<n> exhausted=<n> failed=<n> mean_iterations=<x> summary=<path>
//! selftest=<ok|mismatch> run_id=<id> termination=<t> iterations=<n> files=<n>
//! ```
//!
//! Exit codes: 0 accepted (or success), 2 exhausted, 1 failure, 64 usage.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::agent::AgentRole;
use crate::batch::{load_inputs, run_batch, SUMMARY_FILE};
use crate::codec::encode_png;
use crate::config::{validate_config, PipelineConfig};
use crate::fixtures;
use crate::pipeline::{Pipeline, REPORT_FILE};
use crate::report::{RunReport, Termination};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_EXHAUSTED: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

#[derive(Debug, Parser)]
#[command(name = "anywhere", version, about = "Foreground-conditioned scene generation pipeline")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// Pipeline configuration (TOML).
    #[arg(long, env = "ANYWHERE_CONFIG")]
    pub config: Option<PathBuf>,
    /// Artifact directory; overrides `artifact_dir`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Base seed; overrides `seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Bind every role that is not already a mock to the built-in fixture mock.
    #[arg(long)]
    pub mock: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the pipeline on one foreground PNG.
    Run {
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        common: ConfigArgs,
    },
    /// Run every PNG in a directory `results_per_input` times.
    Batch {
        #[arg(long)]
        input_dir: PathBuf,
        #[command(flatten)]
        common: ConfigArgs,
        /// Worker threads.
        #[arg(long, default_value_t = 1)]
        parallel: usize,
    },
    /// Check a configuration file and print it with defaults filled in.
    ValidateConfig {
        #[arg(long, env = "ANYWHERE_CONFIG")]
        config: PathBuf,
    },
    /// Print a per-iteration table for a run report.
    Inspect {
        #[arg(long)]
        report: PathBuf,
    },
    /// Run the full pipeline twice on a built-in fixture with mocks and
    /// compare every output byte.
    Selftest {
        /// Keep outputs here instead of a temporary directory.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 512)]
        resolution: u32,
    },
}

struct Usage(String);

fn load_config(common: &ConfigArgs) -> Result<PipelineConfig, Usage> {
    let mut cfg = match &common.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Usage(format!("cannot read config {}: {e}", path.display())))?;
            validate_config(&text).map_err(|e| Usage(format!("invalid config {}: {e}", path.display())))?
        }
        None if common.mock => PipelineConfig::mock(),
        None => return Err(Usage("--config (or ANYWHERE_CONFIG) is required unless --mock is given".into())),
    };
    if common.mock {
        cfg.bind_mocks();
    }
    if let Some(out) = &common.out {
        cfg.artifact_dir = out.clone();
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    cfg.validate().map_err(|e| Usage(format!("invalid config: {e}")))?;
    Ok(cfg)
}

fn build_pipeline(cfg: PipelineConfig) -> Result<Pipeline, String> {
    Pipeline::new(cfg).map_err(|e| format!("cannot bind agents: {e}"))
}

/// One stable stdout line per run.
pub fn run_line(report: &RunReport, report_path: &Path) -> String {
    format!(
        "run_id={} termination={} iterations={} selected={} report={}",
        report.run_id,
        report.termination.as_str(),
        report.iterations.len(),
        report
            .selected_iteration
            .map_or_else(|| "none".to_string(), |k| k.to_string()),
        report_path.display()
    )
}

fn cmd_run(input: &Path, common: &ConfigArgs, out: &mut dyn Write) -> Result<i32, Usage> {
    let png = fs::read(input).map_err(|e| Usage(format!("cannot read input {}: {e}", input.display())))?;
    let cfg = load_config(common)?;
    let pipeline = match build_pipeline(cfg) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return Ok(EXIT_FAILURE);
        }
    };
    match pipeline.run(&png) {
        Ok(report) => {
            let path = pipeline.config().artifact_dir.join(&report.run_id).join(REPORT_FILE);
            let _ = writeln!(out, "{}", run_line(&report, &path));
            if let Termination::Failed { stage, error } = &report.termination {
                eprintln!("error: stage {stage} failed: {error}");
            }
            Ok(report.termination.exit_code())
        }
        Err(e) => {
            eprintln!("error: writing report: {e}");
            Ok(EXIT_FAILURE)
        }
    }
}

fn cmd_batch(input_dir: &Path, common: &ConfigArgs, parallel: usize, out: &mut dyn Write) -> Result<i32, Usage> {
    if parallel == 0 {
        return Err(Usage("--parallel must be at least 1".into()));
    }
    let inputs = load_inputs(input_dir)
        .map_err(|e| Usage(format!("cannot read input directory {}: {e}", input_dir.display())))?;
    if inputs.is_empty() {
        return Err(Usage(format!("no .png files in {}", input_dir.display())));
    }
    let cfg = load_config(common)?;
    let pipeline = match build_pipeline(cfg) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return Ok(EXIT_FAILURE);
        }
    };
    let summary = match run_batch(&pipeline, &inputs, parallel) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: batch: {e}");
            return Ok(EXIT_FAILURE);
        }
    };
    let root = &pipeline.config().artifact_dir;
    for r in &summary.runs {
        let _ = writeln!(
            out,
            "run_id={} termination={} iterations={} selected={} report={}",
            r.run_id,
            r.termination,
            r.iterations,
            r.selected_iteration.map_or_else(|| "none".to_string(), |k| k.to_string()),
            root.join(&r.run_id).join(REPORT_FILE).display()
        );
        if let Some(e) = &r.error {
            eprintln!("error: {}: {e}", r.run_id);
        }
    }
    let _ = writeln!(
        out,
        "batch runs={} accepted={} exhausted={} failed={} mean_iterations={:.3} summary={}",
        summary.total_runs,
        summary.accepted,
        summary.exhausted,
        summary.failed,
        summary.mean_iterations,
        root.join(SUMMARY_FILE).display()
    );
    Ok(if summary.failed > 0 { EXIT_FAILURE } else { EXIT_OK })
}

fn cmd_validate_config(path: &Path, out: &mut dyn Write) -> Result<i32, Usage> {
    let text = fs::read_to_string(path).map_err(|e| Usage(format!("cannot read config {}: {e}", path.display())))?;
    match validate_config(&text) {
        Ok(cfg) => {
            let _ = write!(out, "{cfg}");
            Ok(EXIT_OK)
        }
        Err(e) => {
            eprintln!("config error: {e}");
            Ok(EXIT_FAILURE)
        }
    }
}

/// Table rows for `inspect`; detection-triggered rows carry a repaint flag.
pub fn inspect_table(report: &RunReport) -> String {
    let mut s = format!(
        "{:<5} {:<6} {:<12} {:<8} {:<11} {:<28} prompt\n",
        "iter", "seed", "excess", "passed", "decision", "flags"
    );
    for it in &report.iterations {
        let excess = it
            .overlap_stats
            .as_ref()
            .map_or_else(|| "-".to_string(), |st| format!("{:.6}", st.excess_ratio));
        let passed = it
            .analysis_report
            .as_ref()
            .map_or("-", |r| if r.passed { "yes" } else { "no" });
        let decision = match &it.decision {
            Some(anywhere_core::analysis::Decision::Accept) => "accept",
            Some(anywhere_core::analysis::Decision::Regenerate(_)) => "regenerate",
            Some(anywhere_core::analysis::Decision::Exhausted) => "exhausted",
            None => "-",
        };
        let mut flags = Vec::new();
        if it.detection_triggered == Some(true) {
            flags.push("over-imagination: repainted");
        }
        if report.selected_iteration == Some(it.iteration) {
            flags.push("selected");
        }
        let prompt = it.final_prompt.as_ref().map_or("-", |p| p.assembled.as_str());
        s.push_str(&format!(
            "{:<5} {:<6} {:<12} {:<8} {:<11} {:<28} {}\n",
            it.iteration,
            it.seed,
            excess,
            passed,
            decision,
            if flags.is_empty() { "-".to_string() } else { flags.join(", ") },
            prompt
        ));
    }
    s
}

fn cmd_inspect(path: &Path, out: &mut dyn Write) -> i32 {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read report {}: {e}", path.display());
            return EXIT_FAILURE;
        }
    };
    let report = match RunReport::from_json(&text) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: malformed report {}: {e}", path.display());
            return EXIT_FAILURE;
        }
    };
    if let Err(e) = report.check_invariants() {
        eprintln!("error: inconsistent report {}: {e}", path.display());
        return EXIT_FAILURE;
    }
    let _ = write!(out, "{}", inspect_table(&report));
    let _ = writeln!(
        out,
        "run_id={} termination={} iterations={} selected={}",
        report.run_id,
        report.termination.as_str(),
        report.iterations.len(),
        report
            .selected_iteration
            .map_or_else(|| "none".to_string(), |k| k.to_string())
    );
    EXIT_OK
}

/// Relative path to bytes for every file under `root`.
pub fn snapshot_dir(root: &Path) -> std::io::Result<BTreeMap<String, Vec<u8>>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) -> std::io::Result<()> {
        for entry in fs::read_dir(dir)? {
            let path = entry?.path();
            if path.is_dir() {
                walk(root, &path, out)?;
            } else {
                let rel = path.strip_prefix(root).expect("under root").to_string_lossy().replace('\\', "/");
                out.insert(rel, fs::read(&path)?);
            }
        }
        Ok(())
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out)?;
    Ok(out)
}

/// Mock bindings used by `selftest`: the analyzer rejects the first
/// candidate and the segmenter over-reaches, so feedback and repainting are
/// both exercised.
pub fn selftest_config(dir: &Path, seed: u64, resolution: u32) -> PipelineConfig {
    let mut cfg = PipelineConfig::mock();
    cfg.seed = seed;
    cfg.resolution = resolution;
    cfg.artifact_dir = dir.to_path_buf();
    let grow = (resolution / 128).max(2);
    cfg.endpoints.get_mut(&AgentRole::Segmenter).expect("all roles bound").base_url =
        format!("mock://fixture?grow={grow}");
    cfg.endpoints.get_mut(&AgentRole::Analyzer).expect("all roles bound").base_url =
        "mock://pass-after?failures=1".into();
    cfg
}

fn cmd_selftest(out_dir: Option<&Path>, seed: u64, resolution: u32, out: &mut dyn Write) -> Result<i32, Usage> {
    let temp;
    let root = match out_dir {
        Some(d) => d.to_path_buf(),
        None => {
            temp = tempfile::tempdir().map_err(|e| Usage(format!("cannot create temp dir: {e}")))?;
            temp.path().to_path_buf()
        }
    };
    let png = match encode_png(&fixtures::chair(resolution.clamp(16, 8192) * 3 / 4)) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return Ok(EXIT_FAILURE);
        }
    };
    let mut reports = Vec::new();
    let mut snapshots = Vec::new();
    for pass in ["a", "b"] {
        let dir = root.join(pass);
        let cfg = selftest_config(&dir, seed, resolution);
        cfg.validate().map_err(|e| Usage(format!("invalid selftest settings: {e}")))?;
        let pipeline = match build_pipeline(cfg) {
            Ok(p) => p,
            Err(e) => {
                eprintln!("error: {e}");
                return Ok(EXIT_FAILURE);
            }
        };
        let report = match pipeline.run(&png) {
            Ok(r) => r,
            Err(e) => {
                eprintln!("error: writing report: {e}");
                return Ok(EXIT_FAILURE);
            }
        };
        match snapshot_dir(&dir) {
            Ok(s) => snapshots.push(s),
            Err(e) => {
                eprintln!("error: reading outputs: {e}");
                return Ok(EXIT_FAILURE);
            }
        }
        reports.push(report);
    }
    let identical = snapshots[0] == snapshots[1];
    if !identical {
        for (name, bytes) in &snapshots[0] {
            if snapshots[1].get(name) != Some(bytes) {
                eprintln!("mismatch: {name}");
            }
        }
    }
    let report = &reports[0];
    let _ = writeln!(
        out,
        "selftest={} run_id={} termination={} iterations={} files={}",
        if identical { "ok" } else { "mismatch" },
        report.run_id,
        report.termination.as_str(),
        report.iterations.len(),
        snapshots[0].len()
    );
    let failed = matches!(report.termination, Termination::Failed { .. });
    Ok(if identical && !failed { EXIT_OK } else { EXIT_FAILURE })
}

/// Parses `args` (program name first) and runs the command; returns the
/// exit code.
pub fn main_with_args<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let result = match &cli.command {
        Command::Run { input, common } => cmd_run(input, common, out),
        Command::Batch {
            input_dir,
            common,
            parallel,
        } => cmd_batch(input_dir, common, *parallel, out),
        Command::ValidateConfig { config } => cmd_validate_config(config, out),
        Command::Inspect { report } => Ok(cmd_inspect(report, out)),
        Command::Selftest { out: dir, seed, resolution } => cmd_selftest(dir.as_deref(), *seed, *resolution, out),
    };
    match result {
        Ok(code) => code,
        Err(Usage(msg)) => {
            eprintln!("usage error: {msg}");
            EXIT_USAGE
        }
    }
}
