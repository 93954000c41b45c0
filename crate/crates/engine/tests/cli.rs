//! The binary's exit codes and stdout lines.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use anywhere::codec::encode_png;
use anywhere::config::render_uniform_config;
use anywhere::fixtures;

fn anywhere(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_anywhere"))
        .args(args)
        .env_remove("ANYWHERE_CONFIG")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn field<'a>(line: &'a str, key: &str) -> &'a str {
    line.split_whitespace()
        .find_map(|kv| kv.strip_prefix(key).and_then(|v| v.strip_prefix('=')))
        .unwrap_or_else(|| panic!("no {key} in {line:?}"))
}

fn write_chair(dir: &Path) -> String {
    let path = dir.join("chair.png");
    fs::write(&path, encode_png(&fixtures::chair(80)).unwrap()).unwrap();
    path.display().to_string()
}

fn write_config(dir: &Path, analyzer: &str, extra: &str) -> String {
    let mut text = render_uniform_config("mock://fixture", &format!("resolution = 128\n{extra}"));
    text = text.replace(
        "[endpoints.analyzer]\nbase_url = \"mock://fixture\"",
        &format!("[endpoints.analyzer]\nbase_url = \"{analyzer}\""),
    );
    let path = dir.join("pipeline.toml");
    fs::write(&path, text).unwrap();
    path.display().to_string()
}

#[test]
fn missing_input_is_a_usage_error() {
    let out = anywhere(&["run", "--mock"]);
    assert_eq!(code(&out), 64);
    let out = anywhere(&["frobnicate"]);
    assert_eq!(code(&out), 64);
}

#[test]
fn run_without_config_or_mock_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_chair(dir.path());
    let out = anywhere(&["run", "--input", &input]);
    assert_eq!(code(&out), 64);
}

#[test]
fn help_and_version_exit_zero() {
    let out = anywhere(&["--help"]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("selftest"));
    assert_eq!(code(&anywhere(&["--version"])), 0);
}

#[test]
fn accepted_run_exits_zero_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_chair(dir.path());
    let cfg = write_config(dir.path(), "mock://fixture", "");
    let out_dir = dir.path().join("out");
    let args = ["run", "--input", &input, "--config", &cfg, "--out", out_dir.to_str().unwrap(), "--seed", "11"];
    let first = anywhere(&args);
    assert_eq!(code(&first), 0, "{}", String::from_utf8_lossy(&first.stderr));
    let line = stdout(&first);
    assert_eq!(field(&line, "termination"), "accepted");
    assert_eq!(field(&line, "iterations"), "1");
    assert!(field(&line, "run_id").ends_with("-s11"));
    let report = field(&line, "report").to_string();
    let bytes = fs::read(&report).unwrap();

    let second = anywhere(&args);
    assert_eq!(stdout(&second), line);
    assert_eq!(fs::read(&report).unwrap(), bytes);
}

#[test]
fn exhausted_run_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_chair(dir.path());
    let cfg = write_config(dir.path(), "mock://always-fail", "max_iterations = 2\n");
    let out_dir = dir.path().join("out");
    let out = anywhere(&["run", "--input", &input, "--config", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    let line = stdout(&out);
    assert_eq!(field(&line, "termination"), "exhausted");
    assert_eq!(field(&line, "iterations"), "2");
    assert_eq!(field(&line, "selected"), "2");
}

#[test]
fn failed_stage_exits_one_and_names_the_stage() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_chair(dir.path());
    let mut text = render_uniform_config("mock://fixture", "resolution = 128\n");
    text = text.replace(
        "[endpoints.refiner]\nbase_url = \"mock://fixture\"",
        "[endpoints.refiner]\nbase_url = \"mock://down\"\nmax_retries = 0\nbackoff_ms = 0",
    );
    let cfg = dir.path().join("down.toml");
    fs::write(&cfg, text).unwrap();
    let out_dir = dir.path().join("out");
    let out = anywhere(&[
        "run",
        "--input",
        &input,
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 1);
    assert_eq!(field(&stdout(&out), "termination"), "failed");
    assert!(String::from_utf8_lossy(&out.stderr).contains("refine"));
}

#[test]
fn invalid_config_under_run_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_chair(dir.path());
    let cfg = write_config(dir.path(), "mock://fixture", "tau = 1.5\n");
    let out = anywhere(&["run", "--input", &input, "--config", &cfg]);
    assert_eq!(code(&out), 64);
    assert!(String::from_utf8_lossy(&out.stderr).contains("tau"));
}

#[test]
fn validate_config_reports_field_and_constraint() {
    let dir = tempfile::tempdir().unwrap();
    let good = write_config(dir.path(), "mock://fixture", "");
    let out = anywhere(&["validate-config", "--config", &good]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("resolution = 128"));

    let bad = write_config(dir.path(), "mock://fixture", "refine_strength = 2.0\n");
    let out = anywhere(&["validate-config", "--config", &bad]);
    assert_eq!(code(&out), 1);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("refine_strength") && err.contains("[0,1]"), "{err}");

    let path = dir.path().join("partial.toml");
    fs::write(&path, "[endpoints.narrator]\nbase_url = \"mock://fixture\"\n").unwrap();
    let out = anywhere(&["validate-config", "--config", path.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("endpoints."));
}

#[test]
fn empty_batch_directory_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty");
    fs::create_dir(&empty).unwrap();
    let out = anywhere(&["batch", "--input-dir", empty.to_str().unwrap(), "--mock"]);
    assert_eq!(code(&out), 64);
}

#[test]
fn batch_prints_a_line_per_run_and_a_summary() {
    let dir = tempfile::tempdir().unwrap();
    let inputs = dir.path().join("in");
    fs::create_dir(&inputs).unwrap();
    for name in ["a", "b"] {
        fs::write(inputs.join(format!("{name}.png")), encode_png(&fixtures::cup(64)).unwrap()).unwrap();
    }
    let cfg = write_config(dir.path(), "mock://fixture", "results_per_input = 2\n");
    let out_dir = dir.path().join("out");
    let out = anywhere(&[
        "batch",
        "--input-dir",
        inputs.to_str().unwrap(),
        "--config",
        &cfg,
        "--out",
        out_dir.to_str().unwrap(),
        "--parallel",
        "2",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 5);
    let ids: Vec<&str> = lines[..4].iter().map(|l| field(l, "run_id")).collect();
    assert_eq!(ids, ["a-r0", "a-r1", "b-r0", "b-r1"]);
    assert!(lines[4].starts_with("batch runs=4 accepted=4 "));
    assert!(out_dir.join("summary.json").is_file());
}

#[test]
fn inspect_shows_one_row_per_iteration() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_chair(dir.path());
    let mut text = render_uniform_config("mock://fixture", "resolution = 128\n");
    text = text
        .replace(
            "[endpoints.analyzer]\nbase_url = \"mock://fixture\"",
            "[endpoints.analyzer]\nbase_url = \"mock://always-fail\"",
        )
        .replace(
            "[endpoints.segmenter]\nbase_url = \"mock://fixture\"",
            "[endpoints.segmenter]\nbase_url = \"mock://fixture?grow=8\"",
        );
    let cfg = dir.path().join("grow.toml");
    fs::write(&cfg, text).unwrap();
    let out_dir = dir.path().join("out");
    let run = anywhere(&[
        "run",
        "--input",
        &input,
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&run), 2);
    let report = field(&stdout(&run), "report").to_string();

    let out = anywhere(&["inspect", "--report", &report]);
    assert_eq!(code(&out), 0);
    let table = stdout(&out);
    let rows: Vec<&str> = table.lines().filter(|l| l.starts_with(|c: char| c.is_ascii_digit())).collect();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r.contains("over-imagination: repainted")));
    assert!(rows[2].contains("selected"));

    let text = fs::read_to_string(&report).unwrap();
    let truncated = dir.path().join("truncated.json");
    fs::write(&truncated, &text[..text.len() / 2]).unwrap();
    let out = anywhere(&["inspect", "--report", truncated.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
}

#[test]
fn selftest_passes_at_small_resolution() {
    let dir = tempfile::tempdir().unwrap();
    let out = anywhere(&["selftest", "--out", dir.path().to_str().unwrap(), "--resolution", "128"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).starts_with("selftest=ok "));
}
