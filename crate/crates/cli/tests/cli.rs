//! Drives the `domrl` binary: exit codes and reproducible outputs.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = "[generation]\ntrain_episodes = 8\nexploit_episodes = 2\nvariants = [\"BinnedQ\", \"Heuristic\", \"NR_Heuristic\"]\n";

fn domrl(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_domrl"))
        .current_dir(dir)
        .env_remove("DOMRL_CONFIG")
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn small_workspace() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("small.toml"), SMALL).unwrap();
    dir
}

fn run_pipeline(dir: &Path, out: &str) {
    for args in [
        vec!["-c", "small.toml", "simulate", "--experiment", "LowMask", "--out", out],
        vec!["-c", "small.toml", "analyze", out],
        vec!["-c", "small.toml", "rank", out, "--with-reliability"],
        vec!["-c", "small.toml", "report", out],
    ] {
        let o = domrl(dir, &args);
        assert_eq!(code(&o), 0, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn pipeline_succeeds_and_is_reproducible() {
    let ws = small_workspace();
    run_pipeline(ws.path(), "one");
    run_pipeline(ws.path(), "two");
    let mut compared = 0;
    for entry in fs::read_dir(ws.path().join("one")).unwrap() {
        let name = entry.unwrap().file_name();
        let a = fs::read(ws.path().join("one").join(&name)).unwrap();
        let b = fs::read(ws.path().join("two").join(&name)).unwrap();
        assert_eq!(a, b, "{name:?} differs");
        compared += 1;
    }
    // 3 traces + 3 reports + 6 tables + report + mean rewards
    assert_eq!(compared, 14);
    let md = fs::read_to_string(ws.path().join("one/report.md")).unwrap();
    assert!(md.contains("NR\\_Heuristic"));
}

#[test]
fn rerunning_overwrites_in_place() {
    let ws = small_workspace();
    run_pipeline(ws.path(), "out");
    let before = fs::read(ws.path().join("out/ranks.csv")).unwrap();
    run_pipeline(ws.path(), "out");
    assert_eq!(fs::read(ws.path().join("out/ranks.csv")).unwrap(), before);
}

#[test]
fn unknown_experiment_is_a_user_error() {
    let ws = small_workspace();
    let o = domrl(ws.path(), &["simulate", "--experiment", "NoMask"]);
    assert_eq!(code(&o), 2);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("NoMask") && err.contains("HighMask"), "{err}");
}

#[test]
fn unknown_variant_is_a_user_error() {
    let ws = small_workspace();
    let o = domrl(ws.path(), &["simulate", "--experiment", "HighMask", "--variants", "PPO"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn bad_config_is_a_user_error() {
    let ws = small_workspace();
    fs::write(ws.path().join("bad.toml"), "[generation]\ntrain_episodes = \"many\"\n").unwrap();
    assert_eq!(code(&domrl(ws.path(), &["-c", "bad.toml", "rank", "."])), 2);
    assert_eq!(code(&domrl(ws.path(), &["-c", "missing.toml", "rank", "."])), 2);
}

#[test]
fn empty_and_missing_inputs_are_user_errors() {
    let ws = small_workspace();
    fs::create_dir(ws.path().join("empty")).unwrap();
    assert_eq!(code(&domrl(ws.path(), &["analyze", "empty"])), 2);
    assert_eq!(code(&domrl(ws.path(), &["analyze", "nowhere"])), 2);
    assert_eq!(code(&domrl(ws.path(), &["rank", "empty"])), 2);
    assert_eq!(code(&domrl(ws.path(), &["report", "empty"])), 2);
}

#[test]
fn ranking_needs_two_algorithms() {
    let ws = small_workspace();
    let o = domrl(ws.path(), &["-c", "small.toml", "simulate", "--experiment", "Baseline", "--variants", "Heuristic", "--out", "one"]);
    assert_eq!(code(&o), 0);
    assert_eq!(code(&domrl(ws.path(), &["analyze", "one"])), 0);
    let o = domrl(ws.path(), &["rank", "one"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("at least 2"));
}

#[test]
fn corrupted_trace_names_the_file() {
    let ws = small_workspace();
    let dir = ws.path().join("bad");
    fs::create_dir(&dir).unwrap();
    fs::write(dir.join("Broken.traces.jsonl"), "{\"not\": \"a trace\"}\n").unwrap();
    let o = domrl(ws.path(), &["analyze", "bad"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("Broken.traces.jsonl"));
}

#[test]
fn config_can_come_from_the_environment() {
    let ws = small_workspace();
    let o = Command::new(env!("CARGO_BIN_EXE_domrl"))
        .current_dir(ws.path())
        .env("DOMRL_CONFIG", "small.toml")
        .args(["simulate", "--experiment", "HighMask", "--out", "env"])
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    assert_eq!(fs::read_dir(ws.path().join("env")).unwrap().count(), 3);
}

#[test]
fn shipped_config_matches_the_defaults() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../config/default.toml");
    let cfg = domrl_core::ToolkitConfig::load(&path).unwrap();
    assert_eq!(cfg, domrl_core::ToolkitConfig::default());
}
