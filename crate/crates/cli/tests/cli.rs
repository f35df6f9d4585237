//! End-to-end checks of the `proact` binary.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn proact(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_proact"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn metrics_json(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("metrics.json")).unwrap()).unwrap()
}

#[test]
fn zero_tick_run_exits_cleanly_with_empty_log() {
    let dir = tempfile::tempdir().unwrap();
    let out = proact(&["run", "--ticks", "0", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for name in [
        "events.jsonl",
        "metrics.json",
        "diagram.csv",
        "diagram.svg",
        "ethogram.svg",
    ] {
        assert!(dir.path().join(name).exists(), "{name} missing");
    }
    assert_eq!(std::fs::read_to_string(dir.path().join("events.jsonl")).unwrap(), "");
    let m = metrics_json(dir.path());
    assert!(m["time_all_names_known"].is_null());
    assert!(m["task_completion_time"].is_null());
}

#[test]
fn invalid_config_reports_line_and_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "name = \"bad\"\nseed = 1\ntick_length = -0.1\n").unwrap();
    let out = proact(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3"), "{err}");
    assert!(err.contains("tick_length"), "{err}");
}

#[test]
fn unknown_config_key_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "seed = 1\n\n[human]\nnmae = \"x\"\n").unwrap();
    let out = proact(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 4"), "{err}");
    assert!(err.contains("nmae"), "{err}");
}

#[test]
fn task_driven_medium_run_completes() {
    let dir = tempfile::tempdir().unwrap();
    let out = proact(&[
        "run",
        "--condition",
        "medium",
        "--human",
        "task_driven",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(String::from_utf8_lossy(&out.stdout).contains("Completed"));
    assert!(metrics_json(dir.path())["task_completion_time"].is_f64());
}

#[test]
fn unmet_task_exits_with_budget_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = proact(&[
        "run",
        "--human",
        "task_driven",
        "--ticks",
        "50",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn script_policy_is_loaded_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let script = dir.path().join("trace.toml");
    std::fs::write(
        &script,
        "[[input]]\nt = 1.0\ninput = { type = \"speak\", text = \"Give me the duck.\" }\n",
    )
    .unwrap();
    let arg = format!("script:{}", script.display());
    let out = proact(&[
        "run",
        "--human",
        &arg,
        "--ticks",
        "300",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let events = std::fs::read_to_string(dir.path().join("events.jsonl")).unwrap();
    assert!(events.contains("Give me the duck."));
}

#[test]
fn metrics_and_render_reproduce_run_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    assert_eq!(proact(&["run", "--ticks", "1500", "--out", d]).status.code(), Some(0));
    let log = dir.path().join("events.jsonl");

    let out = proact(&["metrics", log.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let printed: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(printed, metrics_json(dir.path()));

    let again = dir.path().join("again");
    let out = proact(&["render", log.to_str().unwrap(), "--out", again.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    for name in ["diagram.csv", "diagram.svg", "ethogram.svg"] {
        assert_eq!(
            std::fs::read_to_string(again.join(name)).unwrap(),
            std::fs::read_to_string(dir.path().join(name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn malformed_log_gives_parse_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("events.jsonl");
    std::fs::write(&log, "{\"seq\": 0}\nnot json\n").unwrap();
    let out = proact(&["metrics", log.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 1"));
}

#[test]
fn replay_golden_passes_on_shipped_scenario() {
    let out = proact(&["replay-golden"]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(0), "{stdout}");
    assert_eq!(stdout.lines().filter(|l| l.starts_with("step ")).count(), 8);
    assert!(stdout.contains("PASS"));
}

#[test]
fn replay_golden_without_human_fails_at_step_three() {
    let dir = tempfile::tempdir().unwrap();
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/assets/golden.toml");
    let text = std::fs::read_to_string(golden).unwrap();
    let cfg = dir.path().join("absent.toml");
    std::fs::write(&cfg, text.replacen("[human]", "[human]\npresent = false", 1)).unwrap();
    let out = proact(&["replay-golden", "--config", cfg.to_str().unwrap()]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(1), "{stdout}");
    assert!(stdout.contains("FAIL step 3"), "{stdout}");
}

#[test]
fn sweep_writes_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = proact(&[
        "sweep",
        "--seeds",
        "2",
        "--ticks",
        "600",
        "--human",
        "silent",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    let cells = std::fs::read_to_string(dir.path().join("cells.jsonl")).unwrap();
    assert_eq!(cells.lines().count(), 6);
}
