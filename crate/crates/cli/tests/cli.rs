use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn cuesim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cuesim"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn run_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = cuesim(&["run", "--out", path(dir.path()), "--duration", "2"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("telemetry.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 180);
    let metrics: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("metrics.json")).unwrap()).unwrap();
    assert_eq!(metrics["telemetry_rows"], 180);
}

#[test]
fn zero_duration_is_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let out = cuesim(&["run", "--out", path(dir.path()), "--duration", "0"]);
    assert_eq!(out.status.code(), Some(0));
    let csv = fs::read_to_string(dir.path().join("telemetry.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1);
    assert!(csv.starts_with("frame_index,sim_time_s,"));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let out = cuesim(&["run", "--out", path(d.path()), "--duration", "3", "--seed", "17"]);
        assert_eq!(out.status.code(), Some(0));
    }
    let read = |d: &tempfile::TempDir| fs::read(d.path().join("telemetry.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "[run]\nseed = 1\nduration_s = 1.0\n").unwrap();
    let out = cuesim(&["run", "--config", path(&cfg), "--out", path(dir.path()), "--seed", "99"]);
    assert_eq!(out.status.code(), Some(0));
    let metrics: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("metrics.json")).unwrap()).unwrap();
    assert_eq!(metrics["seed"], 99);
}

#[test]
fn invalid_config_exits_2_with_field_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[cueing]\nroll_gain = -2.0\n").unwrap();
    for sub in [&["validate"][..], &["run"], &["compare-pipelines"]] {
        let mut args = sub.to_vec();
        args.extend(["--config", path(&cfg)]);
        let out = cuesim(&args);
        assert_eq!(out.status.code(), Some(2), "{sub:?}");
        assert!(String::from_utf8_lossy(&out.stderr).contains("cueing.roll_gain"));
    }
}

#[test]
fn unknown_key_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("typo.toml");
    fs::write(&cfg, "[scheduler]\ndisplay_hertz = 90\n").unwrap();
    let out = cuesim(&["validate", "--config", path(&cfg)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("scheduler.display_hertz"));
}

#[test]
fn bad_duration_flag_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = cuesim(&["run", "--out", path(dir.path()), "--duration", "-1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unwritable_output_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "not a directory").unwrap();
    let out = cuesim(&["run", "--out", path(&blocker.join("sub")), "--duration", "1"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn compare_pipelines_writes_both_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = cuesim(&["compare-pipelines", "--out", path(dir.path()), "--duration", "5"]);
    assert_eq!(out.status.code(), Some(0));
    let cmp: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("comparison.json")).unwrap()).unwrap();
    assert_eq!(cmp["physics_on_update"]["latency"]["max_mismatch_ms"], 0.0);
    assert!(
        cmp["default_fixed_step"]["latency"]["mismatch_nonzero_fraction"]
            .as_f64()
            .unwrap()
            > 0.3
    );
    assert!(!cmp["default_fixed_step"]["mismatch_histogram"]
        .as_array()
        .unwrap()
        .is_empty());
}

#[test]
fn track_export_writes_arcs() {
    let dir = tempfile::tempdir().unwrap();
    let out = cuesim(&["track", "export", "--out", path(dir.path())]);
    assert_eq!(out.status.code(), Some(0));
    let track: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("track.json")).unwrap()).unwrap();
    let arcs = track["arcs"].as_array().unwrap();
    assert_eq!(arcs.len(), 9);
    let mut cells: Vec<(u64, String)> = arcs
        .iter()
        .map(|a| {
            (
                a["sweep_deg"].as_f64().unwrap() as u64,
                a["slope"].as_str().unwrap().to_string(),
            )
        })
        .collect();
    cells.sort();
    cells.dedup();
    assert_eq!(cells.len(), 9);
}

#[test]
fn validate_accepts_defaults() {
    let out = cuesim(&["validate"]);
    assert_eq!(out.status.code(), Some(0));
}
