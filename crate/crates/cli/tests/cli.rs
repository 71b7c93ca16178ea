use std::path::Path;
use std::process::{Command, Output};

use immerflow_cli::demos::seed_demos;
use immerflow_cli::{run_scenario, CliError, RunConfig};

fn immerflow(args: &[&str], root: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_immerflow"))
        .args(args)
        .arg("--data-root")
        .arg(root)
        .env("RUST_LOG", "error")
        .output()
        .unwrap()
}

fn seeded() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    seed_demos(dir.path()).unwrap();
    dir
}

#[test]
fn scenario_runs_replay_bit_identical_logs() {
    let root = seeded();
    let logs = tempfile::tempdir().unwrap();
    for run in ["one", "two"] {
        let mut cfg = RunConfig::new(root.path(), "demo3");
        cfg.devices = 2;
        cfg.seed = 11;
        cfg.log_dir = Some(logs.path().join(run));
        assert!(run_scenario(&cfg).unwrap().passed());
    }
    for device in ["A.jsonl", "B.jsonl"] {
        let a = std::fs::read(logs.path().join("one").join(device)).unwrap();
        let b = std::fs::read(logs.path().join("two").join(device)).unwrap();
        assert!(!a.is_empty());
        assert_eq!(a, b, "{device} differs between runs");
    }
}

#[test]
fn demo1_report_lists_the_linked_charts() {
    let root = seeded();
    let out = immerflow(&["run-scenario", "--workspace", "demo1", "--seed", "5", "--json"], root.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let placed = report["devices"][0]["placed"].as_array().unwrap();
    let kinds: Vec<(&str, &str)> = placed
        .iter()
        .map(|p| (p["spec_id"].as_str().unwrap(), p["link"].as_str().unwrap()))
        .collect();
    assert_eq!(
        kinds,
        [("attempts_by_x", "AxisLink"), ("attempts_by_y", "AxisLink"), ("shots", "TargetLink")]
    );
    assert!(placed[..2].iter().all(|p| p["link_target"] == "shots"));
}

#[test]
fn unmet_expectation_fails_and_is_named() {
    let root = seeded();
    let scenario = root.path().join("never.json");
    std::fs::write(
        &scenario,
        r#"{"script": [
            {"action": "advance_clock", "seconds": 0.5},
            {"action": "expect_spec", "name": "phantom chart", "spec_id": "does_not_exist"}
        ]}"#,
    )
    .unwrap();
    let out = immerflow(
        &["run-scenario", "--workspace", "demo4", "--scenario", scenario.to_str().unwrap()],
        root.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    let text = String::from_utf8_lossy(&out.stdout);
    let last = text.lines().last().unwrap();
    assert!(last.contains("first: expectation `phantom chart` failed"), "{last}");
}

#[test]
fn configuration_problems_exit_2() {
    let root = seeded();
    let missing = immerflow(&["run-scenario", "--workspace", "nope"], root.path());
    assert_eq!(missing.status.code(), Some(2));
    // demo3 has two connectors.
    let short = immerflow(&["run-scenario", "--workspace", "demo3", "--devices", "1"], root.path());
    assert_eq!(short.status.code(), Some(2));
    let bad = root.path().join("bad.json");
    std::fs::write(&bad, r#"{"script": [{"action": "teleport"}]}"#).unwrap();
    let invalid = immerflow(
        &["run-scenario", "--workspace", "demo1", "--scenario", bad.to_str().unwrap()],
        root.path(),
    );
    assert_eq!(invalid.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&invalid.stderr).contains("invalid scenario"));

    let mut cfg = RunConfig::new(root.path(), "demo1");
    cfg.poll_interval_ms = Some(0);
    assert!(matches!(run_scenario(&cfg), Err(CliError::Config(_))));
}

#[test]
fn extra_devices_connect_without_a_connector() {
    let root = seeded();
    let mut cfg = RunConfig::new(root.path(), "demo4");
    cfg.devices = 2;
    let report = run_scenario(&cfg).unwrap();
    assert!(report.passed(), "{:?}", report.failures);
    let b = report.device("B").unwrap();
    assert_eq!(b.connector, None);
    assert!(b.device_key.is_some());
    assert!(b.placed.is_empty());
}

#[test]
fn seeding_is_idempotent() {
    let root = seeded();
    let first = std::fs::read(root.path().join("workspaces/demo2.json")).unwrap();
    let out = immerflow(&["seed-demos"], root.path());
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(String::from_utf8_lossy(&out.stdout).lines().count(), 4);
    assert_eq!(std::fs::read(root.path().join("workspaces/demo2.json")).unwrap(), first);
}

#[test]
fn runs_do_not_touch_the_data_root() {
    let root = seeded();
    let before = std::fs::read_dir(root.path().join("workspaces")).unwrap().count();
    let out = immerflow(&["run", "--workspace", "demo3", "--headless"], root.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let after = std::fs::read_dir(root.path().join("workspaces")).unwrap().count();
    assert_eq!(before, after);
    assert!(!root.path().join("workspaces/demo3.anchors.json").exists());
}
