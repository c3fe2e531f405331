use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn argraph(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_argraph")).args(args).current_dir(dir).output().expect("binary runs")
}

fn ok(out: &Output) {
    assert!(out.status.success(), "exit {:?}\nstderr: {}", out.status.code(), String::from_utf8_lossy(&out.stderr));
}

#[test]
fn gen_simulate_estimate_metrics_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&argraph(&["gen-model", "--m", "4", "--n", "1", "--density", "0.3", "--seed", "5", "--out", "model.json"], d));
    ok(&argraph(&["simulate", "--model", "model.json", "--samples", "800", "--seed", "6", "--out", "y.csv"], d));
    fs::write(d.join("cfg.json"), r#"{"l_max": 5}"#).unwrap();
    ok(&argraph(
        &[
            "estimate",
            "--mode",
            "sparse",
            "--input",
            "y.csv",
            "--order",
            "1",
            "--config",
            "cfg.json",
            "--out",
            "est.json",
            "--trace",
            "trace.jsonl",
        ],
        d,
    ));
    let est: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("est.json")).unwrap()).unwrap();
    assert!(est.get("S").is_some() && est.get("X").is_some());
    assert!(fs::read_to_string(d.join("trace.jsonl")).unwrap().lines().count() >= 1);

    let out = argraph(&["metrics", "--estimate", "est.json", "--model", "model.json"], d);
    ok(&out);
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let e = report["e"].as_f64().unwrap();
    assert!(e.is_finite() && e >= 0.0);
}

#[test]
fn gen_model_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["gen-model", "--m", "5", "--n", "2", "--rank", "1", "--seed", "9"];
    let a = argraph(&args, dir.path());
    let b = argraph(&args, dir.path());
    ok(&a);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn montecarlo_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("cfg.json"), r#"{"m": 4, "N": 300, "trials": 2, "estimators": ["RW", "TD9"]}"#).unwrap();
    let out = argraph(&["montecarlo", "--config", "cfg.json", "--out-dir", "report", "--workers", "1"], d);
    ok(&out);
    let csv = fs::read_to_string(d.join("report/trials.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2 * 2);
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.join("report/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["trials"].as_u64(), Some(2));
    assert!(d.join("report/traces.jsonl").exists());
}

#[test]
fn desk_preset_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = argraph(&["montecarlo", "--preset", "desk-sparse"], dir.path());
    ok(&out);
    assert!(dir.path().join("trials.csv").exists() && dir.path().join("summary.json").exists());
    assert_eq!(argraph(&["montecarlo", "--preset", "no-such-preset"], dir.path()).status.code(), Some(2));
}

#[test]
fn baseline_writes_estimate_and_score_table() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&argraph(&["gen-model", "--m", "3", "--n", "1", "--density", "0.5", "--seed", "1", "--out", "model.json"], d));
    ok(&argraph(&["simulate", "--model", "model.json", "--samples", "500", "--seed", "2", "--out", "y.csv"], d));
    ok(&argraph(
        &[
            "baseline",
            "--mode",
            "sparse",
            "--input",
            "y.csv",
            "--order",
            "1",
            "--points",
            "5",
            "--model",
            "model.json",
            "--out",
            "best.json",
            "--table",
            "table.csv",
        ],
        d,
    ));
    let table = fs::read_to_string(d.join("table.csv")).unwrap();
    assert_eq!(table.lines().next(), Some("gamma,gamma_l,bic,support_size,rank,e"));
    assert_eq!(table.lines().count(), 6);
}

#[test]
fn usage_and_runtime_errors_have_distinct_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(argraph(&["no-such-command"], dir.path()).status.code(), Some(2));
    assert_eq!(argraph(&["gen-model", "--m", "3"], dir.path()).status.code(), Some(2));
    let missing = argraph(
        &["estimate", "--mode", "sparse", "--input", "absent.csv", "--order", "1", "--out", "e.json"],
        dir.path(),
    );
    assert_eq!(missing.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("absent.csv"));
    assert_eq!(argraph(&["--help"], dir.path()).status.code(), Some(0));
}

#[test]
fn selftest_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = argraph(&["selftest"], dir.path());
    ok(&out);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.lines().all(|l| l.starts_with("PASS")), "{text}");
}
