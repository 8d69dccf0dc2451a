use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_impartial"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn read(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn avd_beats_passes_exhaustive_check() {
    let out = run(&["check-impartial", "--mechanism", r#"{"kind":"avd_beats","default":0}"#, "--m", "4"]);
    assert_eq!(code(&out), 0);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["report"]["verdict"], "pass");
    assert_eq!(v["report"]["profiles_checked"], 4096);
}

#[test]
fn approval_fails_with_counterexample() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ce.json");
    let out = run(&[
        "check-impartial",
        "--mechanism",
        r#"{"kind":"approval"}"#,
        "--m",
        "3",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 2);
    let v = read(&path);
    let ce = &v["report"]["counterexample"];
    assert!(ce["deviator"].is_u64());
    assert_ne!(ce["winner_before"], ce["winner_after"]);
}

#[test]
fn random_check_resolves_default_from_prior() {
    let out = run(&[
        "check-impartial",
        "--mechanism",
        r#"{"kind":"avd_beats"}"#,
        "--random",
        "--prior",
        r#"{"kind":"popularity","p":[0.2,0.7,0.4,0.5,0.3,0.6]}"#,
        "--trials",
        "50",
        "--seed",
        "4",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["config"]["mechanism"]["default"], 1);
}

#[test]
fn tails_suite_passes_and_lists_margins() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.json");
    let out = run(&["bounds", "verify", "--suite", "tails", "--n", "100", "--p", "0.5", "--out", path.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let v = read(&path);
    assert_eq!(v["config"]["n"], 100);
    let reports = v["reports"].as_array().unwrap();
    let hoeffding = reports.iter().find(|r| r["inequality"] == "hoeffding").unwrap();
    let points = hoeffding["points"].as_array().unwrap();
    assert_eq!(points.len(), 101);
    for p in points {
        assert!(p["lhs"].is_number() && p["rhs"].is_number());
        assert!(p["margin"].as_f64().unwrap() >= 0.0);
    }
}

#[test]
fn section5_rejects_small_n_as_usage_error() {
    let out = run(&["bounds", "verify", "--suite", "section5", "--n", "10"]);
    assert_eq!(code(&out), 1);
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(code(&run(&["frobnicate"])), 1);
    assert_eq!(code(&run(&["simulate", "--prior", "{not json", "--mechanism", "{}", "--trials", "1", "--seed", "0"])), 1);
    assert_eq!(code(&run(&["check-impartial", "--mechanism", r#"{"kind":"avd_beats"}"#, "--m", "3"])), 1);
    let out = run(&[
        "zones",
        "--n",
        "100",
        "--out",
        "/nonexistent-dir/zones.json",
    ]);
    assert_eq!(code(&out), 1);
    assert_eq!(code(&run(&["--help"])), 0);
}

#[test]
fn simulate_config_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("a.json");
    let second = dir.path().join("b.json");
    let out = run(&[
        "simulate",
        "--prior",
        r#"{"kind":"uniform","m":40,"p":0.5}"#,
        "--mechanism",
        r#"{"kind":"avd_beats"}"#,
        "--trials",
        "200",
        "--seed",
        "9",
        "--workers",
        "2",
        "--out",
        first.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let out = run(&["simulate", "--config", first.to_str().unwrap(), "--out", second.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    assert_eq!(fs::read(&first).unwrap(), fs::read(&second).unwrap());
    let v = read(&first);
    assert_eq!(v["config"]["mechanism"], serde_json::json!({"kind": "avd_beats", "default": 0}));
    assert_eq!(v["estimate"]["trials"], 200);
}

#[test]
fn sweep_writes_csv_and_config() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("sweep.csv");
    let out = run(&[
        "sweep",
        "--prior-family",
        r#"{"family":"uniform","p":0.5}"#,
        "--mechanism-rule",
        r#"{"kind":"constant"}"#,
        "--n",
        "16,32",
        "--trials",
        "30",
        "--seed",
        "1",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(text.starts_with("n,m,trials,seed,mean_gap,stderr"));
    let side = read(&dir.path().join("sweep.csv.json"));
    assert_eq!(side["config"]["n"], serde_json::json!([16, 32]));
}

#[test]
fn zones_and_hazard() {
    let out = run(&["zones", "--n", "1000", "--p", "0.5"]);
    assert_eq!(code(&out), 0);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let (lo, hi) = (v["zone"]["lower"].as_u64().unwrap(), v["zone"]["upper"].as_u64().unwrap());
    assert!(lo < 500 && hi > 500);

    let out = run(&["hazard", "--n", "4", "--p", "0.5", "--x", "0,4"]);
    assert_eq!(code(&out), 0);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["points"][0]["hazard"].as_f64().unwrap() - 1.0 / 16.0).abs() < 1e-15);
    assert!((v["points"][1]["hazard"].as_f64().unwrap() - 1.0).abs() < 1e-15);
}
