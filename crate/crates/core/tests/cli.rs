use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn opinet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_opinet"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn assert_manifest(dir: &Path) {
    let m = json(&dir.join("manifest.json"));
    assert!(m["command"].is_string());
    assert!(m["outputs"].as_array().is_some_and(|o| !o.is_empty()), "{m}");
}

#[test]
fn simulate_then_infer_problem1_recovers_toy12() {
    let tmp = TempDir::new().unwrap();
    let sim = tmp.path().join("sim");
    let out = opinet(&["simulate", "toy12", "--out", s(&sim)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_manifest(&sim);
    let inf = tmp.path().join("inf");
    let out = opinet(&[
        "infer",
        s(&sim.join("trajectory.json")),
        "--problem",
        "1",
        "--out",
        s(&inf),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_manifest(&inf);
    let r = json(&inf.join("result.json"));
    let gamma = [0.3, 0.2, 0.1, 0.1];
    let beta = [0.5, 0.4, 0.3, 0.2];
    for i in 0..4 {
        assert!((r["gamma"][i].as_f64().unwrap() - gamma[i]).abs() < 1e-8);
        assert!((r["beta"][i].as_f64().unwrap() - beta[i]).abs() < 1e-8);
    }
    assert_eq!(r["followers"], serde_json::json!([1, 2, 3, 4]));
}

#[test]
fn csv_trajectory_is_accepted() {
    let tmp = TempDir::new().unwrap();
    let sim = tmp.path().join("sim");
    assert!(opinet(&["simulate", "toy12", "--out", s(&sim)]).status.success());
    let inf = tmp.path().join("inf");
    let out = opinet(&[
        "infer",
        s(&sim.join("trajectory.csv")),
        "--problem",
        "1",
        "--out",
        s(&inf),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn random_innate_opinions_are_reproducible() {
    let tmp = TempDir::new().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for d in [&a, &b] {
        let out = opinet(&[
            "simulate",
            "krackhardt",
            "--x0",
            "random:7",
            "--horizon",
            "40",
            "--out",
            s(d),
        ]);
        assert!(out.status.success());
    }
    let read = |d: &Path| std::fs::read(d.join("trajectory.json")).unwrap();
    assert_eq!(read(&a), read(&b));
    assert_eq!(
        std::fs::read(a.join("trajectory.csv")).unwrap(),
        std::fs::read(b.join("trajectory.csv")).unwrap()
    );
}

#[test]
fn zero_horizon_is_a_usage_error() {
    let tmp = TempDir::new().unwrap();
    let out = opinet(&["simulate", "toy12", "--horizon", "0", "--out", s(tmp.path())]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn short_trajectory_is_not_solvable() {
    let tmp = TempDir::new().unwrap();
    let sim = tmp.path().join("sim");
    assert!(
        opinet(&["simulate", "toy12", "--horizon", "6", "--out", s(&sim)])
            .status
            .success()
    );
    let out = opinet(&[
        "infer",
        s(&sim.join("trajectory.json")),
        "--problem",
        "1",
        "--out",
        s(&tmp.path().join("i")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stdout.is_empty() || !out.stderr.is_empty());
}

#[test]
fn regime_mismatch_is_a_usage_error() {
    let tmp = TempDir::new().unwrap();
    let sim = tmp.path().join("sim");
    assert!(opinet(&["simulate", "krackhardt", "--out", s(&sim)]).status.success());
    let out = opinet(&[
        "infer",
        s(&sim.join("trajectory.json")),
        "--problem",
        "1",
        "--out",
        s(&tmp.path().join("i")),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn krackhardt_followers_are_flagged() {
    let tmp = TempDir::new().unwrap();
    let sim = tmp.path().join("sim");
    assert!(opinet(&["simulate", "krackhardt", "--out", s(&sim)]).status.success());
    let inf = tmp.path().join("inf");
    let out = opinet(&[
        "infer",
        s(&sim.join("trajectory.json")),
        "--problem",
        "3",
        "--p",
        "30",
        "--out",
        s(&inf),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(
        json(&inf.join("result.json"))["followers"],
        serde_json::json!([3, 4, 19, 20])
    );
}

#[test]
fn fig3_writes_every_edge() {
    let tmp = TempDir::new().unwrap();
    let out = opinet(&[
        "reproduce",
        "fig3",
        "--samples",
        "20",
        "--seed",
        "1",
        "--out",
        s(tmp.path()),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(tmp.path().join("fig3_errors.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("i,j,e_ij,half_width"));
    assert_eq!(csv.lines().count(), 442);
    assert_manifest(tmp.path());
}

#[test]
fn pq_prints_four_decimals() {
    let tmp = TempDir::new().unwrap();
    let sim = tmp.path().join("sim");
    assert!(opinet(&["simulate", "toy12", "--out", s(&sim)]).status.success());
    let out = opinet(&["pq", s(&sim.join("trajectory.json")), "--p", "11"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(
        text.contains("0.1816") && text.contains("-0.0818") && text.contains("-0.1189"),
        "{text}"
    );
}

#[test]
fn validate_reports_bad_files() {
    let tmp = TempDir::new().unwrap();
    assert!(opinet(&["validate", "toy12"]).status.success());
    let bad = tmp.path().join("bad.json");
    std::fs::write(&bad, "{\"schema\": 1}").unwrap();
    assert_eq!(opinet(&["validate", s(&bad)]).status.code(), Some(1));
}

#[test]
fn unknown_figure_is_a_usage_error() {
    assert_eq!(
        opinet(&["reproduce", "fig9", "--out", "/nonexistent"]).status.code(),
        Some(1)
    );
    assert_eq!(opinet(&["--help"]).status.code(), Some(0));
}
