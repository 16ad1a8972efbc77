//! End-to-end runs of the `xaits` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn xaits(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_xaits"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = xaits(args);
    assert!(
        out.status.success(),
        "xaits {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Trained {
    dir: TempDir,
    model: PathBuf,
    dataset: PathBuf,
    scaler: PathBuf,
    report: String,
}

/// synth -> train with a small grid and two lags.
fn trained() -> Trained {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.csv");
    ok(&["synth", "--seed", "7", "--months", "60", "--features", "3", "--out", s(&data)]);
    let grid = dir.path().join("grid.json");
    std::fs::write(&grid, r#"{"kernels":["linear","rbf"],"C":[1.5,10],"gammas":[0.1],"epsilons":[0.1]}"#).unwrap();
    let model = dir.path().join("model.json");
    let dataset = dir.path().join("best.csv");
    let scaler = dir.path().join("scaler.json");
    let report = ok(&[
        "train", "--input", s(&data), "--lags", "1,3", "--grid", s(&grid),
        "--model-out", s(&model), "--dataset-out", s(&dataset), "--scaler-out", s(&scaler),
    ]);
    Trained { dir, model, dataset, scaler, report }
}

#[test]
fn synth_is_deterministic_and_writes_truth() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    ok(&["synth", "--seed", "7", "--out", s(&a)]);
    ok(&["synth", "--seed", "7", "--out", s(&b)]);
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text, std::fs::read_to_string(&b).unwrap());
    // header plus 120 months
    assert_eq!(text.lines().count(), 121);
    let truth: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("a.truth.json")).unwrap()).unwrap();
    assert_eq!(truth["seed"], 7);
}

#[test]
fn too_short_synth_is_a_validation_error() {
    let out = xaits(&["synth", "--months", "12"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn train_and_explain_are_deterministic() {
    let t = trained();
    let report: serde_json::Value = serde_json::from_str(&t.report).unwrap();
    assert_eq!(report["rows"].as_array().unwrap().len(), 2);

    let explain = |extra: &[&str]| {
        let mut args = vec![
            "explain", "--model", s(&t.model), "--dataset", s(&t.dataset), "--period", "2014-12",
            "--seed", "3", "--lime-samples", "800", "--shap-iterations", "200",
        ];
        args.extend_from_slice(extra);
        ok(&args)
    };
    let first = explain(&[]);
    assert_eq!(first, explain(&[]));
    let parsed: Vec<serde_json::Value> = serde_json::from_str(&first).unwrap();
    assert_eq!(parsed.len(), 2);
    assert_eq!(parsed[0]["method"], "lime");
    assert_eq!(parsed[1]["method"], "shap");
    assert!(parsed[1]["attributions"].as_array().unwrap().len() <= 5);

    let svg = t.dir.path().join("chart.svg");
    let table = explain(&["--format", "table", "--denormalize", "--scaler", s(&t.scaler), "--svg", s(&svg)]);
    assert!(table.contains("LIME") && table.contains("SHAP"));
    assert!(std::fs::read_to_string(&svg).unwrap().starts_with("<svg"));
}

#[test]
fn period_outside_test_split_is_rejected() {
    let t = trained();
    let out = xaits(&[
        "explain", "--model", s(&t.model), "--dataset", s(&t.dataset), "--period", "2010-06",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("test split"));
}

#[test]
fn missing_input_is_a_validation_error() {
    let out = xaits(&["train", "--input", "/nonexistent/data.csv"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn eval_summary_reproduces_welch_table() {
    let dir = tempfile::tempdir().unwrap();
    let summary = dir.path().join("summary.json");
    std::fs::write(
        &summary,
        r#"{"a":{"label":"LIME","mean":4.30,"variance":12.221,"n":20},
            "b":{"label":"noXAI","mean":0.35,"variance":1.292,"n":20}}"#,
    )
    .unwrap();
    let table = ok(&["eval", "--summary", s(&summary), "--format", "table"]);
    for row in ["Mean", "Variance", "Observations", "t Stat", "P(T<=t) two-tail"] {
        assert!(table.contains(row), "missing row {row}");
    }
    assert!(table.contains("4.805"));

    let json = ok(&["eval", "--summary", s(&summary)]);
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(v["test"], "welch");
    let t = v["comparisons"][0]["result"]["t_stat"].as_f64().unwrap();
    assert!((t - 4.81).abs() < 0.01);
}

#[test]
fn eval_responses_summary_and_spearman() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("responses.csv");
    let mut text = String::from("participant_id,group,yes_count,xai_knowledge\n");
    for i in 0..6 {
        text.push_str(&format!("l{i},LIME,{},{}\n", 3 + i, i % 4));
        text.push_str(&format!("n{i},noXAI,{},{}\n", i % 3, 1 + i % 2));
    }
    std::fs::write(&csv, text).unwrap();
    let summary: serde_json::Value = serde_json::from_str(&ok(&["eval", "--responses", s(&csv)])).unwrap();
    assert_eq!(summary["test"], "summary");
    let welch: serde_json::Value = serde_json::from_str(&ok(&[
        "eval", "--responses", s(&csv), "--test", "welch", "--groups", "LIME,noXAI",
    ]))
    .unwrap();
    assert!(welch["comparisons"][0]["result"]["t_stat"].as_f64().unwrap() > 0.0);
    let rho: serde_json::Value =
        serde_json::from_str(&ok(&["eval", "--responses", s(&csv), "--test", "spearman"])).unwrap();
    assert_eq!(rho["groups"].as_array().unwrap().len(), 2);
}
