use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use survtree::io::{load_dataset, IngestConfig};
use survtree::{Shape, SplitRule, SurvivalTree};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_survtree"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn two_cohorts() -> survtree::Dataset {
    let text = fs::read(fixture("two_cohorts.csv")).unwrap();
    load_dataset(&text[..], &IngestConfig::default()).unwrap()
}

#[test]
fn four_rows_fit_a_single_leaf() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("model.json");
    let data = fixture("four_rows.csv");
    let schema = fixture("four_rows.schema.json");
    let stdout = ok(&[
        "train", "--data", s(&data), "--schema", s(&schema), "--seed", "1", "--alpha", "0", "--out", s(&model),
    ]);
    let summary: Value = serde_json::from_str(stdout.trim()).unwrap();
    assert_eq!(summary["n_leaves"], 1);
    let tree = SurvivalTree::from_json(&fs::read_to_string(&model).unwrap()).unwrap();
    assert_eq!(tree.leaf_count(), 1);
}

#[test]
fn same_seed_gives_identical_models() {
    let dir = tempfile::tempdir().unwrap();
    let data = fixture("two_cohorts.csv");
    let paths: Vec<PathBuf> = (0..2).map(|k| dir.path().join(format!("m{k}.json"))).collect();
    for p in &paths {
        ok(&["train", "--data", s(&data), "--seed", "11", "--restarts", "3", "--folds", "3", "--out", s(p)]);
    }
    assert_eq!(fs::read(&paths[0]).unwrap(), fs::read(&paths[1]).unwrap());
}

#[test]
fn missing_schema_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "train",
        "--data",
        s(&fixture("four_rows.csv")),
        "--schema",
        s(&dir.path().join("absent.json")),
        "--seed",
        "1",
        "--out",
        s(&dir.path().join("m.json")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("schema not found"));
}

#[test]
fn seed_is_required() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("m.json");
    let out = run(&["train", "--data", s(&fixture("two_cohorts.csv")), "--out", s(&model)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!model.exists());

    let config = dir.path().join("params.json");
    fs::write(&config, r#"{"seed": 4, "restarts": 1, "alpha": 0.5}"#).unwrap();
    ok(&["train", "--data", s(&fixture("two_cohorts.csv")), "--config", s(&config), "--out", s(&model)]);
    let tree = SurvivalTree::from_json(&fs::read_to_string(&model).unwrap()).unwrap();
    assert_eq!(tree.alpha(), 0.5);
}

#[test]
fn config_fields_override_flags() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("params.json");
    fs::write(&config, r#"{"max_depth": 1}"#).unwrap();
    let stdout = ok(&[
        "train",
        "--data",
        s(&fixture("two_cohorts.csv")),
        "--seed",
        "2",
        "--max-depth",
        "3",
        "--alpha",
        "0",
        "--config",
        s(&config),
        "--out",
        s(&dir.path().join("m.json")),
    ]);
    let summary: Value = serde_json::from_str(stdout.trim()).unwrap();
    assert_eq!(summary["depth"], 1);

    fs::write(&config, r#"{"depth": 2}"#).unwrap();
    let out = run(&[
        "train",
        "--data",
        s(&fixture("two_cohorts.csv")),
        "--seed",
        "2",
        "--config",
        s(&config),
        "--out",
        s(&dir.path().join("m.json")),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn null_model_has_zero_ratios() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("null.json");
    fs::write(&model, SurvivalTree::null(&two_cohorts(), 5).unwrap().to_json()).unwrap();
    let data = fixture("two_cohorts.csv");
    let csv = dir.path().join("report.csv");
    let first = ok(&["evaluate", "--model", s(&model), "--data", s(&data), "--out", s(&csv)]);
    let report: Value = serde_json::from_str(first.trim()).unwrap();
    for key in ["csr", "bpr", "ibr"] {
        assert_eq!(report[key], 0.0, "{key}");
    }
    assert_eq!(first, ok(&["evaluate", "--model", s(&model), "--data", s(&data)]));
    assert_eq!(fs::read_to_string(&csv).unwrap().lines().count(), 2);
}

#[test]
fn two_cohort_concordance_matches_pair_count() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("m.json");
    let data = fixture("two_cohorts.csv");
    ok(&["train", "--data", s(&data), "--seed", "3", "--alpha", "1", "--max-depth", "2", "--out", s(&model)]);
    let report: Value = serde_json::from_str(ok(&["evaluate", "--model", s(&model), "--data", s(&data)]).trim()).unwrap();

    let predictions = ok(&["predict", "--model", s(&model), "--data", s(&data), "--at", "1,2"]);
    let mut lines = predictions.lines();
    assert_eq!(lines.next(), Some("row,leaf,theta,S(1),S(2)"));
    let risk: Vec<f64> = lines.map(|l| l.split(',').nth(2).unwrap().parse().unwrap()).collect();
    let d = two_cohorts();
    assert_eq!(risk.len(), d.len());
    let (mut concordant, mut total) = (0.0, 0.0);
    for i in 0..d.len() {
        for j in 0..d.len() {
            let (a, b) = (d.outcomes[i], d.outcomes[j]);
            if a.event && a.time < b.time {
                total += 1.0;
                concordant += if risk[i] > risk[j] {
                    1.0
                } else if risk[i] == risk[j] {
                    0.5
                } else {
                    0.0
                };
            }
        }
    }
    let c = report["harrell_c"].as_f64().unwrap();
    assert!((c - concordant / total).abs() < 1e-12, "{c} vs {}", concordant / total);
    assert!(c > 0.6);
}

#[test]
fn schema_mismatch_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("m.json");
    fs::write(&model, SurvivalTree::null(&two_cohorts(), 5).unwrap().to_json()).unwrap();
    let out = run(&["evaluate", "--model", s(&model), "--data", s(&fixture("four_rows.csv"))]);
    assert_eq!(out.status.code(), Some(3));

    fs::write(&model, "{\"nodes\": 3}").unwrap();
    let out = run(&["export-dot", "--model", s(&model)]);
    assert_eq!(out.status.code(), Some(3));
}

/// Statement-level check of the DOT subset the exporter writes.
fn parse_dot(dot: &str) -> (usize, usize) {
    let body = dot
        .trim()
        .strip_prefix("digraph survival_tree {")
        .and_then(|b| b.strip_suffix('}'))
        .expect("digraph wrapper");
    let (mut nodes, mut edges) = (0, 0);
    for stmt in body.lines().map(str::trim).filter(|l| !l.is_empty()) {
        let stmt = stmt.strip_suffix(';').expect("statement terminator");
        let (head, attrs) = stmt.split_once(" [").expect("attribute list");
        let attrs = attrs.strip_suffix(']').expect("closed attribute list");
        let mut in_string = false;
        let mut escaped = false;
        for ch in attrs.chars() {
            match (in_string, escaped, ch) {
                (true, false, '\\') => escaped = true,
                (true, true, _) => escaped = false,
                (_, false, '"') => in_string = !in_string,
                _ => {}
            }
        }
        assert!(!in_string, "unterminated string in {stmt}");
        let ident = |t: &str| t.starts_with('n') && t[1..].chars().all(|c| c.is_ascii_digit());
        match head.split(" -> ").collect::<Vec<_>>()[..] {
            ["node"] => {}
            [id] => {
                assert!(ident(id), "{id}");
                nodes += 1;
            }
            [a, b] => {
                assert!(ident(a) && ident(b), "{head}");
                edges += 1;
            }
            _ => panic!("unexpected statement {stmt}"),
        }
    }
    (nodes, edges)
}

#[test]
fn dot_export_counts() {
    let dir = tempfile::tempdir().unwrap();
    let d = two_cohorts();
    let model = dir.path().join("m.json");

    fs::write(&model, SurvivalTree::null(&d, 5).unwrap().to_json()).unwrap();
    let dot = ok(&["export-dot", "--model", s(&model)]);
    assert_eq!(parse_dot(&dot), (1, 0));
    assert!(dot.contains("n=80") && dot.matches("S(").count() == 5);

    let noise = |t| SplitRule::Threshold {
        feature: 1,
        threshold: t,
    };
    let full = Shape::split(
        SplitRule::Threshold {
            feature: 0,
            threshold: 0.5,
        },
        Shape::split(noise(0.5), Shape::Leaf, Shape::Leaf),
        Shape::split(noise(0.5), Shape::Leaf, Shape::Leaf),
    );
    fs::write(&model, SurvivalTree::build(&full, &d, 0.0, 1).unwrap().to_json()).unwrap();
    let out = dir.path().join("tree.dot");
    ok(&["export-dot", "--model", s(&model), "--out", s(&out)]);
    assert_eq!(parse_dot(&fs::read_to_string(&out).unwrap()), (7, 6));
}

#[test]
fn simulate_writes_one_record_per_repetition() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("sim.json");
    fs::write(
        &config,
        r#"{"n_total": 900, "n_test": 300, "n_train": 200, "min_depth": 2, "max_depth": 3,
            "model": {"restarts": 2, "cp": [0.01, 0.05]}}"#,
    )
    .unwrap();
    let out = dir.path().join("run");
    ok(&["simulate", "--config", s(&config), "--seed", "5", "--out", s(&out)]);
    let records = fs::read_to_string(out.join("records.jsonl")).unwrap();
    assert_eq!(records.lines().count(), 1);
    let record: Value = serde_json::from_str(records.trim()).unwrap();
    assert_eq!(record["seed"], 5);
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 3);

    let again = dir.path().join("again");
    ok(&["simulate", "--config", s(&config), "--seed", "5", "--out", s(&again)]);
    assert_eq!(summary, fs::read_to_string(again.join("summary.csv")).unwrap());

    let missing_seed = run(&["simulate", "--config", s(&config), "--out", s(&out)]);
    assert_eq!(missing_seed.status.code(), Some(2));
    fs::write(&config, r#"{"n_test": 5000}"#).unwrap();
    let invalid = run(&["simulate", "--config", s(&config), "--seed", "1", "--out", s(&out)]);
    assert_eq!(invalid.status.code(), Some(2));
}

#[test]
fn benchmark_reports_both_trainers() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bench.csv");
    let data = fixture("two_cohorts.csv");
    let args = [
        "benchmark",
        "--data",
        s(&data),
        "--seed",
        "8",
        "--restarts",
        "2",
        "--folds",
        "3",
        "--out",
        s(&out),
    ];
    ok(&args);
    let csv = fs::read_to_string(&out).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[1].starts_with("optimal,") && rows[2].starts_with("greedy,"));
    ok(&args);
    assert_eq!(csv, fs::read_to_string(&out).unwrap());
}
