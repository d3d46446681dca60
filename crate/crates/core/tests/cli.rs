use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn brsel(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_brsel"))
        .args(args)
        .env_remove("BR_CACHE_DIR")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("{e}: {}", String::from_utf8_lossy(&out.stdout));
    })
}

fn write_uniform(dir: &Path) -> String {
    let path = dir.join("uniform01.json");
    fs::write(&path, r#"{"marginals":[{"kind":"uniform","b":1.0}],"coupling":"independent"}"#).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn bound_reproduces_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let dist = write_uniform(dir.path());
    let out = brsel(&["bound", "--n", "50", "--s", "1", "--dist", &dist]);
    assert_eq!(out.status.code(), Some(0));
    let doc = json(&out);
    assert_eq!(doc["schema_version"], 1);
    assert!((doc["t"].as_f64().unwrap() - 0.2).abs() < 1e-9);
    assert!((doc["bound"].as_f64().unwrap() - 10.0).abs() < 1e-9);
    for key in ["mc_mean", "mc_se", "reps"] {
        assert!(doc.get(key).is_some(), "{key}");
    }
}

#[test]
fn bound_with_replications_checks_invariants() {
    let out = brsel(&["bound", "--n", "30", "--reps", "3000", "--seed", "2", "--check-invariants", "--coupling", "comonotone"]);
    assert_eq!(out.status.code(), Some(0));
    let doc = json(&out);
    assert_eq!(doc["key_inequality_violations"], 0);
    assert_eq!(doc["nesting_violations"], 0);
    assert_eq!(doc["reps"], 3000);
}

#[test]
fn bellman_reports_value_gap() {
    let out = brsel(&["bellman", "--problem", "both", "--n", "25"]);
    assert_eq!(out.status.code(), Some(0));
    let doc = json(&out);
    let gap = doc["value_equality_gap"].as_f64().unwrap();
    assert!(gap <= 5e-4, "{gap}");
    assert_eq!(doc["solutions"].as_array().unwrap().len(), 2);
}

#[test]
fn bellman_gap_failure_exits_two() {
    let out = brsel(&["bellman", "--n", "25", "--grid-points", "201", "--gap-tol", "1e-12"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(json(&out)["pass"], false);
}

#[test]
fn bellman_csv_is_plot_ready() {
    let out = brsel(&["bellman", "--problem", "monotone", "--n", "3", "--grid-points", "101", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("problem,k,x,value,alpha"));
    assert_eq!(lines.count(), 4 * 101);
}

#[test]
fn maximal_oracle_message() {
    let out = brsel(&["maximal", "--brute-force", "--n", "10", "--reps", "1000", "--seed", "7"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["message"], "1000/1000 oracle matches");
}

#[test]
fn usage_errors_name_the_field() {
    for (args, field) in [
        (vec!["maximal", "--n", "10", "--reps", "10"], "seed"),
        (vec!["maximal", "--n", "10", "--reps", "0", "--seed", "1"], "reps"),
        (vec!["bellman", "--n", "5", "--grid-points", "100"], "grid-points"),
        (vec!["bound", "--s", "1"], "n"),
        (vec!["bound", "--n", "5", "--dist", "/nonexistent/file.json"], "dist"),
        (vec!["maximal", "--brute-force", "--n", "25", "--reps", "1", "--seed", "1"], "n"),
        (vec!["identity", "--n", "5", "--k", "9", "--reps", "10", "--seed", "1"], "k"),
    ] {
        let out = brsel(&args);
        assert_eq!(out.status.code(), Some(64), "{args:?}");
        let err = String::from_utf8_lossy(&out.stderr);
        assert!(err.contains(&format!("`{field}`")), "{args:?}: {err}");
    }
    assert_eq!(brsel(&["no-such-command"]).status.code(), Some(64));
    assert_eq!(brsel(&["--help"]).status.code(), Some(0));
}

#[test]
fn stdout_and_file_outputs_match() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("nested/report.json");
    let base = ["study", "--case", "ex2", "--n", "20", "--reps", "500", "--seed", "3"];
    let mut a = base.to_vec();
    a.extend(["--out", "-"]);
    let mut b = base.to_vec();
    b.extend(["--out", file.to_str().unwrap()]);
    let streamed = brsel(&a);
    let written = brsel(&b);
    assert_eq!(streamed.status.code(), Some(0));
    assert!(written.stdout.is_empty());
    assert_eq!(streamed.stdout, fs::read(&file).unwrap());
}

#[test]
fn simulate_writes_counts_and_traces() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("results.csv");
    let out = brsel(&[
        "simulate", "--problem", "knapsack", "--n", "8", "--reps", "50", "--seed", "4", "--grid-points", "501",
        "--trace", "3", "--out", csv.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("rep,final_count"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 50);
    assert!(rows[0].starts_with("0,"));
    let trace = fs::read_to_string(dir.path().join("results.csv.trace.jsonl")).unwrap();
    let steps: Vec<Value> = trace.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(steps.len(), 3 * 8);
    // the traced replications are the first rows of the CSV
    for r in 0..3 {
        let accepted = steps.iter().filter(|s| s["rep"] == r && s["accepted"] == true).count();
        assert_eq!(rows[r], format!("{r},{accepted}"));
    }
}

#[test]
fn cache_directory_is_reused() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().to_str().unwrap();
    let args = ["bellman", "--problem", "monotone", "--n", "10", "--grid-points", "301", "--cache-dir", cache];
    let first = json(&brsel(&args));
    let second = json(&brsel(&args));
    assert_eq!(first["solutions"][0]["cache"], "miss");
    assert_eq!(second["solutions"][0]["cache"], "hit");
    assert_eq!(first["solutions"][0]["value_at_top"], second["solutions"][0]["value_at_top"]);
    let via_env = Command::new(env!("CARGO_BIN_EXE_brsel"))
        .args(&args[..7])
        .env("BR_CACHE_DIR", cache)
        .output()
        .unwrap();
    assert_eq!(json(&via_env)["solutions"][0]["cache"], "hit");
}

#[test]
fn thread_count_does_not_change_output() {
    let base = ["identity", "--n", "6", "--k", "2,6", "--reps", "4000", "--seed", "8", "--grid-points", "301"];
    let mut one = base.to_vec();
    one.extend(["--threads", "1"]);
    let mut three = base.to_vec();
    three.extend(["--threads", "3"]);
    assert_eq!(brsel(&one).stdout, brsel(&three).stdout);
}

#[test]
fn study_reports_checks() {
    let out = brsel(&["study", "--case", "ex3", "--n", "40", "--reps", "2000", "--seed", "5"]);
    assert_eq!(out.status.code(), Some(0));
    let doc = json(&out);
    assert_eq!(doc["case_id"], "ex3");
    assert!(doc["checks"].as_array().unwrap().iter().any(|c| c["name"] == "near_tightness" && c["gating"] == false));
    let ex1 = brsel(&["study", "--case", "ex1", "--n", "3", "--reps", "10", "--seed", "5"]);
    assert_eq!(ex1.status.code(), Some(64));
}
