use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use page_core::harness::CSV_HEADER;
use serde_json::{json, Value};

fn page(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_page"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, value: Value) -> String {
    let path = dir.join(name);
    fs::write(&path, value.to_string()).unwrap();
    path.to_str().unwrap().to_string()
}

fn quadratic() -> Value {
    json!({"kind": "quadratic", "n": 64, "d": 4, "mu": 0.2, "L": 1.0, "seed": 2})
}

#[test]
fn run_fans_out_over_seeds_and_replays() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = write_config(
        dir.path(),
        "run.json",
        json!({
            "problem": quadratic(),
            "regime": "finite",
            "eps": 0.01,
            "seeds": [1, 2, 3],
            "out_dir": out,
        }),
    );
    let o = page(&["run", &cfg]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let mut traces: Vec<_> = fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|f| f.ends_with(".csv"))
        .collect();
    traces.sort();
    assert_eq!(traces, ["trace_1.csv", "trace_2.csv", "trace_3.csv"]);
    let summary: Value =
        serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["runs"].as_array().unwrap().len(), 3);
    assert!(summary["plan"]["T"].is_u64());
    let csv = fs::read_to_string(out.join("trace_2.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), CSV_HEADER.join(","));

    let summary_path = out.join("summary.json");
    let o = page(&["replay", summary_path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stderr).contains("3 traces checked, 0 mismatched"));

    fs::write(out.join("trace_3.csv"), "tampered\n").unwrap();
    let o = page(&["replay", summary_path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn gd_run_stays_within_theory_budget() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "gd.json",
        json!({
            "problem": quadratic(),
            "regime": "gd",
            "eps": 0.01,
            "seeds": [5],
            "out_dir": dir.path(),
        }),
    );
    let o = page(&["run", &cfg]);
    assert_eq!(o.status.code(), Some(0));
    let summary: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap())
            .unwrap();
    let ratio = summary["runs"][0]["budget_ratio"].as_f64().unwrap();
    assert!(ratio <= 1.0, "budget ratio {ratio}");
}

#[test]
fn compare_needs_two_methods() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "cmp.json",
        json!({
            "problem": quadratic(),
            "regime": "finite",
            "methods": ["finite"],
            "eps": 0.01,
            "seeds": [1],
            "out_dir": dir.path(),
        }),
    );
    let o = page(&["compare", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("at least two methods"));
}

#[test]
fn compare_writes_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "cmp.json",
        json!({
            "problem": quadratic(),
            "regime": "finite",
            "methods": ["finite", "gd"],
            "eps": 0.01,
            "seeds": [1, 2],
            "out_dir": dir.path(),
        }),
    );
    let o = page(&["compare", &cfg]);
    assert_eq!(o.status.code(), Some(0));
    let table = fs::read_to_string(dir.path().join("compare.csv")).unwrap();
    assert_eq!(table.lines().count(), 5);
    assert!(dir.path().join("gd").join("summary.json").exists());
    assert!(dir.path().join("finite").join("trace_2.csv").exists());
}

#[test]
fn invalid_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.json", json!({"problem": quadratic(), "regime": "finite"}));
    assert_eq!(page(&["run", &cfg]).status.code(), Some(2));

    let cfg = write_config(
        dir.path(),
        "manual.json",
        json!({
            "problem": quadratic(),
            "regime": "manual",
            "eps": 0.01,
            "overrides": {"eta": 0.5, "b": 64, "b_prime": 2},
            "seeds": [1],
            "max_iters": 10,
            "out_dir": dir.path(),
        }),
    );
    let o = page(&["run", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("manual mode requires p"));
}

#[test]
fn divergence_exits_3_with_partial_trace() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "diverge.json",
        json!({
            "problem": quadratic(),
            "regime": "manual",
            "eps": 0.01,
            "overrides": {"eta": 50.0, "b": 64, "b_prime": 2, "p": 1.0},
            "seeds": [1],
            "max_iters": 100_000,
            "out_dir": dir.path(),
        }),
    );
    let o = page(&["run", &cfg]);
    assert_eq!(o.status.code(), Some(3));
    let summary: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap())
            .unwrap();
    assert!(summary["runs"][0]["diverged_at"].is_u64());
    let csv = fs::read_to_string(dir.path().join("trace_1.csv")).unwrap();
    assert!(csv.lines().count() > 2);
}

#[test]
fn plan_prints_json() {
    let o = page(&[
        "plan", "--regime", "finite", "--n", "10000", "--L", "1", "--delta0", "1", "--eps", "0.1",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let plan: Value = serde_json::from_slice(&o.stdout).unwrap();
    let keys: Vec<&str> = plan.as_object().unwrap().keys().map(String::as_str).collect();
    for k in ["regime", "eta", "b", "b_prime", "p", "T", "grad_budget", "kappa"] {
        assert!(keys.contains(&k), "missing {k}");
    }
    assert_eq!(plan["b"], 10000);
    assert_eq!(plan["b_prime"], 100);
    assert_eq!(plan["eta"], 0.5);
}

#[test]
fn verify_detects_halved_l() {
    let o = page(&["verify"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let o = page(&["verify", "--l-scale", "0.5"]);
    assert_eq!(o.status.code(), Some(1));
    let stdout = String::from_utf8_lossy(&o.stdout);
    let failed: Vec<Value> = stdout
        .lines()
        .map(|l| serde_json::from_str::<Value>(l).unwrap())
        .filter(|r| r["status"] == "fail")
        .collect();
    assert!(failed.iter().any(|r| r["name"].as_str().unwrap().contains("descent_lemma")));
}

#[test]
fn verify_rejects_empty_check_list() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "suite.json", json!({"checks": []}));
    assert_eq!(page(&["verify", &cfg]).status.code(), Some(2));
}
