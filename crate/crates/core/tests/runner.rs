use serde_json::{json, Value};
use slelab::runner::{exit_code, run_with, ExperimentConfig, RunManifest, RunOptions};
use std::path::Path;

fn config(kind: &str, params: Value, dir: &Path) -> ExperimentConfig {
    serde_json::from_value(json!({ "kind": kind, "params": params, "seed": 7, "output_dir": dir })).unwrap()
}

fn run(cfg: &ExperimentConfig) -> RunManifest {
    run_with(cfg, &RunOptions { threads: 2 }).unwrap()
}

fn read_json(dir: &Path, name: &str) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join(name)).unwrap()).unwrap()
}

#[test]
fn sieve_identity_has_no_bad_squares() {
    let dir = tempfile::tempdir().unwrap();
    let m = run(&config("sieve", json!({ "p": 1.0 / 3.0, "N": 2, "n_max": 8 }), dir.path()));
    assert_eq!(m.outputs.len(), 1);
    assert_eq!(m.outputs[0].file, "sieve.json");
    let v = read_json(dir.path(), "sieve.json");
    assert_eq!(v["bad"], json!([]));
    assert_eq!(v["content_bound"], json!(0.0));
    assert!(dir.path().join("manifest.json").exists());
}

#[test]
fn dkappa_six_refined_branch_inapplicable() {
    let dir = tempfile::tempdir().unwrap();
    let m = run(&config("dkappa", json!({ "kappa": 6.0 }), dir.path()));
    assert_eq!(m.outputs[0].file, "dkappa.json");
    let b = &read_json(dir.path(), "dkappa.json")["bound"];
    assert!((b["p"].as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-15);
    assert!((b["a"].as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-15);
    assert_eq!(b["refined_applicable"], json!(false));
    assert_eq!(b["branch_refined"], Value::Null);
}

#[test]
fn digests_match_files_and_reruns() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let params = json!({ "kappa": 6.0, "radii": [0.25, 0.0625], "n_traces": 40 });
    let ma = run(&config("hitting", params.clone(), a.path()));
    let mb = run_with(&config("hitting", params, b.path()), &RunOptions { threads: 1 }).unwrap();
    assert!(ma.outputs.len() == 3, "{:?}", ma.outputs);
    assert!(ma.outputs.iter().any(|f| f.file.starts_with("hitting_slope_") && f.file.ends_with(".svg")));
    for (fa, fb) in ma.outputs.iter().zip(&mb.outputs) {
        assert_eq!(fa, fb);
        let bytes = std::fs::read(a.path().join(&fa.file)).unwrap();
        assert_eq!(slelab::io::sha256_hex(&bytes), fa.sha256);
        assert_eq!(bytes, std::fs::read(b.path().join(&fb.file)).unwrap());
    }
}

#[test]
fn trace_budget_truncates() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config("hitting", json!({ "kappa": 6.0, "radii": [0.25], "n_traces": 50 }), dir.path());
    cfg.budget.max_traces = Some(10);
    let m = run(&cfg);
    assert_eq!(m.exit_code(), 4);
    assert!(m.truncated[0].contains("10 of 50"));
    assert_eq!(read_json(dir.path(), "hitting.json")["n_traces"], json!(10));
}

#[test]
fn square_budget_truncates_sieve() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config("sieve", json!({ "p": 0.5, "N": 2, "n_max": 10 }), dir.path());
    cfg.budget.max_squares = Some(100);
    let m = run(&cfg);
    assert_eq!(m.exit_code(), 4);
    assert_eq!(read_json(dir.path(), "sieve.json")["n_max"], json!(5));
    cfg.budget.max_squares = Some(3);
    let e = run_with(&cfg, &RunOptions { threads: 1 }).unwrap_err();
    assert_eq!(exit_code(&e), 4);
}

#[test]
fn invalid_config_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let e = run_with(&config("hitting", json!({ "kappa": 9.0, "radii": [0.1], "n_traces": 5 }), dir.path()), &RunOptions::default())
        .unwrap_err();
    assert_eq!(exit_code(&e), 2);
    assert!(e.to_string().contains("params.kappa"), "{e}");
    assert!(!dir.path().join("manifest.json").exists());
}

#[test]
fn spectrum_and_dimension_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let m = run(&config("spectrum", json!({ "map": { "kind": "koebe" }, "t": 1.0 }), dir.path()));
    let names: Vec<&str> = m.outputs.iter().map(|f| f.file.as_str()).collect();
    assert_eq!(names[..2], ["spectrum.csv", "spectrum.json"]);
    assert!(names[2].starts_with("spectrum_slope_1.9") || names[2].starts_with("spectrum_slope_2.0"), "{names:?}");
    let csv = std::fs::read_to_string(dir.path().join("spectrum.csv")).unwrap();
    assert!(csv.starts_with("# {") && csv.lines().nth(1) == Some("radius,mean"));

    let dir = tempfile::tempdir().unwrap();
    let m = run(&config(
        "line-dimension",
        json!({ "kappa": 8.0, "n_traces": 4, "scales": [0.125, 0.0625, 0.03125], "trace": { "horizon": 4.0, "n_steps": 200 } }),
        dir.path(),
    ));
    assert_eq!(m.exit_code(), 0);
    let csv = std::fs::read_to_string(dir.path().join("line-dimension.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("scale,estimate,stderr"));
    assert_eq!(csv.lines().count(), 4);
    assert_eq!(read_json(dir.path(), "line-dimension.json")["n_traces"], json!(4));
}
