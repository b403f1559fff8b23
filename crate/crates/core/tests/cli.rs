mod common;

use std::process::Command;

use serde_json::Value;

fn telab(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_telab")).args(args).output().unwrap()
}

fn path(p: &std::path::Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn solve_prints_solution_and_metrics() {
    let topo = common::data_path("b4.json");
    let tm = common::data_path("b4_tm.json");
    let out = telab(&["solve", "--topo", path(&topo), "--tm", path(&tm), "--model", "te", "--tunnels", "fixed:5"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["result"]["status"], "optimal");
    assert_eq!(doc["result"]["variables"], 792);
    assert_eq!(doc["metrics"]["link_utilizations"].as_array().unwrap().len(), 38);
}

#[test]
fn verify_flags_te_solution_on_the_diamond() {
    let dir = tempfile::tempdir().unwrap();
    let topo = common::data_path("diamond.json");
    let tm = common::data_path("diamond_tm.csv");
    let te = dir.path().join("te.json");
    let ffc = dir.path().join("ffc.json");
    for (model, file) in [("te", &te), ("ffc", &ffc)] {
        let out = telab(&["solve", "--topo", path(&topo), "--tm", path(&tm), "--model", model, "--out", path(file)]);
        assert_eq!(out.status.code(), Some(0));
    }
    let out = telab(&["verify", "--solution", path(&te), "--topo", path(&topo)]);
    assert_eq!(out.status.code(), Some(1));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["violations"].as_array().unwrap().len(), 2);

    let out = telab(&["verify", "--solution", path(&ffc), "--topo", path(&topo)]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn sweep_writes_result_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = serde_json::json!({
        "topology": common::data_path("b4.json"),
        "tm": common::data_path("b4_tm.json"),
        "scales": [0.5, 1.0],
        "calibrate": true,
        "capacity_mode": "normal-only",
        "workers": 2,
    });
    let cfg_path = dir.path().join("exp.json");
    std::fs::write(&cfg_path, cfg.to_string()).unwrap();
    let out_dir = dir.path().join("out");
    let out = telab(&["sweep", "--config", path(&cfg_path), "--out", path(&out_dir)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(out_dir.join("results.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2 * 2 * 2);
    assert!(csv.starts_with("model,policy,scale,seed,backend,capacity_mode,status,objective,"));
    let manifest: Value = serde_json::from_str(&std::fs::read_to_string(out_dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config_sha256"].as_str().unwrap().len(), 64);
    assert_eq!(manifest["points"], 8);
    assert_eq!(std::fs::read_dir(out_dir.join("solutions")).unwrap().count(), 8);
    let dump = out_dir.join("solutions").join("ffc_adaptive_1.json");
    let calibrated = dir.path().join("calibrated.json");
    let out = telab(&[
        "calibrate", "--topo", path(&common::data_path("b4.json")), "--tm", path(&common::data_path("b4_tm.json")),
        "--out", path(&calibrated),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let out = telab(&["verify", "--solution", path(&dump), "--topo", path(&calibrated)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
}

#[test]
fn gen_and_fit_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let topo = common::data_path("b4.json");
    let tm = dir.path().join("tm.json");
    let a = telab(&["gen-tm", "--topo", path(&topo), "--mu", "2", "--sigma", "0.5", "--seed", "3", "--out", path(&tm)]);
    assert_eq!(a.status.code(), Some(0));
    let b = telab(&["gen-tm", "--topo", path(&topo), "--mu", "2", "--sigma", "0.5", "--seed", "3"]);
    assert_eq!(std::fs::read(&tm).unwrap(), b.stdout);
    let fit = telab(&["fit-tm", "--topo", path(&topo), "--tm", path(&tm)]);
    let fit: Value = serde_json::from_slice(&fit.stdout).unwrap();
    assert_eq!(fit["n_samples"], 132);
    assert!((fit["mu"].as_f64().unwrap() - 2.0).abs() < 0.2);
}

#[test]
fn errors_map_to_distinct_exit_codes() {
    let topo = common::data_path("b4.json");
    let tm = common::data_path("b4_tm.json");
    let usage = telab(&["solve", "--bogus"]);
    assert_eq!(usage.status.code(), Some(2));

    let missing = telab(&["solve", "--topo", "/nonexistent/topo.json", "--tm", path(&tm)]);
    assert_eq!(missing.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("/nonexistent/topo.json"));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"name": "x", "nodes": [{"id": "a"}, {"id": "b"}], "links": [{"src": "a", "dst": "b", "capacity": 0}]}"#).unwrap();
    let schema = telab(&["solve", "--topo", path(&bad), "--tm", path(&tm)]);
    assert_eq!(schema.status.code(), Some(4));

    let policy = telab(&["solve", "--topo", path(&topo), "--tm", path(&tm), "--tunnels", "fixed:0"]);
    assert_eq!(policy.status.code(), Some(2));
    let backend = telab(&["solve", "--topo", path(&topo), "--tm", path(&tm), "--backend", "cplex"]);
    assert_eq!(backend.status.code(), Some(2));
}
