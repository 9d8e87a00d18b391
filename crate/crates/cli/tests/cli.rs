use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn gasketlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gasketlab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn summary(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

fn config(dir: &Path, text: &str) -> String {
    let path = dir.join("config.json");
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn scale_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = gasketlab(&["scale", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let s = summary(&out);
    assert_eq!(s["schema_version"], 1);
    assert_eq!(s["kind"], "scale");
    assert!((s["values"]["r"].as_f64().unwrap() - 0.6).abs() < 1e-12);
    assert!((s["values"]["beta"].as_f64().unwrap() - 2.321928).abs() < 1e-6);
    assert_eq!(s["values"]["regime"]["regime"], "singular");
    let manifest: Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest.as_array().unwrap().len(), 2);
    assert!(out.join("psi.dat").exists());
}

#[test]
fn empty_levels_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), r#"{"dimension": 2, "levels": []}"#);
    let o = gasketlab(&["scale", "--config", &cfg, "--out", dir.path().join("x").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("levels"));
}

#[test]
fn malformed_config_reports_location() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "{\n \"dimension\": 2,\n \"levels\": [2,\n}");
    let o = gasketlab(&["build", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 4"));
}

#[test]
fn resource_cap_and_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x");
    let o = gasketlab(&["hke", "--depth", "7", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(gasketlab(&["--out", out.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(gasketlab(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn singularity_sweep_decreases() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), r#"{"dimension": 2, "levels": [2, 2, 2, 2, 2, 2, 2]}"#);
    let out = dir.path().join("run");
    let o = gasketlab(&["singularity", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let mut r = csv::Reader::from_path(out.join("lorenz.csv")).unwrap();
    let masses: Vec<f64> = r.records().map(|rec| rec.unwrap()[1].parse().unwrap()).collect();
    assert_eq!(masses.len(), 7);
    assert!(masses.windows(2).all(|w| w[1] < w[0]));
    let rates = fs::read_to_string(out.join("entropy_rate.dat")).unwrap();
    assert_eq!(rates.lines().count(), 8);
}

#[test]
fn walk_artifacts_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = gasketlab(&["walk", "--depth", "5", "--seed", "11", "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    }
    for file in ["summary.json", "exit_times.csv", "exit_times.dat", "exit_reference_2.dat", "manifest.json"] {
        assert_eq!(fs::read(a.join(file)).unwrap(), fs::read(b.join(file)).unwrap(), "{file}");
    }
    let manifest = fs::read_to_string(a.join("manifest.json")).unwrap();
    assert!(manifest.contains("slope 2"));
}

#[test]
fn mixed_levels_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), r#"{"dimension": 2, "levels": [2, 3, 2], "seed": 5}"#);
    for kind in ["build", "harmonic", "metric", "approx"] {
        let out = dir.path().join(kind);
        let o = gasketlab(&[kind, "--config", &cfg, "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{kind}: {}", String::from_utf8_lossy(&o.stdout));
        assert_eq!(summary(&out)["spec"]["levels"], serde_json::json!([2, 3, 2]));
    }
}

#[test]
fn full_suite_reports_each_criterion() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("all");
    let o = gasketlab(&["--all", "--out", out.to_str().unwrap()]);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(stdout.lines().filter(|l| l.starts_with("PASS") || l.starts_with("FAIL")).count(), 12);
    let s = summary(&out);
    let criteria = s["values"]["criteria"].as_array().unwrap();
    assert_eq!(criteria.len(), 12);
    let failed: Vec<u64> = criteria
        .iter()
        .filter(|c| c["passed"] == false)
        .map(|c| c["id"].as_u64().unwrap())
        .collect();
    // the concentration threshold at depth 7 is out of reach; see the README
    assert_eq!(failed, vec![5]);
    assert_eq!(o.status.code(), Some(1));
}
