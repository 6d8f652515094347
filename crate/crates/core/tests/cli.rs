//! End-to-end runs of the `optent` binary.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn optent(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_optent"))
        .current_dir(dir)
        .env_remove("OPTENT_OUT_DIR")
        .args(args)
        .output()
        .expect("binary runs")
}

fn summary(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

#[test]
fn entropy_a_writes_series_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = optent(dir.path(), &["entropy-a", "--samples", "20", "--tmax", "4", "--out", "o"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("o/series.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,log_avg,stderr,n_samples"));
    assert_eq!(lines.count(), 9);
    let s = summary(&dir.path().join("o"));
    assert_eq!(s["mode"], "entropy-a");
    assert!(s["protocol"].as_str().unwrap().contains("epsilon"));
    assert!(s["estimates"][0]["estimate"]["slope"].as_f64().unwrap().abs() < 1e-6);
    assert!(s.get("extrapolation").is_none());
}

#[test]
fn three_widths_trigger_extrapolation() {
    let dir = tempfile::tempdir().unwrap();
    let args =
        ["entropy-a", "--samples", "20", "--tmax", "4", "--epsilon", "0.2", "--epsilon", "0.1", "--epsilon", "0.05"];
    let out = optent(dir.path(), &args);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let o = dir.path().join("optent-out");
    for i in 0..3 {
        assert!(o.join(format!("series_eps_{i}.csv")).exists());
    }
    let s = summary(&o);
    assert_eq!(s["estimates"].as_array().unwrap().len(), 3);
    assert!(s["extrapolation"]["extrapolation"]["coefficient"].is_number());
}

#[test]
fn json_format_and_env_out_dir() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_optent"))
        .current_dir(dir.path())
        .env("OPTENT_OUT_DIR", "from-env")
        .args(["expansion", "--samples", "10", "--tmax", "3", "--format", "json"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("from-env/series.json")).unwrap()).unwrap();
    assert_eq!(v["t"].as_array().unwrap().len(), 7);
    assert_eq!(v["n_samples"][0], 10);
}

#[test]
fn config_file_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("run.toml"),
        "e = 0.0\nepsilon = [0.5]\nt_max = 6.0\nsamples = 30\nbounding_box = [[-1.0, 1.0], [-1.0, 1.0]]\n[system]\nname = \"saddle\"\n",
    )
    .unwrap();
    let out = optent(dir.path(), &["expansion", "--config", "run.toml", "--samples", "40"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let s = summary(&dir.path().join("optent-out"));
    assert_eq!(s["config"]["samples"], 40);
    assert_eq!(s["config"]["window"], serde_json::json!([3.0, 6.0]));
    let slope = s["estimates"][0]["estimate"]["slope"].as_f64().unwrap();
    assert!((slope - 1.0).abs() < 1e-3, "{slope}");
}

#[test]
fn simulate_reports_hygiene() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("run.toml"),
        "point = [0.5, 1.0, 0.3, -0.2]\n[system]\nname = \"mechanical_torus\"\n",
    )
    .unwrap();
    let out = optent(dir.path(), &["simulate", "--config", "run.toml", "--tmax", "5"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let o = dir.path().join("optent-out");
    let s = summary(&o);
    assert!(s["energy_drift"].as_f64().unwrap() < 1e-6);
    assert!(s["windowed_reversibility_error"].as_f64().unwrap() < 1e-10);
    let header = std::fs::read_to_string(o.join("trajectory.csv")).unwrap();
    assert!(header.starts_with("t,q1,q2,p1,p2,energy,log_vol_vertical\n"));
}

#[test]
fn audits_and_probes_write_tables() {
    let dir = tempfile::tempdir().unwrap();
    for (args, file) in [
        (&["audit", "mane"][..], "audit_mane.csv"),
        (&["audit", "quotient"], "audit_quotient.csv"),
        (&["opticity"], "opticity.csv"),
        (&["twist"], "twist_angles.csv"),
        (&["entropy-b"], "series.csv"),
    ] {
        let mut full = args.to_vec();
        full.extend(["--samples", "8", "--tmax", "3", "--out", "o"]);
        let out = optent(dir.path(), &full);
        assert_eq!(out.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(dir.path().join("o").join(file).exists(), "{file}");
    }
    assert_eq!(summary(&dir.path().join("o"))["mode"], "entropy-b");
}

#[test]
fn configuration_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(optent(dir.path(), &["nonsense"]).status.code(), Some(2));
    assert_eq!(optent(dir.path(), &["entropy-a", "--samples", "0"]).status.code(), Some(2));
    std::fs::write(dir.path().join("bad.toml"), "unknown_key = 1\n").unwrap();
    let out = optent(dir.path(), &["entropy-a", "--config", "bad.toml"]);
    assert_eq!(out.status.code(), Some(2));
    let v: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(v["error"], "config");
}

#[test]
fn runtime_errors_exit_with_three_and_diagnose() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.toml"), "[system]\nname = \"mechanical_torus\"\nparams = { m2 = -1.0 }\n")
        .unwrap();
    let out = optent(dir.path(), &["audit", "mane", "--config", "run.toml", "--samples", "5", "--tmax", "2"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert!(v["error"].is_object());
    assert!(v["message"].as_str().unwrap().len() > 5);
}

#[test]
fn list_systems_names_the_catalog() {
    let dir = tempfile::tempdir().unwrap();
    let out = optent(dir.path(), &["list-systems", "--format", "json"]);
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let names: Vec<&str> = v.as_array().unwrap().iter().map(|s| s["name"].as_str().unwrap()).collect();
    assert_eq!(names, ["free_particle", "harmonic", "mechanical_torus", "saddle", "jacobi"]);
}
