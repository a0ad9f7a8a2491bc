use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn eolab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eolab"))
        .args(args)
        .env_remove("EOLAB_WORKERS")
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

const ENSEMBLE: &str = r#"{
  "graph": {"kind": "circulant-band", "w": 8, "n": 60, "self_loops": "none"},
  "entries": {"family": "gaussian-real", "rho": [0.5, 0.0]}
}"#;

fn perturbed(trials: u64, min_rate: f64) -> String {
    format!(
        r#"{{
  "kind": "perturbed",
  "ensemble": {{
    "graph": {{"kind": "circulant-band", "w": 16, "n": 120, "self_loops": "none"}},
    "entries": {{"family": "gaussian-real", "rho": [0.0, 0.0]}}
  }},
  "perturbation": {{"kind": "diagonal", "values": [[2.0, 0.0]]}},
  "epsilon": 0.15,
  "trials": {trials},
  "seed": 5,
  "tolerances": {{"match_cap": 0.6}},
  "acceptance": [{{"metric": "exact_match", "min_rate": {min_rate}}}]
}}"#
    )
}

#[test]
fn generate_then_spectrum() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "ens.json", ENSEMBLE);
    let stem = dir.path().join("x");
    let out = eolab(&[
        "generate",
        "--config",
        &cfg,
        "--seed",
        "3",
        "--out",
        stem.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(stem.with_extension("bin").exists());
    assert_eq!(
        fs::metadata(stem.with_extension("bin")).unwrap().len(),
        60 * 60 * 16
    );

    let csv_saved = dir.path().join("saved.csv");
    let csv_fresh = dir.path().join("fresh.csv");
    let a = eolab(&[
        "spectrum",
        "--input",
        stem.to_str().unwrap(),
        "--out",
        csv_saved.to_str().unwrap(),
    ]);
    let b = eolab(&[
        "spectrum",
        "--config",
        &cfg,
        "--seed",
        "3",
        "--out",
        csv_fresh.to_str().unwrap(),
    ]);
    assert!(a.status.success() && b.status.success());
    let saved = fs::read_to_string(csv_saved).unwrap();
    assert_eq!(saved.lines().count(), 61);
    assert_eq!(saved, fs::read_to_string(csv_fresh).unwrap());
}

#[test]
fn experiment_exit_code_follows_assertions() {
    let dir = tempfile::tempdir().unwrap();
    let ok = write(dir.path(), "ok.json", &perturbed(2, 0.0));
    let run_dir = dir.path().join("ok");
    let out = eolab(&[
        "experiment",
        "run",
        "--config",
        &ok,
        "--out",
        run_dir.to_str().unwrap(),
        "--workers",
        "2",
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["kind"], "perturbed");
    assert!(run_dir.join("trials/trial_1.json").exists());

    let exported = eolab(&["experiment", "export", "--out", run_dir.to_str().unwrap()]);
    assert!(exported.status.success());
    let svg = fs::read_to_string(run_dir.join("plots/scatter.svg")).unwrap();
    assert_eq!(svg.matches("<circle").count(), 2 * 120);

    // an unattainable rate fails the run without being an error
    let strict = write(
        dir.path(),
        "strict.json",
        &perturbed(1, 1.0).replace("0.6", "1e-9"),
    );
    let out = eolab(&[
        "experiment",
        "run",
        "--config",
        &strict,
        "--out",
        dir.path().join("s").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn same_seed_same_summary_across_workers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", &perturbed(4, 0.0));
    let mut bytes = Vec::new();
    for w in ["1", "8"] {
        let out_dir = dir.path().join(format!("w{w}"));
        let out = eolab(&[
            "experiment",
            "run",
            "--config",
            &cfg,
            "--out",
            out_dir.to_str().unwrap(),
            "--workers",
            w,
        ]);
        assert!(out.status.success());
        bytes.push(fs::read(out_dir.join("summary.json")).unwrap());
    }
    assert_eq!(bytes[0], bytes[1]);
}

#[test]
fn single_trial_commands() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "p.json", &perturbed(1, 0.0));
    let out = eolab(&["outliers", "--config", &cfg]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["report"]["n_predicted"], 1);
    assert_eq!(v["determinant_roots"][0]["winding"], 1);

    let sweep = write(
        dir.path(),
        "d.json",
        r#"{"kind": "dyson-sweep", "rho": [0.0, 0.0], "grid": {"extent": 2.0, "points": 5}}"#,
    );
    let csv = dir.path().join("sweep.csv");
    let out = eolab(&["dyson", "--config", &sweep, "--out", csv.to_str().unwrap()]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(fs::read_to_string(csv).unwrap().lines().count(), 26);

    let product = write(
        dir.path(),
        "prod.json",
        r#"{"kind": "product", "product": {"epsilon": 0.1, "factors": [
            {"graph": {"kind": "complete", "n": 40, "self_loops": "all"}, "entries": {"family": "gaussian-real"}},
            {"graph": {"kind": "complete", "n": 40, "self_loops": "all"}, "entries": {"family": "gaussian-complex"}}]}}"#,
    );
    let out = eolab(&["product", "--config", &product]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["linearization_defect"].as_f64().unwrap() < 1e-8);
}

#[test]
fn bad_input_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "bad.json",
        r#"{"kind": "perturbed", "trials": 0}"#,
    );
    let out = eolab(&[
        "experiment",
        "run",
        "--config",
        &cfg,
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());

    let wrong_kind = write(dir.path(), "w.json", &perturbed(1, 0.0));
    let out = eolab(&["product", "--config", &wrong_kind]);
    assert_eq!(out.status.code(), Some(2));
}
