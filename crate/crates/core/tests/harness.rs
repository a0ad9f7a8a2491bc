use std::fs;
use std::path::Path;

use elliptic_outliers::ensemble::{EnsembleSpec, EntryModel, GraphSpec, SelfLoops};
use elliptic_outliers::harness::{
    export, run, trial_json_path, Assertion, ExperimentConfig, ExperimentKind, GridSpec,
    RunOptions, TrialOutcome, TrialRecord, BOUNDARY_POINTS, SUMMARY_FILE, SUMMARY_SCHEMA,
};
use elliptic_outliers::outliers::PerturbationSpec;
use elliptic_outliers::products::ProductSpec;
use elliptic_outliers::spectral::eigenvalues;
use elliptic_outliers::{ensemble, C64};

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn band(n: usize, w: usize, rho: f64) -> EnsembleSpec {
    EnsembleSpec::new(
        GraphSpec::circulant_band(n, w, SelfLoops::None),
        EntryModel::gaussian_real(rho),
    )
}

fn no_outliers(n: usize, trials: u64) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(ExperimentKind::NoOutliers);
    cfg.ensemble = Some(band(n, 8, 0.0));
    cfg.trials = trials;
    cfg.seed = 17;
    cfg.epsilon = Some(0.5);
    cfg
}

fn opts(dir: &Path, workers: usize) -> RunOptions {
    RunOptions {
        workers: Some(workers),
        out_dir: Some(dir.to_path_buf()),
    }
}

#[test]
fn single_trial_matches_brute_force() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = no_outliers(50, 1);
    let out = run(&cfg, &opts(dir.path(), 1)).unwrap();

    let x = ensemble::sample_matrix(cfg.ensemble.as_ref().unwrap(), 17, 0).unwrap();
    let eigs = eigenvalues(&x.entries).unwrap().eigenvalues;
    let expect = eigs.iter().filter(|z| z.norm() > 1.5 + 1e-12).count();
    assert_eq!(out.summary.outliers_outside_region, Some(vec![expect]));
    assert_eq!(out.summary.completed, 1);
    assert_eq!(out.executed, vec![0]);
}

#[test]
fn worker_count_does_not_change_bytes() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = no_outliers(40, 6);
    run(&cfg, &opts(a.path(), 1)).unwrap();
    run(&cfg, &opts(b.path(), 8)).unwrap();
    for name in [
        SUMMARY_FILE,
        "config.json",
        "trials/trial_3.csv",
        "trials/trial_5.json",
    ] {
        assert_eq!(
            fs::read(a.path().join(name)).unwrap(),
            fs::read(b.path().join(name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn resume_runs_only_missing_trials() {
    let fresh = tempfile::tempdir().unwrap();
    let cfg = no_outliers(40, 5);
    run(&cfg, &opts(fresh.path(), 2)).unwrap();
    let reference = fs::read(fresh.path().join(SUMMARY_FILE)).unwrap();

    fs::remove_file(trial_json_path(fresh.path(), 1)).unwrap();
    fs::remove_file(trial_json_path(fresh.path(), 4)).unwrap();
    fs::remove_file(fresh.path().join(SUMMARY_FILE)).unwrap();
    let again = run(&cfg, &opts(fresh.path(), 3)).unwrap();
    assert_eq!(again.executed, vec![1, 4]);
    assert_eq!(
        fs::read(fresh.path().join(SUMMARY_FILE)).unwrap(),
        reference
    );
}

#[test]
fn changed_config_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    run(&no_outliers(40, 1), &opts(dir.path(), 1)).unwrap();
    let mut other = no_outliers(40, 1);
    other.seed = 18;
    assert!(run(&other, &opts(dir.path(), 1)).is_err());
}

#[test]
fn configuration_error_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let mut cfg = ExperimentConfig::new(ExperimentKind::Perturbed);
    cfg.ensemble = Some(band(40, 8, 0.5));
    // missing perturbation
    assert!(run(&cfg, &opts(&out, 1)).is_err());
    assert!(!out.exists());
}

#[test]
fn perturbed_summary_reports_match_rate() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::new(ExperimentKind::Perturbed);
    cfg.ensemble = Some(band(200, 32, 0.0));
    cfg.perturbation = Some(PerturbationSpec::Diagonal {
        values: vec![c(2.0, 0.0)],
    });
    cfg.trials = 4;
    cfg.epsilon = Some(0.15);
    cfg.tolerances.match_cap = Some(0.5);
    cfg.acceptance = vec![Assertion {
        metric: "exact_match".into(),
        min_rate: 0.5,
    }];
    let out = run(&cfg, &opts(dir.path(), 2)).unwrap();
    let s = &out.summary;
    assert_eq!(s.predictions, vec![c(2.0, 0.0)]);
    let rate = s.rate("exact_match").unwrap();
    assert_eq!(rate.total, 4);
    assert!(rate.wilson_low <= rate.estimate && rate.estimate <= rate.wilson_high);
    assert!(s.metrics["mean_match_distance"] < 0.5);
    assert!(s.passed, "{s:?}");

    // summary is a function of the records alone
    for t in 0..4 {
        let rec: TrialRecord =
            serde_json::from_str(&fs::read_to_string(trial_json_path(dir.path(), t)).unwrap())
                .unwrap();
        assert_eq!(rec.trial_index, t);
        assert!(matches!(rec.outcome, Some(TrialOutcome::Perturbed { .. })));
    }
}

#[test]
fn export_files() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = no_outliers(30, 3);
    cfg.epsilon = Some(0.2);
    run(&cfg, &opts(dir.path(), 2)).unwrap();
    let files = export(dir.path()).unwrap();

    let svg = fs::read_to_string(&files.svg).unwrap();
    assert_eq!(svg.matches("<circle").count(), 3 * 30);
    assert_eq!(svg.matches("<polyline").count(), 1);

    let scatter = fs::read_to_string(&files.scatter_csv).unwrap();
    assert_eq!(scatter.lines().count(), 1 + 90);
    assert_eq!(scatter.lines().next(), Some("trial,re,im"));

    // ρ = 0: a circle of radius 1 + ε
    let boundary = fs::read_to_string(&files.boundary_csv).unwrap();
    let pts: Vec<(f64, f64)> = boundary
        .lines()
        .skip(1)
        .map(|l| {
            let (a, b) = l.split_once(',').unwrap();
            (a.parse().unwrap(), b.parse().unwrap())
        })
        .collect();
    assert_eq!(pts.len(), BOUNDARY_POINTS);
    for (x, y) in pts {
        assert!(((x * x + y * y).sqrt() - 1.2).abs() < 1e-12);
    }
}

#[test]
fn boundary_for_rho_zero_is_unit_circle() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::new(ExperimentKind::DysonSweep);
    cfg.rho = Some(c(0.0, 0.0));
    cfg.epsilon = Some(1e-300);
    cfg.grid = Some(GridSpec {
        extent: 2.0,
        points: 3,
    });
    run(&cfg, &opts(dir.path(), 1)).unwrap();
    let files = export(dir.path()).unwrap();
    let text = fs::read_to_string(files.boundary_csv).unwrap();
    assert_eq!(text.lines().count(), 1 + 512);
    for l in text.lines().skip(1) {
        let (a, b) = l.split_once(',').unwrap();
        let r = a.parse::<f64>().unwrap().hypot(b.parse().unwrap());
        assert!((r - 1.0).abs() < 1e-12);
    }
}

#[test]
fn summary_validates_against_schema() {
    let schema: serde_json::Value = serde_json::from_str(SUMMARY_SCHEMA).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();

    let dir = tempfile::tempdir().unwrap();
    run(&no_outliers(30, 2), &opts(dir.path(), 1)).unwrap();
    let files = export(dir.path()).unwrap();
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(files.summary_json).unwrap()).unwrap();
    assert!(validator.is_valid(&summary));

    let mut broken = summary.clone();
    broken["kind"] = serde_json::json!("nonsense");
    assert!(!validator.is_valid(&broken));
}

#[test]
fn dyson_sweep_agrees_with_geometry() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::new(ExperimentKind::DysonSweep);
    cfg.rho = Some(c(0.5, 0.0));
    cfg.grid = Some(GridSpec {
        extent: 3.0,
        points: 9,
    });
    cfg.acceptance = vec![Assertion {
        metric: "support_agreement".into(),
        min_rate: 1.0,
    }];
    let out = run(&cfg, &opts(dir.path(), 2)).unwrap();
    let rate = out.summary.rate("support_agreement").unwrap();
    assert!(rate.total > 60);
    assert!(out.summary.passed, "{rate:?}");
    let csv = fs::read_to_string(dir.path().join("trials/trial_0.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("z_re,z_im,V,b_re,b_im,verdict"));
    assert_eq!(csv.lines().count(), 82);
}

#[test]
fn product_and_isotropic_and_diagnostics_run() {
    let dir = tempfile::tempdir().unwrap();
    let factor = EnsembleSpec::new(
        GraphSpec::complete(80, SelfLoops::All),
        EntryModel::gaussian_real(0.0),
    );
    let mut cfg = ExperimentConfig::new(ExperimentKind::Product);
    cfg.product = Some(ProductSpec {
        factors: vec![factor.clone(), factor.clone()],
        perturbations: Some(vec![
            PerturbationSpec::Diagonal {
                values: vec![c(2.0, 0.0)]
            };
            2
        ]),
        epsilon: 0.1,
    });
    cfg.tolerances.match_cap = Some(1.0);
    let out = run(&cfg, &opts(&dir.path().join("p"), 1)).unwrap();
    assert_eq!(out.summary.predictions.len(), 1);
    assert!((out.summary.predictions[0] - 4.0).norm() < 1e-12);

    let mut cfg = ExperimentConfig::new(ExperimentKind::Isotropic);
    cfg.ensemble = Some(band(120, 16, 0.5));
    cfg.isotropic_points = 6;
    let out = run(&cfg, &opts(&dir.path().join("i"), 1)).unwrap();
    assert!(out.summary.metrics["max_deviation"].is_finite());

    let mut cfg = ExperimentConfig::new(ExperimentKind::Diagnostics);
    cfg.ensemble = Some(factor);
    cfg.trials = 3;
    let out = run(&cfg, &opts(&dir.path().join("d"), 1)).unwrap();
    assert!(out.summary.diagnostics.is_some());
    assert!((out.summary.metrics["mean_xx_star_trace"] - 1.0).abs() < 0.1);
    assert_eq!(out.summary.rate("hypotheses").unwrap().total, 4);
}
