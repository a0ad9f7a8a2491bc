use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::config::{ExperimentKind, Prepared};
use super::trial::{TrialOutcome, TrialRecord};
use crate::ensemble::{diagnostics, ModelDiagnostics};
use crate::C64;

/// Two-sided 95% normal quantile.
const Z95: f64 = 1.959_963_984_540_054;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rate {
    pub successes: u64,
    pub total: u64,
    pub estimate: f64,
    pub wilson_low: f64,
    pub wilson_high: f64,
}

impl Rate {
    pub fn new(successes: u64, total: u64) -> Self {
        let (low, high) = wilson_interval(successes, total);
        Self {
            successes,
            total,
            estimate: if total == 0 {
                0.0
            } else {
                successes as f64 / total as f64
            },
            wilson_low: low,
            wilson_high: high,
        }
    }
}

/// Wilson score interval at 95%; `(0, 1)` for an empty sample.
pub fn wilson_interval(successes: u64, total: u64) -> (f64, f64) {
    if total == 0 {
        return (0.0, 1.0);
    }
    let n = total as f64;
    let p = successes as f64 / n;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = Z95 / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    // the endpoints are exactly 0 and 1 at the extremes; rounding would miss them
    let low = if successes == 0 {
        0.0
    } else {
        (center - half).max(0.0)
    };
    let high = if successes == total {
        1.0
    } else {
        (center + half).min(1.0)
    };
    (low, high)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialFailure {
    pub trial_index: u64,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssertionOutcome {
    pub metric: String,
    pub min_rate: f64,
    /// `None` when the experiment does not report the metric.
    pub observed: Option<f64>,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub kind: ExperimentKind,
    pub n: usize,
    pub seed: u64,
    pub trials: u64,
    pub completed: u64,
    pub rho: C64,
    pub epsilon: f64,
    pub match_cap: f64,
    pub predictions: Vec<C64>,
    pub failures: Vec<TrialFailure>,
    pub rates: BTreeMap<String, Rate>,
    pub metrics: BTreeMap<String, f64>,
    /// Per trial, for `no-outliers`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outliers_outside_region: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<ModelDiagnostics>,
    pub acceptance: Vec<AssertionOutcome>,
    /// All assertions hold (no failed trials when there are none).
    pub passed: bool,
}

impl ExperimentSummary {
    pub fn rate(&self, metric: &str) -> Option<&Rate> {
        self.rates.get(metric)
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}

#[derive(Default)]
struct Acc {
    rates: BTreeMap<String, (u64, u64)>,
    max: BTreeMap<String, f64>,
    sums: BTreeMap<String, (f64, u64)>,
}

impl Acc {
    fn hit(&mut self, name: &str, ok: bool) {
        self.add(name, u64::from(ok), 1);
    }

    fn add(&mut self, name: &str, successes: u64, total: u64) {
        let e = self.rates.entry(name.to_string()).or_default();
        e.0 += successes;
        e.1 += total;
    }

    fn max(&mut self, name: &str, v: f64) {
        let e = self.max.entry(name.to_string()).or_insert(v);
        *e = e.max(v);
    }

    fn mean(&mut self, name: &str, v: f64) {
        let e = self.sums.entry(name.to_string()).or_default();
        e.0 += v;
        e.1 += 1;
    }

    fn report(&mut self, r: &crate::outliers::OutlierReport) {
        self.hit("exact_match", r.exact());
        self.hit("counts_agree", r.counts_agree);
        for m in &r.matches {
            self.mean("mean_match_distance", m.distance);
            self.max("max_match_distance", m.distance);
        }
    }
}

/// Folds the trial records, taken in index order, into a summary.
pub fn summarize(p: &Prepared, records: &[TrialRecord]) -> ExperimentSummary {
    let cfg = &p.config;
    let mut acc = Acc::default();
    let mut failures = Vec::new();
    let mut outside_counts = Vec::new();
    let mut completed = 0;
    for r in records {
        let Some(outcome) = &r.outcome else {
            failures.push(TrialFailure {
                trial_index: r.trial_index,
                error: r.error.clone().unwrap_or_default(),
            });
            continue;
        };
        completed += 1;
        match outcome {
            TrialOutcome::NoOutliers {
                outside,
                spectral_radius,
            } => {
                outside_counts.push(*outside);
                acc.hit("no_outliers", *outside == 0);
                acc.max("max_spectral_radius", *spectral_radius);
            }
            TrialOutcome::Perturbed { report } => acc.report(report),
            TrialOutcome::Isotropic { deviation, .. } => {
                acc.hit("isotropic", *deviation <= cfg.tolerances.isotropic);
                acc.max("max_deviation", *deviation);
                acc.mean("mean_deviation", *deviation);
            }
            TrialOutcome::DysonSweep {
                compared, agree, ..
            } => acc.add("support_agreement", *agree, *compared),
            TrialOutcome::Product {
                spectral_radius,
                report,
            } => {
                acc.hit(
                    "spectral_radius",
                    *spectral_radius <= cfg.tolerances.spectral_radius,
                );
                acc.max("max_spectral_radius", *spectral_radius);
                acc.report(report);
            }
            TrialOutcome::Diagnostics {
                xx_star_trace,
                x_squared_trace,
                spectral_radius,
            } => {
                acc.mean("mean_xx_star_trace", *xx_star_trace);
                acc.mean("mean_x_squared_trace_re", x_squared_trace.re);
                acc.mean("mean_x_squared_trace_im", x_squared_trace.im);
                acc.max("max_spectral_radius", *spectral_radius);
            }
        }
    }
    let model = match (cfg.kind, &p.ensemble) {
        (ExperimentKind::Diagnostics, Some(e)) => diagnostics(e).ok(),
        _ => None,
    };
    if let Some(d) = &model {
        let c = &d.checks;
        let passed = [c.v_tilde, c.sigma_star, c.r_bar, c.d_offset]
            .iter()
            .filter(|&&b| b)
            .count();
        acc.add("hypotheses", passed as u64, 4);
    }

    let rates: BTreeMap<String, Rate> = acc
        .rates
        .iter()
        .map(|(k, &(s, t))| (k.clone(), Rate::new(s, t)))
        .collect();
    let mut metrics = acc.max.clone();
    for (k, (sum, count)) in &acc.sums {
        metrics.insert(k.clone(), sum / *count as f64);
    }

    let acceptance: Vec<AssertionOutcome> = cfg
        .acceptance
        .iter()
        .map(|a| {
            let observed = rates.get(&a.metric).map(|r| r.estimate);
            AssertionOutcome {
                metric: a.metric.clone(),
                min_rate: a.min_rate,
                observed,
                passed: observed.is_some_and(|v| v >= a.min_rate),
            }
        })
        .collect();
    let passed = if acceptance.is_empty() {
        failures.is_empty()
    } else {
        acceptance.iter().all(|a| a.passed)
    };

    ExperimentSummary {
        kind: cfg.kind,
        n: p.n,
        seed: cfg.seed,
        trials: cfg.trial_count(),
        completed,
        rho: p.region.rho,
        epsilon: p.region.epsilon,
        match_cap: p.match_cap,
        predictions: p.predictions.clone(),
        failures,
        rates,
        metrics,
        outliers_outside_region: (cfg.kind == ExperimentKind::NoOutliers).then_some(outside_counts),
        diagnostics: model,
        acceptance,
        passed,
    }
}
