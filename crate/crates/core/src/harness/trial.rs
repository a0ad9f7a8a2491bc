use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentKind, Prepared};
use crate::dyson::{sweep, SupportVerdict, SweepRow, DEFAULT_ETA_SCHEDULE};
use crate::ensemble::{sample_matrix, truncate, MatrixSample};
use crate::geometry::EllipticRegion;
use crate::outliers::{match_outliers, outside, OutlierReport};
use crate::products::product_trial_with_spectrum;
use crate::rng::StreamKey;
use crate::spectral::{basis_vector, eigenvalues, isotropic_deviations};
use crate::{CMat, Result, C64};

/// What a single trial measured.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TrialOutcome {
    NoOutliers {
        outside: usize,
        spectral_radius: f64,
    },
    Perturbed {
        report: OutlierReport,
    },
    Isotropic {
        /// Worst deviation per probe pair: `(e_1, e_1)`, then a random orthonormal pair.
        deviations: Vec<f64>,
        deviation: f64,
    },
    DysonSweep {
        compared: u64,
        agree: u64,
        skipped_near_boundary: u64,
    },
    Product {
        spectral_radius: f64,
        report: OutlierReport,
    },
    Diagnostics {
        /// `tr(XX*)/n`.
        xx_star_trace: f64,
        /// `tr(X²)/n`.
        x_squared_trace: C64,
        spectral_radius: f64,
    },
}

/// The persisted JSON half of a trial; exactly one of `outcome` and `error` is set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial_index: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outcome: Option<TrialOutcome>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Trial record plus the rows of its CSV file.
#[derive(Clone, Debug)]
pub struct TrialData {
    pub record: TrialRecord,
    pub spectrum: Vec<C64>,
    pub sweep: Vec<SweepRow>,
}

fn sample(p: &Prepared, trial: u64) -> Result<MatrixSample> {
    let spec = p.ensemble.as_ref().expect("validated ensemble");
    let s = sample_matrix(spec, p.config.seed, trial)?;
    match p.config.truncation {
        Some(a) => Ok(truncate(&s, a)?.0),
        None => Ok(s),
    }
}

fn radius(eigs: &[C64]) -> f64 {
    eigs.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn gaussian_vector(key: &StreamKey, id: u64, n: usize) -> CMat {
    let mut rng = key.aux(id);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    CMat::from_fn(n, 1, |_, _| {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        C64::new(re * s, im * s)
    })
}

fn inner(u: &CMat, w: &CMat) -> C64 {
    (0..u.nrows()).map(|i| u[(i, 0)].conj() * w[(i, 0)]).sum()
}

fn normalize(u: &CMat) -> CMat {
    let norm = u.norm_l2();
    CMat::from_fn(u.nrows(), 1, |i, _| u[(i, 0)] / norm)
}

/// Random orthonormal pair from the auxiliary streams of the trial.
pub fn probe_pair(seed: u64, trial: u64, n: usize) -> (CMat, CMat) {
    let key = StreamKey::new(seed, trial, 0);
    let u = normalize(&gaussian_vector(&key, 0, n));
    let w = gaussian_vector(&key, 1, n);
    let proj = inner(&u, &w);
    let w = CMat::from_fn(n, 1, |i, _| w[(i, 0)] - u[(i, 0)] * proj);
    (u, normalize(&w))
}

/// Exterior grid for the isotropic law: `m` points on the boundary of `E(ρ, 2ε)`.
pub fn isotropic_grid(region: &EllipticRegion, m: usize) -> Result<Vec<C64>> {
    region.fattened(2.0 * region.epsilon).boundary_points(m)
}

fn sweep_outcome(p: &Prepared) -> Result<(TrialOutcome, Vec<SweepRow>)> {
    let grid = p.config.grid.as_ref().expect("validated grid");
    let rho = p.region.rho;
    let side = grid.points;
    let points = grid.points();
    let rows: Vec<Vec<SweepRow>> = points
        .par_chunks(side)
        .map(|row| sweep(row, rho, &DEFAULT_ETA_SCHEDULE))
        .collect::<Result<_>>()?;
    let rows: Vec<SweepRow> = rows.into_iter().flatten().collect();
    let exact = EllipticRegion::new(rho, 0.0)?;
    let boundary = exact.boundary_points(4096)?;
    let band = p.config.tolerances.boundary_band;
    let (mut compared, mut agree, mut skipped) = (0, 0, 0);
    for r in &rows {
        let near = boundary.iter().any(|b| (r.z - b).norm() < band);
        if near {
            skipped += 1;
            continue;
        }
        compared += 1;
        let expect = if exact.contains(r.z) {
            SupportVerdict::Inside
        } else {
            SupportVerdict::Outside
        };
        if r.verdict == expect {
            agree += 1;
        }
    }
    let outcome = TrialOutcome::DysonSweep {
        compared,
        agree,
        skipped_near_boundary: skipped,
    };
    Ok((outcome, rows))
}

fn run_inner(p: &Prepared, trial: u64) -> Result<(TrialOutcome, Vec<C64>, Vec<SweepRow>)> {
    let region = p.region;
    Ok(match p.config.kind {
        ExperimentKind::NoOutliers => {
            let x = sample(p, trial)?;
            let eigs = eigenvalues(&x.entries)?.eigenvalues;
            let outcome = TrialOutcome::NoOutliers {
                outside: outside(&eigs, &region).len(),
                spectral_radius: radius(&eigs),
            };
            (outcome, eigs, Vec::new())
        }
        ExperimentKind::Perturbed => {
            let x = sample(p, trial)?;
            let c = p.perturbation.as_ref().expect("validated perturbation");
            let eigs = eigenvalues(&c.perturb(&x.entries)?)?.eigenvalues;
            let observed = outside(&eigs, &region.fattened(2.0 * region.epsilon));
            let report = match_outliers(&observed, &p.predictions, p.match_cap);
            (TrialOutcome::Perturbed { report }, eigs, Vec::new())
        }
        ExperimentKind::Isotropic => {
            let x = sample(p, trial)?;
            let grid = isotropic_grid(&region, p.config.isotropic_points)?;
            let e1 = basis_vector(p.n, 0);
            let (u, w) = probe_pair(p.config.seed, trial, p.n);
            // the grid sits on E(ρ, 2ε), strictly outside E(ρ, ε)
            let deviations =
                isotropic_deviations(&x.entries, &region, &grid, &[(&e1, &e1), (&u, &w)])?;
            let deviation = deviations.iter().copied().fold(0.0, f64::max);
            (
                TrialOutcome::Isotropic {
                    deviations,
                    deviation,
                },
                Vec::new(),
                Vec::new(),
            )
        }
        ExperimentKind::DysonSweep => {
            let (outcome, rows) = sweep_outcome(p)?;
            (outcome, Vec::new(), rows)
        }
        ExperimentKind::Product => {
            let spec = p.product.as_ref().expect("validated product");
            let (t, eigs) = product_trial_with_spectrum(spec, p.config.seed, trial, p.match_cap)?;
            let outcome = TrialOutcome::Product {
                spectral_radius: t.spectral_radius,
                report: t.report,
            };
            (outcome, eigs, Vec::new())
        }
        ExperimentKind::Diagnostics => {
            let x = sample(p, trial)?;
            let m = &x.entries;
            let n = m.nrows();
            let xx_star_trace = m.norm_l2().powi(2) / n as f64;
            let sq = m * m;
            let x_squared_trace = (0..n).map(|i| sq[(i, i)]).sum::<C64>() / n as f64;
            let eigs = eigenvalues(m)?.eigenvalues;
            let outcome = TrialOutcome::Diagnostics {
                xx_star_trace,
                x_squared_trace,
                spectral_radius: radius(&eigs),
            };
            (outcome, eigs, Vec::new())
        }
    })
}

/// Runs one trial; numerical failures end up in the record instead of aborting.
pub fn run_trial(p: &Prepared, trial: u64) -> TrialData {
    match run_inner(p, trial) {
        Ok((outcome, spectrum, sweep)) => TrialData {
            record: TrialRecord {
                trial_index: trial,
                outcome: Some(outcome),
                error: None,
            },
            spectrum,
            sweep,
        },
        Err(e) => {
            log::warn!("trial {trial} failed: {e}");
            TrialData {
                record: TrialRecord {
                    trial_index: trial,
                    outcome: None,
                    error: Some(e.to_string()),
                },
                spectrum: Vec::new(),
                sweep: Vec::new(),
            }
        }
    }
}
