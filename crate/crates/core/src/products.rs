//! Products of independent sparse elliptic factors.
//!
//! With `Y_k = d_k^{-1/2} X^k` the block-cyclic matrix `𝒳` carrying `Y_k` in
//! block `(k, k+1 mod m)` satisfies: `𝒳^m` is block diagonal with the cyclic
//! products `Y_k Y_{k+1} ⋯ Y_{k-1}` on the diagonal. Each has the spectrum of
//! `Y_1 ⋯ Y_m`, so `λ^m` runs over that spectrum as `λ` runs over eig(`𝒳`).

use serde::{Deserialize, Serialize};

use crate::ensemble::{sample_factor, EnsembleSpec, MatrixSample};
use crate::outliers::{match_outliers, OutlierReport, PerturbationSpec};
use crate::spectral::eigenvalues;
use crate::{CMat, Error, Result, C64};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProductSpec {
    pub factors: Vec<EnsembleSpec>,
    /// One perturbation per factor; absent means all zero.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbations: Option<Vec<PerturbationSpec>>,
    pub epsilon: f64,
}

impl ProductSpec {
    pub fn m(&self) -> usize {
        self.factors.len()
    }

    /// Common dimension of the factors.
    pub fn validate(&self) -> Result<usize> {
        let m = self.m();
        if m < 2 {
            return Err(Error::InvalidConfig(format!(
                "a product needs at least 2 factors, got {m}"
            )));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidConfig("epsilon must be positive".into()));
        }
        let n = self.factors[0].graph.n;
        for f in &self.factors {
            f.validate()?;
            if f.graph.n != n {
                return Err(Error::DimensionMismatch(format!(
                    "factor dimensions differ: {} and {n}",
                    f.graph.n
                )));
            }
        }
        if let Some(p) = &self.perturbations {
            if p.len() != m {
                return Err(Error::DimensionMismatch(format!(
                    "{} perturbations for {m} factors",
                    p.len()
                )));
            }
        }
        Ok(n)
    }

    /// Dense `A^1, …, A^m` (zeros when no perturbations are given).
    pub fn perturbation_matrices(&self) -> Result<Vec<CMat>> {
        let n = self.validate()?;
        match &self.perturbations {
            None => Ok(vec![CMat::zeros(n, n); self.m()]),
            Some(ps) => ps.iter().map(|p| Ok(p.build(n)?.matrix())).collect(),
        }
    }

    /// Eigenvalues of `A^1 ⋯ A^m`, after checking that none lies in the
    /// annulus `1 + ε ≤ |z| ≤ 1 + 3ε`.
    pub fn product_perturbation_eigenvalues(&self) -> Result<Vec<C64>> {
        let a = product(&self.perturbation_matrices()?);
        let eigs = eigenvalues(&a)?.eigenvalues;
        let (lo, hi) = (1.0 + self.epsilon, 1.0 + 3.0 * self.epsilon);
        if let Some(bad) = eigs.iter().find(|l| (lo..=hi).contains(&l.norm())) {
            return Err(Error::InvalidConfig(format!(
                "eigenvalue {bad} of the perturbation product lies in the annulus [{lo}, {hi}]"
            )));
        }
        Ok(eigs)
    }
}

fn product(ms: &[CMat]) -> CMat {
    let mut out = ms[0].clone();
    for m in &ms[1..] {
        out = &out * m;
    }
    out
}

fn check_square(ms: &[&CMat]) -> Result<usize> {
    let n = ms.first().map_or(0, |m| m.nrows());
    if ms.iter().any(|m| m.nrows() != n || m.ncols() != n) {
        return Err(Error::DimensionMismatch(
            "all blocks must be square of one size".into(),
        ));
    }
    Ok(n)
}

fn block_cyclic(blocks: &[&CMat], n: usize) -> CMat {
    let m = blocks.len();
    let mut out = CMat::zeros(m * n, m * n);
    for (k, b) in blocks.iter().enumerate() {
        let col = ((k + 1) % m) * n;
        out.as_mut()
            .submatrix_mut(k * n, col, n, n)
            .copy_from(b.as_ref());
    }
    out
}

/// Block-cyclic `(𝒳, 𝒜)` from already scaled factors and the perturbations.
pub fn linearize(factors: &[&CMat], perturbations: &[&CMat]) -> Result<(CMat, CMat)> {
    if factors.len() < 2 {
        return Err(Error::InvalidArgument("linearization needs m >= 2".into()));
    }
    if perturbations.len() != factors.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} perturbations for {} factors",
            perturbations.len(),
            factors.len()
        )));
    }
    let n = check_square(factors)?;
    if check_square(perturbations)? != n {
        return Err(Error::DimensionMismatch(
            "perturbation size differs from factor size".into(),
        ));
    }
    Ok((block_cyclic(factors, n), block_cyclic(perturbations, n)))
}

#[derive(Clone, Debug)]
pub struct ProductSample {
    pub factors: Vec<MatrixSample>,
    pub perturbations: Vec<CMat>,
    /// `Y_1 ⋯ Y_m`.
    pub d: CMat,
    /// `(Y_1 + A^1) ⋯ (Y_m + A^m)`.
    pub d1: CMat,
    /// `A^1 ⋯ A^m`.
    pub a_product: CMat,
}

impl ProductSample {
    pub fn linearization(&self) -> Result<(CMat, CMat)> {
        let xs: Vec<&CMat> = self.factors.iter().map(|f| &f.entries).collect();
        let as_: Vec<&CMat> = self.perturbations.iter().collect();
        linearize(&xs, &as_)
    }
}

/// Factor `k` comes from stream `(seed, trial, k)`.
pub fn sample_product(spec: &ProductSpec, seed: u64, trial: u64) -> Result<ProductSample> {
    spec.validate()?;
    let perturbations = spec.perturbation_matrices()?;
    let factors = spec
        .factors
        .iter()
        .enumerate()
        .map(|(k, f)| sample_factor(f, seed, trial, k as u64))
        .collect::<Result<Vec<_>>>()?;
    let d = product(
        &factors
            .iter()
            .map(|f| f.entries.clone())
            .collect::<Vec<_>>(),
    );
    let shifted: Vec<CMat> = factors
        .iter()
        .zip(&perturbations)
        .map(|(f, a)| &f.entries + a)
        .collect();
    let d1 = product(&shifted);
    let a_product = product(&perturbations);
    Ok(ProductSample {
        factors,
        perturbations,
        d,
        d1,
        a_product,
    })
}

pub fn spectral_radius(eigs: &[C64]) -> f64 {
    eigs.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Largest distance from `λ^m` to the nearest eigenvalue of `D¹`, over the
/// eigenvalues `λ` of `𝒳 + 𝒜`.
pub fn linearization_defect(sample: &ProductSample) -> Result<f64> {
    let (x, a) = sample.linearization()?;
    let m = sample.factors.len() as i32;
    let lin = eigenvalues(&(x + a))?.eigenvalues;
    let target = eigenvalues(&sample.d1)?.eigenvalues;
    Ok(lin
        .iter()
        .map(|l| {
            let p = l.powi(m);
            target
                .iter()
                .map(|t| (p - t).norm())
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProductTrial {
    pub trial_index: u64,
    /// Spectral radius of the unperturbed product.
    pub spectral_radius: f64,
    pub report: OutlierReport,
}

/// Eigenvalues of `D¹` outside `(1 + 2ε)𝔻` matched against the eigenvalues of
/// `A^1 ⋯ A^m` outside `(1 + 3ε)𝔻`.
pub fn product_trial(spec: &ProductSpec, seed: u64, trial: u64, cap: f64) -> Result<ProductTrial> {
    Ok(product_trial_with_spectrum(spec, seed, trial, cap)?.0)
}

/// [`product_trial`] together with the full spectrum of `D¹`.
pub fn product_trial_with_spectrum(
    spec: &ProductSpec,
    seed: u64,
    trial: u64,
    cap: f64,
) -> Result<(ProductTrial, Vec<C64>)> {
    let eps = spec.epsilon;
    let predictions: Vec<C64> = spec
        .product_perturbation_eigenvalues()?
        .into_iter()
        .filter(|l| l.norm() > 1.0 + 3.0 * eps)
        .collect();
    let sample = sample_product(spec, seed, trial)?;
    let radius = spectral_radius(&eigenvalues(&sample.d)?.eigenvalues);
    let spectrum = eigenvalues(&sample.d1)?.eigenvalues;
    let observed: Vec<C64> = spectrum
        .iter()
        .copied()
        .filter(|z| z.norm() > 1.0 + 2.0 * eps)
        .collect();
    let t = ProductTrial {
        trial_index: trial,
        spectral_radius: radius,
        report: match_outliers(&observed, &predictions, cap),
    };
    Ok((t, spectrum))
}

/// Runs trials `0..trials` sequentially.
pub fn product_outlier_experiment(
    spec: &ProductSpec,
    seed: u64,
    trials: u64,
    cap: f64,
) -> Result<Vec<ProductTrial>> {
    spec.product_perturbation_eigenvalues()?;
    (0..trials)
        .map(|t| product_trial(spec, seed, t, cap))
        .collect()
}

/// Splits eigenvalues outside `radius` into groups related by `m`-th roots
/// of unity and reports the worst angular mismatch, in radians.
pub fn orbit_defect(eigs: &[C64], m: usize, radius: f64) -> f64 {
    let outer: Vec<C64> = eigs.iter().copied().filter(|z| z.norm() > radius).collect();
    let zeta = C64::from_polar(1.0, 2.0 * std::f64::consts::PI / m as f64);
    outer
        .iter()
        .map(|z| {
            let rotated = z * zeta;
            outer
                .iter()
                .map(|w| {
                    let d = (rotated.arg() - w.arg()).rem_euclid(2.0 * std::f64::consts::PI);
                    d.min(2.0 * std::f64::consts::PI - d) + (rotated.norm() - w.norm()).abs()
                })
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
}
