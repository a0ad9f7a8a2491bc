use serde::{Deserialize, Serialize};

use super::diagnostics::diagnostics;
use super::sample::MatrixSample;
use crate::{CMat, Error, Result, C64};

pub const MIN_BATCH: usize = 100;

const WORST_LISTED: usize = 5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileDeviation {
    /// `"XX*"`, `"X*X"` or `"X^2"`.
    pub moment: String,
    pub row: usize,
    pub col: usize,
    pub value: C64,
    pub expected: C64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileReport {
    pub batch: usize,
    pub tolerance: f64,
    pub xx_star_error: f64,
    pub x_star_x_error: f64,
    pub x_squared_error: f64,
    pub x_squared_target: C64,
    pub passed: bool,
    /// Largest deviations across the three moments, worst first.
    pub worst: Vec<ProfileDeviation>,
}

/// Averages `XX*`, `X*X` and `X²` over the batch and compares them with
/// `1`, `1` and `rho_effective · 1` in the max-entry norm, using the
/// ensemble recorded in the first sample.
pub fn validate_variance_profile(samples: &[MatrixSample]) -> Result<ProfileReport> {
    let first = samples
        .first()
        .ok_or_else(|| Error::InvalidArgument("empty sample batch".into()))?;
    let target = diagnostics(&first.spec)?.rho_effective;
    let mats: Vec<&CMat> = samples.iter().map(|s| &s.entries).collect();
    validate_profile_of(&mats, first.degree, target)
}

/// Lower-level form of [`validate_variance_profile`] on raw matrices.
pub fn validate_profile_of(
    mats: &[&CMat],
    degree: usize,
    x_squared_target: C64,
) -> Result<ProfileReport> {
    let batch = mats.len();
    if batch < MIN_BATCH {
        return Err(Error::InvalidArgument(format!(
            "variance profile check needs at least {MIN_BATCH} samples, got {batch}"
        )));
    }
    let n = mats[0].nrows();
    if mats.iter().any(|m| m.nrows() != n || m.ncols() != n) {
        return Err(Error::DimensionMismatch(
            "samples of different sizes in one batch".into(),
        ));
    }
    let mut xx = CMat::zeros(n, n);
    let mut xsx = CMat::zeros(n, n);
    let mut x2 = CMat::zeros(n, n);
    for m in mats {
        xx += *m * m.adjoint();
        xsx += m.adjoint() * *m;
        x2 += *m * *m;
    }
    let inv = C64::new(batch as f64, 0.0).inv();
    let one = C64::new(1.0, 0.0);
    let zero = C64::new(0.0, 0.0);

    let mut deviations = Vec::with_capacity(3 * n * n);
    let mut errors = [0.0f64; 3];
    for (k, (name, acc, diag)) in [
        ("XX*", &xx, one),
        ("X*X", &xsx, one),
        ("X^2", &x2, x_squared_target),
    ]
    .into_iter()
    .enumerate()
    {
        for j in 0..n {
            for i in 0..n {
                let value = acc[(i, j)] * inv;
                let expected = if i == j { diag } else { zero };
                let err = (value - expected).norm();
                errors[k] = errors[k].max(err);
                deviations.push((
                    err,
                    ProfileDeviation {
                        moment: name.to_string(),
                        row: i,
                        col: j,
                        value,
                        expected,
                    },
                ));
            }
        }
    }
    deviations.sort_by(|a, b| b.0.total_cmp(&a.0));
    let worst = deviations
        .into_iter()
        .take(WORST_LISTED)
        .map(|(_, d)| d)
        .collect();

    let tolerance = 5.0 / ((batch * degree) as f64).sqrt();
    let passed = errors.iter().all(|&e| e <= tolerance);
    Ok(ProfileReport {
        batch,
        tolerance,
        xx_star_error: errors[0],
        x_star_x_error: errors[1],
        x_squared_error: errors[2],
        x_squared_target,
        passed,
        worst,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_matrices_fail_exactly() {
        let zero = CMat::zeros(6, 6);
        let batch: Vec<&CMat> = (0..100).map(|_| &zero).collect();
        let report = validate_profile_of(&batch, 3, C64::new(0.5, 0.0)).unwrap();
        assert!(!report.passed);
        assert_eq!(report.xx_star_error, 1.0);
        assert_eq!(report.x_star_x_error, 1.0);
        assert_eq!(report.x_squared_error, 0.5);
        assert_eq!(report.worst.len(), WORST_LISTED);
        assert!(report
            .worst
            .iter()
            .all(|d| d.row == d.col && d.value == C64::new(0.0, 0.0)));
    }

    #[test]
    fn small_batches_rejected() {
        let zero = CMat::zeros(2, 2);
        assert!(validate_profile_of(&[&zero], 1, C64::new(0.0, 0.0)).is_err());
    }
}
