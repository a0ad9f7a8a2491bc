use serde::{Deserialize, Serialize};

use super::sample::MatrixSample;
use crate::{Error, Result};

/// Fraction of truncated edges above which the truncation regime is flagged.
pub const INVALID_FRACTION: f64 = 0.1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncationInfo {
    pub a_n: f64,
    /// Cutoff on the unscaled entry magnitude, `a_n √d (log n)^{-2}`.
    pub threshold: f64,
    /// `E[|g 1{|g| ≤ threshold}|²]`, from the entry law.
    pub v_n: f64,
    pub truncated: usize,
    pub fraction: f64,
    /// More than [`INVALID_FRACTION`] of the edges were cut.
    pub invalid_regime: bool,
}

/// `a_n √d (log n)^{-2}`.
pub fn truncation_threshold(a_n: f64, n: usize, degree: usize) -> f64 {
    let log_n = (n as f64).ln();
    a_n * (degree as f64).sqrt() / (log_n * log_n)
}

/// The `a_n` whose threshold equals `n^{1/(p-2)}`, the smallest level at which
/// the lost variance is `O(1/n)` for a law with a finite p-th moment.
pub fn moment_level(n: usize, degree: usize, p: f64) -> f64 {
    let log_n = (n as f64).ln();
    (n as f64).powf(1.0 / (p - 2.0)) * log_n * log_n / (degree as f64).sqrt()
}

/// Zeroes every entry whose unscaled magnitude exceeds the threshold and
/// rescales the survivors to `(d V_n)^{-1/2} X̃`. Returns the new sample and `V_n`.
pub fn truncate(sample: &MatrixSample, a_n: f64) -> Result<(MatrixSample, f64)> {
    if !(a_n > 0.0) || !a_n.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "a_n must be positive, got {a_n}"
        )));
    }
    let n = sample.n;
    let d = sample.degree;
    let law = sample.spec.entries.law(n)?;
    let threshold = truncation_threshold(a_n, n, d);
    let v_n = law.truncated_second_moment(threshold);
    if v_n <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "threshold {threshold} removes the whole entry law"
        )));
    }
    let new_scale = (d as f64 * v_n).sqrt().recip();
    // a ratio of exactly 1 on a second pass keeps the operation idempotent
    let ratio = new_scale / sample.scale;

    let mut out = sample.clone();
    let mut truncated = 0;
    for y in 0..n {
        for x in 0..n {
            let v = sample.entries[(x, y)];
            if v.norm() / sample.scale > threshold {
                out.entries[(x, y)] = 0.0.into();
                truncated += 1;
            } else if ratio != 1.0 {
                out.entries[(x, y)] = v * ratio;
            }
        }
    }
    let fraction = truncated as f64 / (n * d) as f64;
    let invalid_regime = fraction > INVALID_FRACTION;
    if invalid_regime {
        log::warn!(
            "truncation removed {:.1}% of the edges (a_n = {a_n}); the truncation regime is not valid",
            100.0 * fraction
        );
    }
    out.scale = new_scale;
    out.truncation = Some(TruncationInfo {
        a_n,
        threshold,
        v_n,
        truncated,
        fraction,
        invalid_regime,
    });
    Ok((out, v_n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{sample_matrix, EnsembleSpec, EntryModel, Family, GraphSpec, SelfLoops};
    use crate::C64;

    fn uniform_sample() -> MatrixSample {
        let spec = EnsembleSpec::new(
            GraphSpec::circulant_band(32, 4, SelfLoops::All),
            EntryModel::new(Family::BoundedSymmetric),
        );
        sample_matrix(&spec, 9, 0).unwrap()
    }

    #[test]
    fn nothing_above_threshold_is_a_no_op() {
        let s = uniform_sample();
        let (t, v_n) = truncate(&s, 100.0).unwrap();
        assert_eq!(v_n, 1.0);
        assert!(t.entries == s.entries);
        assert_eq!(t.truncation.unwrap().truncated, 0);
    }

    #[test]
    fn single_large_entry_is_removed() {
        let mut s = uniform_sample();
        s.entries[(3, 4)] = C64::new(50.0, 0.0) * s.scale;
        let (t, _) = truncate(&s, 100.0).unwrap();
        assert_eq!(t.entries[(3, 4)], C64::new(0.0, 0.0));
        for x in 0..s.n {
            for y in 0..s.n {
                if (x, y) != (3, 4) {
                    assert_eq!(t.entries[(x, y)], s.entries[(x, y)]);
                }
            }
        }
    }

    #[test]
    fn idempotent() {
        let spec = EnsembleSpec::new(
            GraphSpec::circulant_band(64, 8, SelfLoops::All),
            EntryModel::gaussian_real(0.0),
        );
        let s = sample_matrix(&spec, 1, 0).unwrap();
        let a_n = 1.2 * (64f64.ln()).powi(2) / 17f64.sqrt();
        let (once, v1) = truncate(&s, a_n).unwrap();
        assert!(once.truncation.as_ref().unwrap().truncated > 0);
        let (twice, v2) = truncate(&once, a_n).unwrap();
        assert_eq!(v1, v2);
        assert!(once.entries == twice.entries);
    }

    #[test]
    fn tiny_level_flags_invalid_regime() {
        let (t, _) = truncate(&uniform_sample(), 0.5).unwrap();
        assert!(t.truncation.unwrap().invalid_regime);
        assert!(truncate(&uniform_sample(), 0.0).is_err());
    }
}
