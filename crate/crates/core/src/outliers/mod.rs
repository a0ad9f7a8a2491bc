//! Outliers of `X + C` for a finite-rank `C = A B`.
//!
//! `z` outside the spectrum of `X` is an eigenvalue of `X + C` iff
//! `f(z) = det(1 + B (X - z)^{-1} A) = 0`. Replacing the resolvent by its
//! exterior limit `b̄(z)` gives `g(z) = det(1 + b̄(z) B A)`, whose roots are
//! `λ + ρ/λ` for the eigenvalues `|λ| > 1` of `C`.

mod matching;
mod perturbation;
mod roots;

pub use matching::{
    default_match_cap, match_outliers, write_report_csv_row, Match, OutlierReport,
    REPORT_CSV_HEADER,
};
pub use perturbation::{
    predict, OutlierPrediction, Perturbation, PerturbationSpec, DEFAULT_RANK_CAP,
    RANK_REL_THRESHOLD,
};
pub use roots::{
    find_roots, newton, polygon_winding, scan_roots, winding_number, RootCluster, CONTOUR_POINTS,
    ROOT_TOL,
};

use crate::dyson::limit_b;
use crate::geometry::EllipticRegion;
use crate::spectral::{eigenvalues, Resolvent};
use crate::{CMat, Error, Result, C64};

fn det(m: &CMat) -> C64 {
    if m.nrows() == 0 {
        C64::new(1.0, 0.0)
    } else {
        m.determinant()
    }
}

fn check_dims(x: &CMat, p: &Perturbation) -> Result<()> {
    if x.nrows() != p.n || x.ncols() != p.n {
        return Err(Error::DimensionMismatch(format!(
            "matrix is {}x{}, perturbation acts on dimension {}",
            x.nrows(),
            x.ncols(),
            p.n
        )));
    }
    Ok(())
}

/// `det(1_k + B (X - z)^{-1} A)` from `k` linear solves.
pub fn det_f(z: C64, x: &CMat, p: &Perturbation) -> Result<C64> {
    check_dims(x, p)?;
    if p.rank_k == 0 {
        return Ok(C64::new(1.0, 0.0));
    }
    let y = Resolvent::new(x, z)?.solve(&p.a_factor)?;
    let m = CMat::identity(p.rank_k, p.rank_k) + &p.b_factor * y;
    Ok(det(&m))
}

/// `det(1_n + (X - z)^{-1} A B)`, the `n × n` side of `det(1 + AB) = det(1 + BA)`.
pub fn det_f_full(z: C64, x: &CMat, p: &Perturbation) -> Result<C64> {
    check_dims(x, p)?;
    let y = Resolvent::new(x, z)?.solve(&p.matrix())?;
    Ok(det(&(CMat::identity(p.n, p.n) + y)))
}

/// `det(1_k + b̄(z) B A)`, defined outside `E(ρ)`.
pub fn det_g(z: C64, p: &Perturbation, rho: C64) -> Result<C64> {
    let m = limit_b(z, rho)?;
    let k = p.rank_k;
    Ok(det(
        &(CMat::identity(k, k) + p.compression() * faer::Scale(m))
    ))
}

/// Eigenvalues outside `region`.
pub fn outside(eigs: &[C64], region: &EllipticRegion) -> Vec<C64> {
    eigs.iter()
        .copied()
        .filter(|&z| !region.contains(z))
        .collect()
}

/// Eigenvalues of `X + C` outside `E(ρ, 2ε)` matched against the admissible
/// predictions `λ + ρ/λ`.
pub fn outlier_report(
    x: &CMat,
    p: &Perturbation,
    rho: C64,
    epsilon: f64,
    cap: f64,
) -> Result<OutlierReport> {
    let predictions: Vec<C64> = predict(p, rho, epsilon)?
        .into_iter()
        .filter(|q| q.admissible)
        .filter_map(|q| q.predicted)
        .collect();
    let spectrum = eigenvalues(&p.perturb(x)?)?;
    let region = EllipticRegion::new(rho, 2.0 * epsilon)?;
    let observed = outside(&spectrum.eigenvalues, &region);
    Ok(match_outliers(&observed, &predictions, cap))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::basis_vector;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn zero_matrix_rank_one() {
        let n = 5;
        let x = CMat::zeros(n, n);
        let p = Perturbation::rank_one(c(2.0, 0.0), &basis_vector(n, 0)).unwrap();
        for z in [c(3.0, 0.0), c(1.0, 1.0), c(-0.5, 2.0)] {
            let f = det_f(z, &x, &p).unwrap();
            assert!((f - (1.0 - 2.0 / z)).norm() < 1e-14);
            assert!((det_f_full(z, &x, &p).unwrap() - f).norm() < 1e-12);
        }
        assert!(det_f(c(2.0, 0.0), &x, &p).unwrap().norm() < 1e-15);
    }

    #[test]
    fn g_examples() {
        let p = Perturbation::rank_one(c(2.0, 0.0), &basis_vector(4, 0)).unwrap();
        assert!((det_g(c(3.0, 0.0), &p, c(0.0, 0.0)).unwrap() - 1.0 / 3.0).norm() < 1e-15);
        assert!(det_g(c(2.0, 0.0), &p, c(0.0, 0.0)).unwrap().norm() < 1e-15);
        assert!(det_g(c(2.25, 0.0), &p, c(0.5, 0.0)).unwrap().norm() < 1e-14);
        assert!(det_g(c(0.5, 0.0), &p, c(0.0, 0.0)).is_err());
    }

    #[test]
    fn report_for_zero_matrix() {
        let n = 6;
        let x = CMat::zeros(n, n);
        let p = Perturbation::diagonal(n, &[c(2.0, 0.0)]).unwrap();
        let r = outlier_report(&x, &p, c(0.0, 0.0), 0.1, 0.1).unwrap();
        assert_eq!(r.matches.len(), 1);
        assert!(r.matches[0].distance < 1e-12);
    }
}
