//! Hermitization, eigenvalues, smallest singular values and resolvent
//! bilinear forms, on top of the dense LU/SVD/eigen routines of `faer`.

use std::io::Write;

use faer::linalg::solvers::PartialPivLu;
use faer::prelude::*;
use faer::{Mat, Side};
use serde::{Deserialize, Serialize};

use crate::dyson::limit_b;
use crate::geometry::EllipticRegion;
use crate::{CMat, Error, Result, C64};

/// Relative tolerance used for the trace check on every spectrum.
pub const BACKEND_REL_TOL: f64 = 1e-10;

/// Largest size handled by a full singular value decomposition in [`sigma_min`].
pub const SVD_CUTOFF: usize = 512;

/// Smallest singular value accepted by [`Resolvent`] solves.
pub const SINGULAR_FLOOR: f64 = 1e-10;

/// Maximal relative residual of a resolvent solve.
pub const SOLVE_RESIDUAL: f64 = 1e-10;

const LANCZOS_MAX_STEPS: usize = 300;
const LANCZOS_TOL: f64 = 1e-13;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub n: usize,
    pub eigenvalues: Vec<C64>,
    /// Bound used for the trace check, `BACKEND_REL_TOL · n · (‖M‖_F + 1)`.
    pub backend_tolerance: f64,
}

/// `[[-vI, X - zI], [X* - z̄I, -vI]]`.
pub fn hermitize(x: &CMat, z: C64, v: C64) -> CMat {
    let n = x.nrows();
    CMat::from_fn(2 * n, 2 * n, |i, j| match (i < n, j < n) {
        (true, true) | (false, false) => {
            if i == j {
                -v
            } else {
                C64::new(0.0, 0.0)
            }
        }
        (true, false) => {
            let (r, c) = (i, j - n);
            x[(r, c)] - if r == c { z } else { C64::new(0.0, 0.0) }
        }
        (false, true) => {
            let (r, c) = (i - n, j);
            x[(c, r)].conj() - if r == c { z.conj() } else { C64::new(0.0, 0.0) }
        }
    })
}

fn check_finite(m: &CMat) -> Result<()> {
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let v = m[(i, j)];
            if !v.re.is_finite() || !v.im.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "non-finite matrix entry at ({i}, {j})"
                )));
            }
        }
    }
    Ok(())
}

pub fn eigenvalues(m: &CMat) -> Result<Spectrum> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} matrix is not square",
            n,
            m.ncols()
        )));
    }
    check_finite(m)?;
    let frobenius = m.norm_l2();
    let eig_err = |reason: String| Error::Eigen {
        n,
        frobenius,
        reason,
    };
    let eigenvalues = m.eigenvalues().map_err(|e| eig_err(format!("{e:?}")))?;
    if eigenvalues.len() != n {
        return Err(eig_err(format!(
            "backend returned {} eigenvalues",
            eigenvalues.len()
        )));
    }
    let backend_tolerance = BACKEND_REL_TOL * n as f64 * (frobenius + 1.0);
    let trace: C64 = (0..n).map(|i| m[(i, i)]).sum();
    let sum: C64 = eigenvalues.iter().sum();
    if !((sum - trace).norm() <= backend_tolerance) {
        return Err(eig_err(format!(
            "eigenvalue sum {sum} differs from the trace {trace} by more than {backend_tolerance:e}"
        )));
    }
    Ok(Spectrum {
        n,
        eigenvalues,
        backend_tolerance,
    })
}

fn shifted(x: &CMat, z: C64) -> CMat {
    let mut a = x.clone();
    for i in 0..a.nrows() {
        a[(i, i)] -= z;
    }
    a
}

/// Smallest singular value of `X - zI`.
pub fn sigma_min(x: &CMat, z: C64) -> Result<f64> {
    let n = x.nrows();
    if n == 0 {
        return Err(Error::InvalidArgument("empty matrix".into()));
    }
    check_finite(x)?;
    let a = shifted(x, z);
    if n <= SVD_CUTOFF {
        return svd_sigma_min(&a);
    }
    let lu = a.partial_piv_lu();
    match lanczos_sigma_min(&lu, n) {
        Some(s) => Ok(s),
        None => {
            log::debug!("Lanczos did not settle for n = {n}; falling back to a full SVD");
            svd_sigma_min(&a)
        }
    }
}

fn svd_sigma_min(a: &CMat) -> Result<f64> {
    let sv = a.singular_values().map_err(|e| Error::Eigen {
        n: a.nrows(),
        frobenius: a.norm_l2(),
        reason: format!("{e:?}"),
    })?;
    Ok(sv.into_iter().fold(f64::INFINITY, f64::min))
}

fn vec_norm(v: &CMat) -> f64 {
    v.norm_l2()
}

fn dot(u: &CMat, w: &CMat) -> C64 {
    (0..u.nrows()).map(|i| u[(i, 0)].conj() * w[(i, 0)]).sum()
}

/// Largest eigenvalue of `A^{-*} A^{-1}` by Lanczos with full
/// reorthogonalization; `None` if the Ritz residual never drops below tolerance.
fn lanczos_sigma_min(lu: &PartialPivLu<C64>, n: usize) -> Option<f64> {
    let mut q = CMat::from_fn(n, 1, |i, _| {
        C64::new(1.0 + 0.25 * (i as f64 * 0.7).sin(), 0.0)
    });
    let q_norm = vec_norm(&q);
    q *= faer::Scale(C64::new(q_norm.recip(), 0.0));
    let mut basis: Vec<CMat> = vec![q];
    let (mut alpha, mut beta) = (Vec::<f64>::new(), Vec::<f64>::new());
    let steps = LANCZOS_MAX_STEPS.min(n);
    for k in 0..steps {
        let qk = &basis[k];
        let y = lu.solve(qk);
        let mut w = lu.solve_adjoint(&y);
        let a = dot(qk, &w).re;
        alpha.push(a);
        // full reorthogonalization, applied twice
        for _ in 0..2 {
            for b in &basis {
                let c = dot(b, &w);
                w -= b * faer::Scale(c);
            }
        }
        let b_next = vec_norm(&w);

        let m = alpha.len();
        let t = Mat::<f64>::from_fn(m, m, |i, j| {
            if i == j {
                alpha[i]
            } else if i + 1 == j {
                beta[i]
            } else if j + 1 == i {
                beta[j]
            } else {
                0.0
            }
        });
        let evd = t.self_adjoint_eigen(Side::Lower).ok()?;
        let theta = evd.S().column_vector()[m - 1];
        let last = evd.U()[(m - 1, m - 1)].abs();
        if !theta.is_finite() || theta <= 0.0 {
            return None;
        }
        if b_next * last <= LANCZOS_TOL * theta || b_next <= LANCZOS_TOL * theta || k + 1 == n {
            return Some(theta.sqrt().recip());
        }
        beta.push(b_next);
        basis.push(w * faer::Scale(C64::new(b_next.recip(), 0.0)));
    }
    None
}

/// Factorization of `X - zI`, reused across bilinear forms at the same `z`.
pub struct Resolvent<'a> {
    x: &'a CMat,
    z: C64,
    a: CMat,
    lu: PartialPivLu<C64>,
}

impl<'a> Resolvent<'a> {
    pub fn new(x: &'a CMat, z: C64) -> Result<Self> {
        if x.nrows() != x.ncols() {
            return Err(Error::DimensionMismatch(
                "resolvent of a non-square matrix".into(),
            ));
        }
        check_finite(x)?;
        let a = shifted(x, z);
        let lu = a.partial_piv_lu();
        Ok(Self { x, z, a, lu })
    }

    pub fn z(&self) -> C64 {
        self.z
    }

    fn near_singular(&self) -> Error {
        let s = sigma_min(self.x, self.z).unwrap_or(0.0);
        Error::NearSingular {
            z: self.z,
            sigma_min: s,
        }
    }

    /// `(X - zI)^{-1} rhs`, with a residual check on every column.
    pub fn solve(&self, rhs: &CMat) -> Result<CMat> {
        if rhs.nrows() != self.a.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "right-hand side has {} rows, matrix has {}",
                rhs.nrows(),
                self.a.nrows()
            )));
        }
        let y = self.lu.solve(rhs);
        let residual = &self.a * &y - rhs;
        for j in 0..rhs.ncols() {
            let r = residual.col(j).norm_l2();
            let b = rhs.col(j).norm_l2();
            let sol = y.col(j).norm_l2();
            if !sol.is_finite() || sol > b / SINGULAR_FLOOR {
                return Err(self.near_singular());
            }
            if r > SOLVE_RESIDUAL * b.max(f64::MIN_POSITIVE) {
                return Err(self.near_singular());
            }
        }
        Ok(y)
    }

    /// `⟨u, (X - zI)^{-1} w⟩ = u* (X - zI)^{-1} w`.
    pub fn bilinear(&self, u: &CMat, w: &CMat) -> Result<C64> {
        if u.nrows() != w.nrows() {
            return Err(Error::DimensionMismatch("u and w differ in length".into()));
        }
        let y = self.solve(w)?;
        Ok(dot(u, &y))
    }
}

/// `⟨u, (X - zI)^{-1} w⟩` by one LU solve.
pub fn resolvent_bilinear(x: &CMat, z: C64, u: &CMat, w: &CMat) -> Result<C64> {
    Resolvent::new(x, z)?.bilinear(u, w)
}

/// Largest `|⟨u, (X - z)^{-1} w⟩ - b̄(z)⟨u, w⟩|` over the grid, where `b̄` is
/// the exterior closed form for the ρ of `region`.
pub fn isotropic_deviation(
    x: &CMat,
    region: &EllipticRegion,
    z_grid: &[C64],
    u: &CMat,
    w: &CMat,
) -> Result<f64> {
    Ok(isotropic_deviations(x, region, z_grid, &[(u, w)])?[0])
}

/// [`isotropic_deviation`] for several probe pairs, sharing one factorization per grid point.
pub fn isotropic_deviations(
    x: &CMat,
    region: &EllipticRegion,
    z_grid: &[C64],
    pairs: &[(&CMat, &CMat)],
) -> Result<Vec<f64>> {
    if let Some(&z) = z_grid.iter().find(|&&z| region.contains(z)) {
        return Err(Error::InsideRegion { z });
    }
    let mut worst = vec![0.0f64; pairs.len()];
    for &z in z_grid {
        let b = limit_b(z, region.rho)?;
        let r = Resolvent::new(x, z)?;
        for (k, (u, w)) in pairs.iter().enumerate() {
            let observed = r.bilinear(u, w)?;
            worst[k] = worst[k].max((observed - b * dot(u, w)).norm());
        }
    }
    Ok(worst)
}

/// Unit basis vector `e_k` as a column.
pub fn basis_vector(n: usize, k: usize) -> CMat {
    CMat::from_fn(n, 1, |i, _| C64::new(f64::from(u8::from(i == k)), 0.0))
}

/// Writes `trial,re,im` rows for a set of spectra.
pub fn write_spectra_csv<W: Write>(
    mut out: W,
    spectra: &[(u64, &Spectrum)],
) -> std::io::Result<()> {
    writeln!(out, "trial,re,im")?;
    for (trial, s) in spectra {
        for l in &s.eigenvalues {
            writeln!(out, "{trial},{},{}", l.re, l.im)?;
        }
    }
    Ok(())
}
