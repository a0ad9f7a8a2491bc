use serde::{Deserialize, Serialize};

use crate::geometry::EllipticRegion;
use crate::{CMat, Error, Result, C64};

pub const DEFAULT_RANK_CAP: usize = 16;

/// Singular values below this multiple of `‖C‖` count as zero.
pub const RANK_REL_THRESHOLD: f64 = 1e-10;

/// A finite-rank matrix `C = A B` kept in factored form.
#[derive(Clone, Debug)]
pub struct Perturbation {
    pub n: usize,
    /// `n × k`.
    pub a_factor: CMat,
    /// `k × n`.
    pub b_factor: CMat,
    /// Eigenvalues of the `k × k` compression `B A`; the nonzero ones are those of `C`.
    pub eigenvalues_c: Vec<C64>,
    pub rank_k: usize,
}

impl Perturbation {
    /// Balanced thin factorization from the SVD: `A = U √Σ`, `B = √Σ V*`.
    pub fn factor(c: &CMat) -> Result<Self> {
        Self::factor_with(c, DEFAULT_RANK_CAP, None)
    }

    pub fn factor_with(c: &CMat, cap: usize, norm_bound: Option<f64>) -> Result<Self> {
        let n = c.nrows();
        if c.ncols() != n {
            return Err(Error::DimensionMismatch(
                "perturbation must be square".into(),
            ));
        }
        let svd = c.svd().map_err(|e| Error::Eigen {
            n,
            frobenius: c.norm_l2(),
            reason: format!("{e:?}"),
        })?;
        let s = svd.S().column_vector();
        let top = if n == 0 { 0.0 } else { s[0].re };
        let k = (0..n)
            .take_while(|&i| top > 0.0 && s[i].re > RANK_REL_THRESHOLD * top)
            .count();
        if k > cap {
            return Err(Error::RankTooLarge { rank: k, cap });
        }
        let u = svd.U();
        let v = svd.V();
        let a = CMat::from_fn(n, k, |i, j| u[(i, j)] * s[j].re.sqrt());
        let b = CMat::from_fn(k, n, |i, j| v[(j, i)].conj() * s[i].re.sqrt());
        let p = Self::from_factors(a, b)?;
        if let Some(bound) = norm_bound {
            let norm = top.sqrt();
            if norm > bound {
                return Err(Error::NormTooLarge { norm, bound });
            }
        }
        Ok(p)
    }

    pub fn from_factors(a_factor: CMat, b_factor: CMat) -> Result<Self> {
        let n = a_factor.nrows();
        let k = a_factor.ncols();
        if b_factor.nrows() != k || b_factor.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "A is {n}x{k} but B is {}x{}",
                b_factor.nrows(),
                b_factor.ncols()
            )));
        }
        let eigenvalues_c = if k == 0 {
            Vec::new()
        } else {
            (&b_factor * &a_factor)
                .eigenvalues()
                .map_err(|e| Error::Eigen {
                    n: k,
                    frobenius: 0.0,
                    reason: format!("{e:?}"),
                })?
        };
        Ok(Self {
            n,
            a_factor,
            b_factor,
            eigenvalues_c,
            rank_k: k,
        })
    }

    /// `θ u u*` for a unit vector `u`.
    pub fn rank_one(theta: C64, u: &CMat) -> Result<Self> {
        let norm = u.norm_l2();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "u must be a unit vector, |u| = {norm}"
            )));
        }
        let a = u * faer::Scale(theta);
        let b = u.adjoint().to_owned();
        Self::from_factors(a, b)
    }

    /// `diag(d_0, d_1, …, 0, …)` in dimension `n`; zero entries are dropped from the factors.
    pub fn diagonal(n: usize, diag: &[C64]) -> Result<Self> {
        if diag.len() > n {
            return Err(Error::DimensionMismatch(format!(
                "{} diagonal values for n = {n}",
                diag.len()
            )));
        }
        let support: Vec<usize> = (0..diag.len())
            .filter(|&i| diag[i] != C64::new(0.0, 0.0))
            .collect();
        let k = support.len();
        let a = CMat::from_fn(n, k, |i, j| {
            if i == support[j] {
                diag[i]
            } else {
                C64::new(0.0, 0.0)
            }
        });
        let b = CMat::from_fn(k, n, |i, j| {
            C64::new(f64::from(u8::from(j == support[i])), 0.0)
        });
        Self::from_factors(a, b)
    }

    /// The dense matrix `A B`.
    pub fn matrix(&self) -> CMat {
        &self.a_factor * &self.b_factor
    }

    /// `B A`.
    pub fn compression(&self) -> CMat {
        &self.b_factor * &self.a_factor
    }

    /// Adds `C` to a copy of `x`.
    pub fn perturb(&self, x: &CMat) -> Result<CMat> {
        if x.nrows() != self.n {
            return Err(Error::DimensionMismatch(format!(
                "matrix is {}x{}, C is {n}x{n}",
                x.nrows(),
                x.ncols(),
                n = self.n
            )));
        }
        Ok(x + self.matrix())
    }
}

/// Serializable description of `C`, resolved against the dimension at build time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PerturbationSpec {
    /// `diag(values…, 0, …)`.
    Diagonal { values: Vec<C64> },
    /// `θ u u*` with `u` normalized; `e_0` when `u` is absent.
    RankOne {
        theta: C64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        u: Option<Vec<C64>>,
    },
    /// Full matrix, row by row.
    Dense { rows: Vec<Vec<C64>> },
    /// `A` (n × k) and `B` (k × n), row by row.
    Factored { a: Vec<Vec<C64>>, b: Vec<Vec<C64>> },
}

fn from_rows(rows: &[Vec<C64>], ncols: usize) -> Result<CMat> {
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::DimensionMismatch(format!(
            "every row must have {ncols} entries"
        )));
    }
    Ok(CMat::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

impl PerturbationSpec {
    pub fn build(&self, n: usize) -> Result<Perturbation> {
        match self {
            PerturbationSpec::Diagonal { values } => Perturbation::diagonal(n, values),
            PerturbationSpec::RankOne { theta, u } => {
                let u = match u {
                    None => CMat::from_fn(n, 1, |i, _| C64::new(f64::from(u8::from(i == 0)), 0.0)),
                    Some(v) if v.len() == n => {
                        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                        if norm == 0.0 {
                            return Err(Error::InvalidArgument("u must be nonzero".into()));
                        }
                        CMat::from_fn(n, 1, |i, _| v[i] / norm)
                    }
                    Some(v) => {
                        return Err(Error::DimensionMismatch(format!(
                            "u has {} entries, n = {n}",
                            v.len()
                        )))
                    }
                };
                Perturbation::rank_one(*theta, &u)
            }
            PerturbationSpec::Dense { rows } => {
                if rows.len() != n {
                    return Err(Error::DimensionMismatch(format!(
                        "{} rows for n = {n}",
                        rows.len()
                    )));
                }
                Perturbation::factor(&from_rows(rows, n)?)
            }
            PerturbationSpec::Factored { a, b } => {
                if a.len() != n {
                    return Err(Error::DimensionMismatch(format!(
                        "A has {} rows, n = {n}",
                        a.len()
                    )));
                }
                let k = b.len();
                if k > DEFAULT_RANK_CAP {
                    return Err(Error::RankTooLarge {
                        rank: k,
                        cap: DEFAULT_RANK_CAP,
                    });
                }
                Perturbation::from_factors(from_rows(a, k)?, from_rows(b, n)?)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutlierPrediction {
    pub source_lambda: C64,
    /// `λ + ρ/λ`, defined when `|λ| ≥ 1`.
    pub predicted: Option<C64>,
    pub admissible: bool,
}

/// `λ + ρ/λ` for every eigenvalue of `C`.
///
/// A prediction is admissible when `|λ| ≥ 1` and it lies outside `E(ρ, ε)`.
/// A prediction that falls between `E(ρ, ε)` and `E(ρ, 3ε)` is rejected as a
/// configuration error, since outlier locations are not controlled there.
pub fn predict(
    perturbation: &Perturbation,
    rho: C64,
    epsilon: f64,
) -> Result<Vec<OutlierPrediction>> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    let inner = EllipticRegion::new(rho, epsilon)?;
    let outer = inner.fattened(3.0 * epsilon);
    let mut out = Vec::with_capacity(perturbation.eigenvalues_c.len());
    for &lambda in &perturbation.eigenvalues_c {
        if lambda.norm() < 1.0 {
            out.push(OutlierPrediction {
                source_lambda: lambda,
                predicted: None,
                admissible: false,
            });
            continue;
        }
        let predicted = lambda + rho / lambda;
        let in_inner = inner.contains(predicted);
        if !in_inner && outer.contains(predicted) {
            return Err(Error::ForbiddenAnnulus { lambda, predicted });
        }
        out.push(OutlierPrediction {
            source_lambda: lambda,
            predicted: Some(predicted),
            admissible: !in_inner,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn sorted_re(v: &[C64]) -> Vec<f64> {
        let mut r: Vec<f64> = v.iter().map(|z| z.re).collect();
        r.sort_by(f64::total_cmp);
        r
    }

    #[test]
    fn factor_rank_one() {
        let n = 6;
        let u = CMat::from_fn(n, 1, |_, _| c(1.0 / (n as f64).sqrt(), 0.0));
        let cm = &u * u.adjoint() * faer::Scale(c(3.0, 0.0));
        let p = Perturbation::factor(&cm).unwrap();
        assert_eq!(p.rank_k, 1);
        assert!((p.eigenvalues_c[0] - 3.0).norm() < 1e-12);
        assert!((p.matrix() - &cm).norm_max() < 1e-12);
        // balanced factors
        assert!((p.a_factor.norm_l2() - 3f64.sqrt()).abs() < 1e-12);
        assert!((p.b_factor.norm_l2() - 3f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn factor_diagonal_and_nilpotent() {
        let n = 5;
        let mut cm = CMat::zeros(n, n);
        cm[(0, 0)] = c(2.0, 0.0);
        cm[(1, 1)] = c(0.5, 0.0);
        let p = Perturbation::factor(&cm).unwrap();
        assert_eq!(p.rank_k, 2);
        let ev = sorted_re(&p.eigenvalues_c);
        assert!((ev[0] - 0.5).abs() < 1e-12 && (ev[1] - 2.0).abs() < 1e-12);

        let mut nil = CMat::zeros(n, n);
        nil[(0, 1)] = c(1.0, 0.0);
        let p = Perturbation::factor(&nil).unwrap();
        assert_eq!(p.rank_k, 1);
        assert!(p.eigenvalues_c[0].norm() < 1e-12);
    }

    #[test]
    fn rank_cap() {
        let cm = CMat::identity(20, 20);
        assert!(matches!(
            Perturbation::factor(&cm),
            Err(Error::RankTooLarge { rank: 20, cap: 16 })
        ));
        assert!(matches!(
            Perturbation::factor_with(&CMat::identity(3, 3), 16, Some(0.5)),
            Err(Error::NormTooLarge { .. })
        ));
    }

    #[test]
    fn diagonal_constructor() {
        let p = Perturbation::diagonal(4, &[c(2.0, 0.0), c(0.0, 0.0), c(-1.5, 0.0)]).unwrap();
        assert_eq!(p.rank_k, 2);
        let m = p.matrix();
        assert_eq!(m[(0, 0)], c(2.0, 0.0));
        assert_eq!(m[(2, 2)], c(-1.5, 0.0));
        assert_eq!(m[(1, 1)], c(0.0, 0.0));
    }

    #[test]
    fn spec_json() {
        let spec: PerturbationSpec =
            serde_json::from_str(r#"{"kind":"diagonal","values":[[2.0,0.0]]}"#).unwrap();
        let p = spec.build(4).unwrap();
        assert_eq!(p.rank_k, 1);
        let spec: PerturbationSpec =
            serde_json::from_str(r#"{"kind":"rank-one","theta":[2.0,0.0],"u":[[1,0],[1,0]]}"#)
                .unwrap();
        let p = spec.build(2).unwrap();
        assert!((p.matrix()[(0, 1)] - 1.0).norm() < 1e-15);
        let spec = PerturbationSpec::Factored {
            a: vec![vec![c(1.0, 0.0)], vec![c(0.0, 0.0)]],
            b: vec![vec![c(0.0, 0.0), c(3.0, 0.0)]],
        };
        let p = spec.build(2).unwrap();
        assert_eq!(p.matrix()[(0, 1)], c(3.0, 0.0));
        assert!(spec.build(3).is_err());
        let back: PerturbationSpec =
            serde_json::from_str(&serde_json::to_string(&spec).unwrap()).unwrap();
        assert_eq!(back, spec);
    }

    #[test]
    fn predictions() {
        let p = Perturbation::diagonal(3, &[c(2.0, 0.0), c(0.5, 0.0)]).unwrap();
        let pr = predict(&p, c(0.0, 0.0), 0.1).unwrap();
        assert_eq!(pr[0].predicted, Some(c(2.0, 0.0)));
        assert!(pr[0].admissible);
        assert!(!pr[1].admissible);
        assert_eq!(pr[1].predicted, None);

        let p = Perturbation::diagonal(3, &[c(2.0, 0.0)]).unwrap();
        assert_eq!(
            predict(&p, c(1.0, 0.0), 0.1).unwrap()[0].predicted,
            Some(c(2.5, 0.0))
        );
        assert_eq!(
            predict(&p, c(0.5, 0.0), 0.1).unwrap()[0].predicted,
            Some(c(2.25, 0.0))
        );
    }

    #[test]
    fn forbidden_annulus() {
        // λ = 1.1, ρ = 0: prediction 1.1 sits between E(0, 0.05) and E(0, 0.15)
        let p = Perturbation::diagonal(2, &[c(1.1, 0.0)]).unwrap();
        assert!(matches!(
            predict(&p, c(0.0, 0.0), 0.05),
            Err(Error::ForbiddenAnnulus { .. })
        ));
        // inside E(0, ε): inadmissible but allowed
        let pr = predict(&p, c(0.0, 0.0), 0.2).unwrap();
        assert!(!pr[0].admissible);
    }
}
