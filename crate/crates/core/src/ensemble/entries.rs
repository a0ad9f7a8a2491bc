use std::f64::consts::{PI, SQRT_2};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::{Error, Result, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    GaussianReal,
    GaussianComplex,
    BoundedSymmetric,
    HeavyP,
    BernoulliSparse,
}

impl Family {
    pub fn is_real(self) -> bool {
        self != Family::GaussianComplex
    }
}

/// Base law for the bounded family and for the bounded factor of the sparse family.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundedLaw {
    /// Uniform on `[-√3, √3]`.
    #[default]
    Uniform,
    /// `±1` with equal probability.
    Rademacher,
}

impl BoundedLaw {
    pub fn bound(self) -> f64 {
        match self {
            BoundedLaw::Uniform => 3f64.sqrt(),
            BoundedLaw::Rademacher => 1.0,
        }
    }

    fn draw<R: Rng + ?Sized>(self, rng: &mut R) -> f64 {
        match self {
            BoundedLaw::Uniform => {
                let c = 3f64.sqrt();
                rng.random_range(-c..c)
            }
            BoundedLaw::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
        }
    }

    /// `E[b²; |b| ≤ t]`.
    fn truncated_second_moment(self, t: f64) -> f64 {
        match self {
            BoundedLaw::Uniform => {
                let c = 3f64.sqrt();
                if t >= c {
                    1.0
                } else {
                    t.powi(3) / (3.0 * c)
                }
            }
            BoundedLaw::Rademacher => {
                if t >= 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    fn abs_moment(self, p: f64) -> f64 {
        match self {
            BoundedLaw::Uniform => 3f64.sqrt().powf(p) / (p + 1.0),
            BoundedLaw::Rademacher => 1.0,
        }
    }
}

/// Entry distribution of the ensemble.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntryModel {
    pub family: Family,
    /// `E[g_xy g_yx]`; zero for the independent model.
    #[serde(default)]
    pub rho: C64,
    /// `E[g_xx²]` on self loops. Defaults to 1 for real families and 0 for complex ones.
    #[serde(rename = "diag_D", default, skip_serializing_if = "Option::is_none")]
    pub diag_d: Option<C64>,
    /// Declared almost-sure bound; checked against the law when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound: Option<f64>,
    /// Moment parameter of the heavy-tailed family.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    /// Expected number of nonzero entries per row of the sparse family.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sparse_k: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub law: Option<BoundedLaw>,
}

impl EntryModel {
    pub fn new(family: Family) -> Self {
        Self {
            family,
            rho: C64::new(0.0, 0.0),
            diag_d: None,
            bound: None,
            p: None,
            sparse_k: None,
            law: None,
        }
    }

    pub fn gaussian_real(rho: f64) -> Self {
        Self::new(Family::GaussianReal).with_rho(C64::new(rho, 0.0))
    }

    pub fn gaussian_complex(rho: C64) -> Self {
        Self::new(Family::GaussianComplex).with_rho(rho)
    }

    pub fn with_rho(mut self, rho: C64) -> Self {
        self.rho = rho;
        self
    }

    pub fn with_diag(mut self, d: C64) -> Self {
        self.diag_d = Some(d);
        self
    }

    pub fn diag_second_moment(&self) -> C64 {
        self.diag_d.unwrap_or(if self.family.is_real() {
            C64::new(1.0, 0.0)
        } else {
            C64::new(0.0, 0.0)
        })
    }

    pub fn is_elliptic(&self) -> bool {
        self.rho != C64::new(0.0, 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho.norm() <= 1.0 + 1e-12) {
            return Err(Error::InvalidModel(format!(
                "|rho| must be at most 1, got {}",
                self.rho
            )));
        }
        let d = self.diag_second_moment();
        if !(d.norm() <= 1.0 + 1e-12) {
            return Err(Error::InvalidModel(format!(
                "|diag_D| must be at most 1, got {d}"
            )));
        }
        if self.family.is_real() {
            if self.rho.im != 0.0 {
                return Err(Error::InvalidModel(format!(
                    "{:?} entries are real, so rho must be real (got {})",
                    self.family, self.rho
                )));
            }
            if d.im != 0.0 || d.re < 0.0 {
                return Err(Error::InvalidModel(format!(
                    "{:?} entries are real, so diag_D must be a real number in [0, 1] (got {d})",
                    self.family
                )));
            }
        }
        if self.family == Family::HeavyP {
            match self.p {
                Some(p) if p > 4.0 && p.is_finite() => {}
                other => {
                    return Err(Error::InvalidModel(format!(
                        "heavy-p needs a finite p > 4, got {other:?}"
                    )))
                }
            }
        }
        if self.family == Family::BernoulliSparse {
            match self.sparse_k {
                Some(k) if k > 0.0 && k.is_finite() => {}
                other => {
                    return Err(Error::InvalidModel(format!(
                        "bernoulli-sparse needs sparse_k > 0, got {other:?}"
                    )))
                }
            }
        }
        if let Some(b) = self.bound {
            let law_bound = match self.family {
                Family::BoundedSymmetric => Some(self.law.unwrap_or_default().bound()),
                _ => None,
            };
            match law_bound {
                Some(lb) if (lb - b).abs() <= 1e-12 * lb.max(1.0) => {}
                Some(lb) => {
                    return Err(Error::InvalidModel(format!(
                        "declared bound {b} does not match the {:?} law bound {lb}",
                        self.law.unwrap_or_default()
                    )))
                }
                None => {
                    return Err(Error::InvalidModel(format!(
                        "a bound was declared but {:?} entries are unbounded",
                        self.family
                    )))
                }
            }
        }
        Ok(())
    }

    /// Resolves the model at dimension `n` (the sparse mask probability depends on `n`).
    pub fn law(&self, n: usize) -> Result<EntryLaw> {
        self.validate()?;
        let (sparse_prob, sparse_scale) = match self.family {
            Family::BernoulliSparse => {
                let k = self.sparse_k.unwrap_or(0.0);
                if k > n as f64 {
                    return Err(Error::InvalidModel(format!(
                        "sparse_k = {k} exceeds n = {n}"
                    )));
                }
                let prob = k / n as f64;
                (prob, prob.sqrt().recip())
            }
            _ => (1.0, 1.0),
        };
        Ok(EntryLaw {
            family: self.family,
            rho: self.rho,
            diag: self.diag_second_moment(),
            base: self.law.unwrap_or_default(),
            tail_index: self.p.map_or(f64::INFINITY, |p| p + 1.0),
            sparse_prob,
            sparse_scale,
        })
    }
}

/// An [`EntryModel`] resolved at a fixed dimension, ready to sample.
#[derive(Clone, Debug, PartialEq)]
pub struct EntryLaw {
    pub family: Family,
    pub rho: C64,
    pub diag: C64,
    pub base: BoundedLaw,
    /// Pareto tail index of the heavy family (`p + 1`).
    pub tail_index: f64,
    pub sparse_prob: f64,
    pub sparse_scale: f64,
}

fn std_complex<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) / SQRT_2
}

impl EntryLaw {
    fn heavy_scale(&self) -> f64 {
        let a = self.tail_index;
        ((a - 2.0) / a).sqrt()
    }

    /// One variance-one draw of a real family.
    pub fn draw_real<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.family {
            Family::GaussianReal | Family::GaussianComplex => rng.sample(StandardNormal),
            Family::BoundedSymmetric => self.base.draw(rng),
            Family::HeavyP => {
                // symmetric Pareto: |g| = c·U^{-1/α} with U uniform on (0, 1]
                let u = 1.0 - rng.random::<f64>();
                let mag = self.heavy_scale() * u.powf(-1.0 / self.tail_index);
                if rng.random::<bool>() {
                    mag
                } else {
                    -mag
                }
            }
            Family::BernoulliSparse => {
                let keep = rng.random::<f64>() < self.sparse_prob;
                let b = self.base.draw(rng);
                if keep {
                    b * self.sparse_scale
                } else {
                    0.0
                }
            }
        }
    }

    /// One off-diagonal draw, for the directed independent model.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> C64 {
        match self.family {
            Family::GaussianComplex => std_complex(rng),
            _ => C64::new(self.draw_real(rng), 0.0),
        }
    }

    /// A transpose pair `(g_xy, g_yx)` with `E[g1 g2] = ρ`.
    pub fn sample_pair<R: Rng + ?Sized>(&self, rng: &mut R) -> (C64, C64) {
        let rho = self.rho;
        match self.family {
            Family::GaussianComplex => {
                let a = std_complex(rng);
                let b = std_complex(rng);
                (
                    a,
                    rho * a.conj() + (1.0 - rho.norm_sqr()).max(0.0).sqrt() * b,
                )
            }
            Family::GaussianReal => {
                let g1: f64 = rng.sample(StandardNormal);
                let g1p: f64 = rng.sample(StandardNormal);
                let r = rho.re;
                let g2 = if r.abs() >= 1.0 {
                    r.signum() * g1
                } else {
                    r * g1 + (1.0 - r * r).sqrt() * g1p
                };
                (C64::new(g1, 0.0), C64::new(g2, 0.0))
            }
            _ => {
                // mixture: copy (with the sign of ρ) with probability |ρ|, else independent,
                // which keeps the marginal law of g2 equal to that of g1
                let g1 = self.draw_real(rng);
                let r = rho.re;
                let copy = rng.random::<f64>() < r.abs();
                let fresh = self.draw_real(rng);
                let g2 = if copy { r.signum() * g1 } else { fresh };
                (C64::new(g1, 0.0), C64::new(g2, 0.0))
            }
        }
    }

    /// A diagonal draw with `E[|g|²] = 1` and `E[g²] = D`.
    pub fn sample_diagonal<R: Rng + ?Sized>(&self, rng: &mut R) -> C64 {
        let d = self.diag;
        let x = self.draw_real(rng);
        let y = self.draw_real(rng);
        let m = d.norm().min(1.0);
        let rot = C64::from_polar(1.0, d.arg() / 2.0);
        rot * C64::new(((1.0 + m) / 2.0).sqrt() * x, ((1.0 - m) / 2.0).sqrt() * y)
    }

    /// Almost-sure bound on `|g|`, if the law is bounded.
    pub fn bound(&self) -> Option<f64> {
        match self.family {
            Family::BoundedSymmetric => Some(self.base.bound()),
            Family::BernoulliSparse => Some(self.base.bound() * self.sparse_scale),
            _ => None,
        }
    }

    /// `E[|g|²; |g| ≤ t]` for an off-diagonal entry, in closed form.
    pub fn truncated_second_moment(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        match self.family {
            Family::GaussianReal => {
                let phi = (-t * t / 2.0).exp() / (2.0 * PI).sqrt();
                libm::erf(t / SQRT_2) - 2.0 * t * phi
            }
            Family::GaussianComplex => 1.0 - (1.0 + t * t) * (-t * t).exp(),
            Family::BoundedSymmetric => self.base.truncated_second_moment(t),
            Family::HeavyP => {
                let c = self.heavy_scale();
                if t <= c {
                    0.0
                } else {
                    1.0 - (t / c).powf(2.0 - self.tail_index)
                }
            }
            Family::BernoulliSparse => self.base.truncated_second_moment(t / self.sparse_scale),
        }
    }

    /// `E[|g|^p]` for an off-diagonal entry (infinite when the moment does not exist).
    pub fn abs_moment(&self, p: f64) -> f64 {
        match self.family {
            Family::GaussianReal => 2f64.powf(p / 2.0) * libm::tgamma((p + 1.0) / 2.0) / PI.sqrt(),
            Family::GaussianComplex => libm::tgamma(1.0 + p / 2.0),
            Family::BoundedSymmetric => self.base.abs_moment(p),
            Family::HeavyP => {
                let a = self.tail_index;
                if p >= a {
                    f64::INFINITY
                } else {
                    self.heavy_scale().powf(p) * a / (a - p)
                }
            }
            Family::BernoulliSparse => {
                self.sparse_prob * self.sparse_scale.powf(p) * self.base.abs_moment(p)
            }
        }
    }

    /// `|E[g_xy · conj(g_yx)]|`, the coupling that enters the covariance of a transpose pair.
    pub fn conj_pair_correlation(&self) -> f64 {
        match self.family {
            Family::GaussianComplex => 0.0,
            _ => self.rho.norm(),
        }
    }
}
