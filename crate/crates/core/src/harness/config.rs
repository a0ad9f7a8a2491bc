use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::ensemble::{diagnostics, EnsembleSpec};
use crate::geometry::EllipticRegion;
use crate::outliers::{default_match_cap, predict, Perturbation, PerturbationSpec};
use crate::products::ProductSpec;
use crate::{Error, Result, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    NoOutliers,
    Perturbed,
    Isotropic,
    DysonSweep,
    Product,
    Diagnostics,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::NoOutliers => "no-outliers",
            ExperimentKind::Perturbed => "perturbed",
            ExperimentKind::Isotropic => "isotropic",
            ExperimentKind::DysonSweep => "dyson-sweep",
            ExperimentKind::Product => "product",
            ExperimentKind::Diagnostics => "diagnostics",
        }
    }

    /// Whether trials persist a spectrum.
    pub fn has_spectrum(self) -> bool {
        matches!(
            self,
            ExperimentKind::NoOutliers
                | ExperimentKind::Perturbed
                | ExperimentKind::Product
                | ExperimentKind::Diagnostics
        )
    }
}

fn default_isotropic() -> f64 {
    0.15
}
fn default_radius() -> f64 {
    1.15
}
fn default_band() -> f64 {
    0.05
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Largest accepted prediction/observation distance; `10 (log log n)^{-1/2}` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub match_cap: Option<f64>,
    /// Isotropic deviation accepted per trial.
    #[serde(default = "default_isotropic")]
    pub isotropic: f64,
    /// Spectral radius accepted for an unperturbed product.
    #[serde(default = "default_radius")]
    pub spectral_radius: f64,
    /// Sweep points closer than this to the boundary are not compared.
    #[serde(default = "default_band")]
    pub boundary_band: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            match_cap: None,
            isotropic: default_isotropic(),
            spectral_radius: default_radius(),
            boundary_band: default_band(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Square `[-extent, extent]²`.
    pub extent: f64,
    /// Points per side.
    pub points: usize,
}

impl GridSpec {
    pub fn points(&self) -> Vec<C64> {
        let k = self.points;
        let step = if k > 1 {
            2.0 * self.extent / (k - 1) as f64
        } else {
            0.0
        };
        let coord = |i: usize| -self.extent + step * i as f64;
        (0..k)
            .flat_map(|i| (0..k).map(move |j| C64::new(coord(j), coord(i))))
            .collect()
    }
}

/// `rate(metric).estimate ≥ min_rate`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Assertion {
    pub metric: String,
    pub min_rate: f64,
}

fn default_trials() -> u64 {
    1
}
fn default_isotropic_points() -> usize {
    20
}

/// One experiment, as read from JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ensemble: Option<EnsembleSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub product: Option<ProductSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<PerturbationSpec>,
    /// Defaults to `E[X²]/1` of the ensemble.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<C64>,
    /// Defaults to 0.1, or to the product's own ε.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    /// Overrides the dimension of every ensemble.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default = "default_trials")]
    pub trials: u64,
    #[serde(default)]
    pub seed: u64,
    /// Truncation level `a_n` applied to every sample.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation: Option<f64>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    #[serde(default = "default_isotropic_points")]
    pub isotropic_points: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub acceptance: Vec<Assertion>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(kind: ExperimentKind) -> Self {
        Self {
            kind,
            ensemble: None,
            product: None,
            perturbation: None,
            rho: None,
            epsilon: None,
            n: None,
            trials: 1,
            seed: 0,
            truncation: None,
            tolerances: Tolerances::default(),
            grid: None,
            isotropic_points: default_isotropic_points(),
            acceptance: Vec::new(),
            out_dir: None,
        }
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// Checks everything that can be checked without sampling.
    pub fn prepare(&self) -> Result<Prepared> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.trials < 1 {
            return bad("trials must be at least 1".into());
        }
        if let Some(e) = self.epsilon {
            if !(e > 0.0) || !e.is_finite() {
                return bad(format!("epsilon must be positive, got {e}"));
            }
        }
        if let Some(cap) = self.tolerances.match_cap {
            if !(cap > 0.0) {
                return bad(format!("match cap must be positive, got {cap}"));
            }
        }
        for a in &self.acceptance {
            if !(0.0..=1.0).contains(&a.min_rate) {
                return bad(format!("min_rate of {} must lie in [0, 1]", a.metric));
            }
        }
        let mut ensemble = self.ensemble.clone();
        let mut product = self.product.clone();
        if let Some(n) = self.n {
            if let Some(e) = ensemble.as_mut() {
                e.graph.n = n;
            }
            if let Some(p) = product.as_mut() {
                for f in &mut p.factors {
                    f.graph.n = n;
                }
            }
        }
        let needs_ensemble = !matches!(
            self.kind,
            ExperimentKind::DysonSweep | ExperimentKind::Product
        );
        if needs_ensemble && ensemble.is_none() {
            return bad(format!("{} needs an ensemble", self.kind.name()));
        }
        let mut n = 0;
        let mut rho = self.rho.unwrap_or_default();
        if let Some(e) = &ensemble {
            e.validate()?;
            n = e.graph.n;
            if self.rho.is_none() {
                rho = diagnostics(e)?.rho_effective;
            }
        }
        let mut epsilon = self.epsilon.unwrap_or(0.1);
        if self.kind == ExperimentKind::Product {
            let Some(p) = product.as_mut() else {
                return bad("product needs a product spec".into());
            };
            if let Some(e) = self.epsilon {
                p.epsilon = e;
            }
            epsilon = p.epsilon;
            n = p.validate()?;
            rho = C64::new(0.0, 0.0);
        }
        if self.kind != ExperimentKind::DysonSweep && n < 4 {
            return bad(format!("n must be at least 4, got {n}"));
        }
        let region = EllipticRegion::new(rho, epsilon)?;

        let mut perturbation = None;
        let mut predictions = Vec::new();
        match self.kind {
            ExperimentKind::Perturbed => {
                let Some(spec) = &self.perturbation else {
                    return bad("perturbed needs a perturbation".into());
                };
                let p = spec.build(n)?;
                predictions = predict(&p, rho, epsilon)?
                    .into_iter()
                    .filter(|q| q.admissible)
                    .filter_map(|q| q.predicted)
                    .collect();
                perturbation = Some(p);
            }
            ExperimentKind::Product => {
                let p = product.as_ref().expect("checked above");
                predictions = p
                    .product_perturbation_eigenvalues()?
                    .into_iter()
                    .filter(|l| l.norm() > 1.0 + 3.0 * epsilon)
                    .collect();
            }
            ExperimentKind::DysonSweep => {
                let Some(g) = &self.grid else {
                    return bad("dyson-sweep needs a grid".into());
                };
                if g.points < 2 || !(g.extent > 0.0) {
                    return bad(
                        "grid needs at least 2 points per side and a positive extent".into(),
                    );
                }
            }
            ExperimentKind::Isotropic => {
                if self.isotropic_points < 3 {
                    return bad("isotropic needs at least 3 grid points".into());
                }
            }
            _ => {}
        }
        if let Some(a) = self.truncation {
            if !(a > 0.0) {
                return bad(format!("truncation level must be positive, got {a}"));
            }
        }
        let match_cap = self
            .tolerances
            .match_cap
            .unwrap_or_else(|| default_match_cap(n.max(16)));
        Ok(Prepared {
            config: self.clone(),
            ensemble,
            product,
            perturbation,
            predictions,
            region,
            n,
            match_cap,
        })
    }

    /// Number of trial files the experiment produces.
    pub fn trial_count(&self) -> u64 {
        if self.kind == ExperimentKind::DysonSweep {
            1
        } else {
            self.trials
        }
    }
}

/// A validated configuration with everything derived from it.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub config: ExperimentConfig,
    pub ensemble: Option<EnsembleSpec>,
    pub product: Option<ProductSpec>,
    pub perturbation: Option<Perturbation>,
    /// Admissible outlier locations.
    pub predictions: Vec<C64>,
    /// `E(ρ, ε)`; the unit disk fattened by ε for products.
    pub region: EllipticRegion,
    pub n: usize,
    pub match_cap: f64,
}
