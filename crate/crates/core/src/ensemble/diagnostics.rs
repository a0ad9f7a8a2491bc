use serde::{Deserialize, Serialize};

use super::entries::{EntryLaw, Family};
use super::sample::EnsembleSpec;
use crate::{Result, C64};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub inv_log: f64,
    pub inv_log_1_5: f64,
    pub inv_log_2: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticChecks {
    /// `ṽ ≤ (log n)^{-1}`.
    pub v_tilde: bool,
    /// `σ_* ≤ (log n)^{-3/2}`.
    pub sigma_star: bool,
    /// `R̄ ≤ (log n)^{-2}`.
    pub r_bar: bool,
    /// `(log n)|D|/d ≤ (log n)^{-1}`.
    pub d_offset: bool,
}

/// Hypothesis parameters of the scaled matrix `d^{-1/2} X`, evaluated at the law level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelDiagnostics {
    pub n: usize,
    pub degree: usize,
    /// `‖Cov(X)‖^{1/2}`.
    pub v: f64,
    /// `max(‖E XX*‖, ‖E X*X‖)^{1/2}`.
    pub sigma: f64,
    /// Weak variance; an upper bound for correlated pairs.
    pub sigma_star: f64,
    pub v_tilde: f64,
    /// Almost-sure bound on one summand; `None` when the entries are unbounded.
    pub r_bound: Option<f64>,
    /// Bound on `(E max_i ‖Z_i‖²)^{1/2}` over the `n d` summands.
    pub r_bar: f64,
    /// Ratio between the pair-summand value of `v` and the independent value `d^{-1/2}`.
    pub pair_slack: f64,
    /// `E[X²] = rho_effective · 1`.
    pub rho_effective: C64,
    /// `D/d` on graphs with self loops, 0 otherwise.
    pub d_offset: C64,
    pub thresholds: Thresholds,
    pub checks: DiagnosticChecks,
}

fn r_bar(law: &EntryLaw, summands: f64, degree: f64) -> f64 {
    let second = match law.family {
        Family::BoundedSymmetric | Family::BernoulliSparse => law.bound().map_or(0.0, |b| b * b),
        // E max g² ≤ 4 ln M + 2 ln 2, from E exp(g²/4) = √2
        Family::GaussianReal => 4.0 * summands.ln() + 2.0 * 2f64.ln(),
        // |g|² is Exp(1): E max = H_M ≤ ln M + 1
        Family::GaussianComplex => summands.ln() + 1.0,
        Family::HeavyP => {
            let p = law.tail_index - 1.0;
            (summands * law.abs_moment(p)).powf(2.0 / p)
        }
    };
    (second / degree).sqrt()
}

pub fn diagnostics(spec: &EnsembleSpec) -> Result<ModelDiagnostics> {
    let graph = spec.validate()?;
    let n = graph.n;
    let law = spec.entries.law(n)?;
    let d = graph.degree as f64;
    let log_n = (n as f64).ln();

    let has_pairs = !graph.directed && graph.degree > usize::from(graph.self_loops);
    let coupling = if has_pairs {
        law.conj_pair_correlation()
    } else {
        0.0
    };
    let pair_slack = (1.0 + coupling).sqrt();
    let v = pair_slack / d.sqrt();
    let sigma = 1.0;
    let sigma_star = v;
    let v_tilde = (v * sigma).sqrt();

    let r_bound = law.bound().map(|b| b / d.sqrt());
    let r_bar = r_bar(&law, n as f64 * d, d);

    let diag = spec.entries.diag_second_moment();
    let d_offset = if graph.self_loops {
        diag / d
    } else {
        C64::new(0.0, 0.0)
    };
    let off_degree = d - f64::from(u8::from(graph.self_loops));
    let rho_effective = if graph.directed {
        d_offset
    } else {
        spec.entries.rho * off_degree / d + d_offset
    };

    let thresholds = Thresholds {
        inv_log: log_n.recip(),
        inv_log_1_5: log_n.powf(-1.5),
        inv_log_2: log_n.powi(-2),
    };
    let checks = DiagnosticChecks {
        v_tilde: v_tilde <= thresholds.inv_log,
        sigma_star: sigma_star <= thresholds.inv_log_1_5,
        r_bar: r_bar <= thresholds.inv_log_2,
        d_offset: log_n * d_offset.norm() <= thresholds.inv_log,
    };
    Ok(ModelDiagnostics {
        n,
        degree: graph.degree,
        v,
        sigma,
        sigma_star,
        v_tilde,
        r_bound,
        r_bar,
        pair_slack,
        rho_effective,
        d_offset,
        thresholds,
        checks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{build_graph, EntryModel, GraphSpec, SelfLoops};
    use crate::CMat;
    use faer::Side;

    /// `‖Cov‖` from the Hermitian covariance of `vec(X)`, built entry by entry.
    fn brute_force_v2(spec: &EnsembleSpec) -> f64 {
        let g = build_graph(&spec.graph).unwrap();
        let law = spec.entries.law(g.n).unwrap();
        let n = g.n;
        let d = g.degree as f64;
        let idx = |x: usize, y: usize| x * n + y;
        let mut cov = CMat::zeros(n * n, n * n);
        for (x, y) in g.edges() {
            cov[(idx(x, y), idx(x, y))] = C64::new(1.0 / d, 0.0);
            if x != y && !g.directed {
                let c = C64::new(law.conj_pair_correlation(), 0.0) / d;
                cov[(idx(x, y), idx(y, x))] = c;
            }
        }
        let eig = cov.self_adjoint_eigenvalues(Side::Lower).unwrap();
        eig.into_iter().fold(0.0, f64::max)
    }

    #[test]
    fn complete_graph_values() {
        let spec = EnsembleSpec::new(
            GraphSpec::complete(8, SelfLoops::All),
            EntryModel::gaussian_real(0.0),
        );
        let diag = diagnostics(&spec).unwrap();
        assert!((diag.v * diag.v - brute_force_v2(&spec)).abs() < 1e-14);
        assert!((diag.v - 8f64.powf(-0.5)).abs() < 1e-15);
        assert_eq!(diag.sigma, 1.0);
        assert!((diag.sigma_star - 8f64.powf(-0.5)).abs() < 1e-15);
        assert!((diag.v_tilde - 8f64.powf(-0.25)).abs() < 1e-15);
        assert_eq!(diag.r_bound, None);
    }

    #[test]
    fn correlated_pairs_match_brute_force() {
        let spec = EnsembleSpec::new(
            GraphSpec::circulant_band(8, 2, SelfLoops::None),
            EntryModel::new(Family::BoundedSymmetric).with_rho(C64::new(-0.6, 0.0)),
        );
        let diag = diagnostics(&spec).unwrap();
        assert!((diag.v * diag.v - brute_force_v2(&spec)).abs() < 1e-14);
        assert!((diag.pair_slack - 1.6f64.sqrt()).abs() < 1e-15);
        assert!(diag.pair_slack <= 2f64.sqrt());
        let r = diag.r_bound.unwrap();
        assert!((r - 3f64.sqrt() / 2.0).abs() < 1e-15);
    }

    #[test]
    fn band_v_tilde() {
        let spec = EnsembleSpec::new(
            GraphSpec::circulant_band(4096, 128, SelfLoops::None),
            EntryModel::gaussian_complex(C64::new(0.0, 0.0)),
        );
        let diag = diagnostics(&spec).unwrap();
        assert_eq!(diag.degree, 256);
        assert!((diag.v_tilde - 0.25).abs() < 1e-15);
    }

    #[test]
    fn d_offset_reported() {
        let spec = EnsembleSpec::new(
            GraphSpec::circulant_band(64, 4, SelfLoops::All),
            EntryModel::gaussian_real(0.3).with_diag(C64::new(0.5, 0.0)),
        );
        let diag = diagnostics(&spec).unwrap();
        assert!((diag.d_offset - C64::new(0.5 / 9.0, 0.0)).norm() < 1e-15);
        assert!((diag.rho_effective - C64::new(0.3 * 8.0 / 9.0 + 0.5 / 9.0, 0.0)).norm() < 1e-15);
        // (log 64)·0.5/9 ≈ 0.231 against 1/log 64 ≈ 0.240
        assert!(diag.checks.d_offset);
        let heavy_diag = EnsembleSpec::new(
            GraphSpec::circulant_band(64, 4, SelfLoops::All),
            EntryModel::gaussian_real(0.3),
        );
        assert!(!diagnostics(&heavy_diag).unwrap().checks.d_offset);
    }
}
