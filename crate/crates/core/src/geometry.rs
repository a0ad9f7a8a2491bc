//! The elliptic region `E(ρ) = { x + ρ·conj(x) : |x| ≤ 1 }` and its
//! ε-fattening `E(ρ, ε) = { z : dist(z, E(ρ)) ≤ ε }`.
//!
//! For real ρ the region is the ellipse with semi-axes `1 + ρ` and `1 − ρ`;
//! for complex ρ it is `E(|ρ|)` rotated by `arg(ρ)/2`. When `|ρ| = 1` it
//! collapses to a segment of length 4.

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::{Error, Result, C64};

/// Moduli of ρ at or above `1 - DEGENERATE_GAP` are treated as the segment case.
pub const DEGENERATE_GAP: f64 = 1e-12;

/// Slack applied to every membership test, absorbing rounding on the boundary.
pub const BOUNDARY_TOL: f64 = 1e-12;

const DISTANCE_GRID: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EllipticRegion {
    pub rho: C64,
    pub epsilon: f64,
}

impl EllipticRegion {
    pub fn new(rho: C64, epsilon: f64) -> Result<Self> {
        if !(rho.norm() <= 1.0 + DEGENERATE_GAP) {
            return Err(Error::InvalidArgument(format!(
                "|rho| must be at most 1, got {rho}"
            )));
        }
        if !(epsilon >= 0.0) || !epsilon.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "epsilon must be a finite nonnegative number, got {epsilon}"
            )));
        }
        Ok(Self { rho, epsilon })
    }

    /// The same ρ with a different fattening.
    pub fn fattened(&self, epsilon: f64) -> Self {
        Self {
            rho: self.rho,
            epsilon,
        }
    }

    pub fn is_degenerate(&self) -> bool {
        self.rho.norm() >= 1.0 - DEGENERATE_GAP
    }

    /// `e^{iφ} + ρ e^{-iφ}`, the boundary of the unfattened region.
    pub fn boundary_point(&self, phi: f64) -> C64 {
        let e = C64::from_polar(1.0, phi);
        e + self.rho * e.conj()
    }

    /// Solves `x + ρ·conj(x) = z` for `x`. `None` in the segment case, where
    /// the real-linear map is singular.
    pub fn preimage(&self, z: C64) -> Option<C64> {
        if self.is_degenerate() {
            return None;
        }
        let det = 1.0 - self.rho.norm_sqr();
        Some((z - self.rho * z.conj()) / det)
    }

    /// Euclidean distance from `z` to the unfattened region (0 inside).
    pub fn distance(&self, z: C64) -> f64 {
        if self.is_degenerate() {
            return self.segment_distance(z);
        }
        if let Some(x) = self.preimage(z) {
            if x.norm() <= 1.0 {
                return 0.0;
            }
        }
        let step = 2.0 * PI / DISTANCE_GRID as f64;
        let dist2 = |phi: f64| (z - self.boundary_point(phi)).norm_sqr();
        let (mut best_phi, mut best) = (0.0, f64::INFINITY);
        for k in 0..DISTANCE_GRID {
            let phi = k as f64 * step;
            let d = dist2(phi);
            if d < best {
                best = d;
                best_phi = phi;
            }
        }
        // golden-section refinement inside the neighbouring grid cells
        let inv_golden = (5f64.sqrt() - 1.0) / 2.0;
        let (mut lo, mut hi) = (best_phi - step, best_phi + step);
        let mut x1 = hi - inv_golden * (hi - lo);
        let mut x2 = lo + inv_golden * (hi - lo);
        let (mut f1, mut f2) = (dist2(x1), dist2(x2));
        for _ in 0..80 {
            if f1 < f2 {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - inv_golden * (hi - lo);
                f1 = dist2(x1);
            } else {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + inv_golden * (hi - lo);
                f2 = dist2(x2);
            }
        }
        best.min(f1).min(f2).sqrt()
    }

    fn segment_distance(&self, z: C64) -> f64 {
        let half = 1.0 + self.rho.norm();
        let w = z * C64::from_polar(1.0, -self.rho.arg() / 2.0);
        let nearest = C64::new(w.re.clamp(-half, half), 0.0);
        (w - nearest).norm()
    }

    /// `dist(z, E(ρ)) ≤ ε`, up to [`BOUNDARY_TOL`].
    pub fn contains(&self, z: C64) -> bool {
        match self.preimage(z) {
            Some(x) if x.norm() <= 1.0 + BOUNDARY_TOL => true,
            Some(_) if self.epsilon == 0.0 => false,
            _ => self.distance(z) <= self.epsilon + BOUNDARY_TOL,
        }
    }

    /// `m` points `e^{iφ_k} + ρ e^{-iφ_k}`, `φ_k = 2πk/m`, pushed outward by ε.
    pub fn boundary_points(&self, m: usize) -> Result<Vec<C64>> {
        if m < 3 {
            return Err(Error::InvalidArgument(format!(
                "need at least 3 boundary points, got {m}"
            )));
        }
        Ok((0..m)
            .map(|k| {
                let phi = 2.0 * PI * k as f64 / m as f64;
                let p = self.boundary_point(phi);
                if self.epsilon == 0.0 {
                    return p;
                }
                let e = C64::from_polar(1.0, phi);
                let mut normal = e - self.rho * e.conj();
                if normal.norm() < 1e-12 {
                    // segment endpoint: push along the segment
                    normal = if p.norm() > 0.0 { p } else { e };
                }
                p + normal / normal.norm() * self.epsilon
            })
            .collect())
    }
}

/// Writes `re,im` rows with a header.
pub fn write_points_csv<W: Write>(mut out: W, points: &[C64]) -> std::io::Result<()> {
    writeln!(out, "re,im")?;
    for p in points {
        writeln!(out, "{},{}", p.re, p.im)?;
    }
    Ok(())
}
