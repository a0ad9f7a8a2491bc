//! The 2×2 matrix Dyson equation of the Hermitized free model.
//!
//! For a doubly stochastic profile with `E[X²] = ρ₀·1`, the block Stieltjes
//! transform `G = [[a, b], [b', c]]` of
//! `Y_z(v) = [[-v, X - z], [X* - conj(z), -v]]` solves
//!
//! ```text
//! S[G] + G⁻¹ + [[v, z], [conj(z), v]] = 0,   S[G] = [[c, ρ₀·b'], [conj(ρ₀)·b, a]],
//! ```
//!
//! with `Im G` positive definite. On the imaginary axis `b' = conj(b)` and
//! `a = c = iV`, `V > 0`. Outside `E(ρ₀)` the limit `η ↓ 0` is explicit:
//! `conj(b) → (-z + √(z² - 4ρ₀)) / (2ρ₀)` (or `-1/z` when `ρ₀ = 0`).

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::geometry::EllipticRegion;
use crate::{Error, Result, C64};

/// Below this modulus ρ₀ is treated as exactly zero in the closed form.
pub const RHO0_ZERO: f64 = 1e-12;

/// Imaginary parts used by [`classify_support`].
pub const DEFAULT_ETA_SCHEDULE: [f64; 3] = [1e-2, 1e-3, 1e-4];

/// Imaginary part of the spectral parameter used by [`gap_estimate`].
pub const GAP_ETA: f64 = 1e-6;

/// Density threshold on `Im a` used by [`gap_estimate`].
pub const GAP_DENSITY_THRESHOLD: f64 = 1e-4;

const START_ETA: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DysonParams {
    /// Spectral location of the non-Hermitian problem.
    pub z: C64,
    /// Hermitized spectral parameter, `Im v > 0`.
    pub v: C64,
    /// Effective correlation `ρ + D/d`.
    pub rho0: C64,
}

impl DysonParams {
    pub fn new(z: C64, v: C64, rho0: C64) -> Result<Self> {
        if !(v.im > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "Im v must be positive, got v = {v}"
            )));
        }
        if !(rho0.norm() <= 1.0 + 1e-12) {
            return Err(Error::InvalidArgument(format!(
                "|rho0| must be at most 1, got {rho0}"
            )));
        }
        Ok(Self { z, v, rho0 })
    }

    /// `v = iη`.
    pub fn imaginary(z: C64, eta: f64, rho0: C64) -> Result<Self> {
        Self::new(z, C64::new(0.0, eta), rho0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DysonSolution {
    pub a: C64,
    /// Upper off-diagonal entry of `G`.
    pub b: C64,
    /// Lower off-diagonal entry of `G`; equals `conj(b)` on the imaginary axis.
    pub b_lower: C64,
    pub c: C64,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl DysonSolution {
    /// `V = Im a`.
    pub fn v_im(&self) -> f64 {
        self.a.im
    }

    /// The entry whose `η ↓ 0` limit is [`limit_b`]: the lower off-diagonal
    /// entry, which is `conj(b)` whenever `v` is purely imaginary.
    pub fn b_bar(&self) -> C64 {
        self.b_lower
    }

    fn block(&self) -> Block {
        Block([self.a, self.b, self.b_lower, self.c])
    }

    pub fn imaginary_part_is_positive_definite(&self) -> bool {
        self.block().im_positive_definite()
    }
}

/// `[[g0, g1], [g2, g3]]`.
#[derive(Clone, Copy, Debug)]
struct Block([C64; 4]);

impl Block {
    fn identity_times(s: C64) -> Self {
        Block([s, C64::new(0.0, 0.0), C64::new(0.0, 0.0), s])
    }

    fn det(&self) -> C64 {
        let [a, p, q, c] = self.0;
        a * c - p * q
    }

    fn inverse(&self) -> Option<Block> {
        let det = self.det();
        if det.norm() == 0.0 || !det.is_finite() {
            return None;
        }
        let [a, p, q, c] = self.0;
        Some(Block([c / det, -p / det, -q / det, a / det]))
    }

    fn max_abs(&self) -> f64 {
        self.0.iter().map(|x| x.norm()).fold(0.0, f64::max)
    }

    fn im_positive_definite(&self) -> bool {
        let [a, p, q, c] = self.0;
        // (G - G*)/(2i)
        let h11 = a.im;
        let h22 = c.im;
        let h12 = (p - q.conj()) / C64::new(0.0, 2.0);
        h11 > 0.0 && h22 > 0.0 && h11 * h22 - h12.norm_sqr() > 0.0
    }

    fn add_scaled(&self, other: &Block, s: f64) -> Block {
        let mut out = self.0;
        for (o, x) in out.iter_mut().zip(other.0) {
            *o += x * s;
        }
        Block(out)
    }
}

fn self_energy(g: &Block, rho0: C64) -> Block {
    let [a, p, q, c] = g.0;
    Block([c, rho0 * q, rho0.conj() * p, a])
}

fn spectral_block(params: &DysonParams, v: C64) -> Block {
    Block([v, params.z, params.z.conj(), v])
}

/// `S[G] + G⁻¹ + Λ`, entrywise.
fn defect_at(params: &DysonParams, v: C64, g: &Block) -> Option<Block> {
    let inv = g.inverse()?;
    let s = self_energy(g, params.rho0);
    let lam = spectral_block(params, v);
    let mut out = [C64::new(0.0, 0.0); 4];
    for i in 0..4 {
        out[i] = s.0[i] + inv.0[i] + lam.0[i];
    }
    Some(Block(out))
}

/// Max-entry norm of the Dyson defect for a candidate `(a, b, b', c)`.
pub fn defect(params: &DysonParams, a: C64, b: C64, b_lower: C64, c: C64) -> f64 {
    defect_at(params, params.v, &Block([a, b, b_lower, c]))
        .map(|d| d.max_abs())
        .unwrap_or(f64::INFINITY)
}

fn residual(params: &DysonParams, v: C64, g: &Block) -> f64 {
    defect_at(params, v, g)
        .map(|d| d.max_abs())
        .unwrap_or(f64::INFINITY)
}

/// Holomorphic Jacobian of the defect in the variables `(a, b, b', c)`.
fn jacobian(params: &DysonParams, g: &Block) -> Option<[[C64; 4]; 4]> {
    let inv = g.inverse()?;
    let m = |i: usize, j: usize| inv.0[2 * i + j];
    let zero = C64::new(0.0, 0.0);
    let mut jac = [[zero; 4]; 4];
    for var in 0..4 {
        let (i, j) = (var / 2, var % 2);
        for out in 0..4 {
            let (k, l) = (out / 2, out % 2);
            jac[out][var] = -m(k, i) * m(j, l);
        }
    }
    // S[G] couplings: D11 ← c, D12 ← ρ₀ b', D21 ← conj(ρ₀) b, D22 ← a
    jac[0][3] += 1.0;
    jac[1][2] += params.rho0;
    jac[2][1] += params.rho0.conj();
    jac[3][0] += 1.0;
    Some(jac)
}

/// Gaussian elimination with partial pivoting on a 4×4 complex system.
fn solve4(mut m: [[C64; 4]; 4], mut rhs: [C64; 4]) -> Option<[C64; 4]> {
    for col in 0..4 {
        let pivot = (col..4).max_by(|&x, &y| m[x][col].norm().total_cmp(&m[y][col].norm()))?;
        if m[pivot][col].norm() == 0.0 {
            return None;
        }
        m.swap(col, pivot);
        rhs.swap(col, pivot);
        for row in col + 1..4 {
            let f = m[row][col] / m[col][col];
            for k in col..4 {
                let t = m[col][k];
                m[row][k] -= f * t;
            }
            let t = rhs[col];
            rhs[row] -= f * t;
        }
    }
    let mut x = [C64::new(0.0, 0.0); 4];
    for row in (0..4).rev() {
        let mut acc = rhs[row];
        for k in row + 1..4 {
            acc -= m[row][k] * x[k];
        }
        x[row] = acc / m[row][row];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

struct Budget {
    used: usize,
    max: usize,
    last_residual: f64,
}

impl Budget {
    fn tick(&mut self) -> Result<()> {
        self.used += 1;
        if self.used > self.max {
            return Err(Error::NoConvergence {
                iterations: self.used - 1,
                residual: self.last_residual,
            });
        }
        Ok(())
    }
}

/// Damped fixed-point iteration `G ← (1-θ)G + θ·(-(S[G] + Λ)⁻¹)`, halving θ
/// whenever the residual grows.
fn damped_fixed_point(
    params: &DysonParams,
    v: C64,
    mut g: Block,
    target: f64,
    budget: &mut Budget,
) -> Result<Block> {
    let lam = spectral_block(params, v);
    let mut theta = 0.5;
    let mut res = residual(params, v, &g);
    while res > target {
        budget.tick()?;
        let s = self_energy(&g, params.rho0);
        let mut m = s;
        for i in 0..4 {
            m.0[i] += lam.0[i];
        }
        let Some(inv) = m.inverse() else {
            return Err(Error::NoConvergence {
                iterations: budget.used,
                residual: res,
            });
        };
        let mapped = Block(inv.0.map(|x| -x));
        let mut next = g;
        for i in 0..4 {
            next.0[i] = g.0[i] * (1.0 - theta) + mapped.0[i] * theta;
        }
        let next_res = residual(params, v, &next);
        if next_res > res && theta > 1.0 / 1024.0 {
            theta *= 0.5;
        }
        g = next;
        res = next_res;
        budget.last_residual = res;
    }
    Ok(g)
}

/// Newton iteration with backtracking that never leaves the set where `Im G`
/// is positive definite. Returns `None` if it stalls.
fn newton(
    params: &DysonParams,
    v: C64,
    mut g: Block,
    target: f64,
    budget: &mut Budget,
) -> Result<Option<Block>> {
    let mut res = residual(params, v, &g);
    budget.last_residual = res;
    for _ in 0..60 {
        if res <= target {
            return Ok(Some(g));
        }
        budget.tick()?;
        let Some(d) = defect_at(params, v, &g) else {
            return Ok(None);
        };
        let Some(jac) = jacobian(params, &g) else {
            return Ok(None);
        };
        let Some(step) = solve4(jac, d.0.map(|x| -x)) else {
            return Ok(None);
        };
        let step = Block(step);
        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let trial = g.add_scaled(&step, scale);
            let trial_res = residual(params, v, &trial);
            if trial.im_positive_definite() && trial_res < res {
                g = trial;
                res = trial_res;
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        budget.last_residual = res;
        if !accepted {
            return Ok((res <= target).then_some(g));
        }
    }
    Ok((res <= target).then_some(g))
}

/// Solves the Dyson equation at `params` to max-entry defect `tol`.
///
/// A damped fixed-point iteration started from `G = i·I` at `Im v = 1`
/// provides the positive-definite branch; Newton continuation in `Im v`
/// then carries it down to the requested spectral parameter.
pub fn solve(params: &DysonParams, tol: f64, max_iter: usize) -> Result<DysonSolution> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let params = DysonParams::new(params.z, params.v, params.rho0)?;
    let energy = params.v.re;
    let target_eta = params.v.im;
    let mut budget = Budget {
        used: 0,
        max: max_iter,
        last_residual: f64::INFINITY,
    };

    let mut eta = target_eta.max(START_ETA);
    let start_v = C64::new(energy, eta);
    let mut g = damped_fixed_point(
        &params,
        start_v,
        Block::identity_times(C64::new(0.0, 1.0)),
        1e-10,
        &mut budget,
    )?;

    let mut ratio: f64 = 0.25;
    loop {
        let last = eta <= target_eta;
        let next_eta = if last {
            target_eta
        } else {
            (eta * ratio).max(target_eta)
        };
        let is_final = next_eta <= target_eta;
        let step_target = if is_final { tol } else { tol.max(1e-10) };
        let v = C64::new(energy, next_eta);
        match newton(&params, v, g, step_target, &mut budget)? {
            Some(next) if next.im_positive_definite() => {
                g = next;
                eta = next_eta;
                if is_final {
                    break;
                }
                ratio = (ratio * ratio).max(0.05);
            }
            _ => {
                if last || ratio > 0.999 {
                    return Err(Error::NoConvergence {
                        iterations: budget.used,
                        residual: budget.last_residual,
                    });
                }
                ratio = ratio.sqrt();
            }
        }
    }

    let residual = residual(&params, params.v, &g);
    let [a, b, b_lower, c] = g.0;
    Ok(DysonSolution {
        a,
        b,
        b_lower,
        c,
        residual,
        iterations: budget.used,
        converged: residual <= tol && g.im_positive_definite(),
    })
}

/// Closed form without the exterior check. `z` must be off the branch cut.
pub fn limit_b_unchecked(z: C64, rho0: C64) -> C64 {
    if rho0.norm() < RHO0_ZERO {
        return -z.inv();
    }
    // √(z² - 4ρ₀) = s·√(w-2)·√(w+2) with s = √ρ₀, w = z/s: the cut is the
    // focal segment [-2s, 2s] and the product behaves like z at infinity.
    let s = rho0.sqrt();
    let w = z / s;
    let root = (w - 2.0).sqrt() * (w + 2.0).sqrt();
    (-w + root) / (s * 2.0)
}

/// `lim_{η↓0} conj(b)(z, iη)` for `z` outside `E(ρ₀)`.
pub fn limit_b(z: C64, rho0: C64) -> Result<C64> {
    let region = EllipticRegion::new(rho0, 1e-9)?;
    if region.contains(z) {
        return Err(Error::InsideRegion { z });
    }
    Ok(limit_b_unchecked(z, rho0))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SupportVerdict {
    Inside,
    Outside,
    /// `V` neither vanishes linearly in η nor stays bounded away from zero.
    Boundary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupportClassification {
    pub verdict: SupportVerdict,
    /// `(η, V(z, iη))` along the schedule.
    pub samples: Vec<(f64, f64)>,
}

/// Decides whether `z` lies in the limiting support from the decay of
/// `V(z, iη) = Im a` along a decreasing η schedule.
///
/// Outside: `V < 10η` at the last step, or `V` shrinks at least as fast as η
/// (up to a factor 2) over the last step. Inside: `V ≥ 10η` and at most
/// halves over the last step. Anything else is reported as boundary.
pub fn classify_support(z: C64, rho0: C64, eta_schedule: &[f64]) -> Result<SupportClassification> {
    if eta_schedule.len() < 2 {
        return Err(Error::InvalidArgument(
            "eta schedule needs at least two values".into(),
        ));
    }
    let mut samples = Vec::with_capacity(eta_schedule.len());
    for &eta in eta_schedule {
        let sol = solve(&DysonParams::imaginary(z, eta, rho0)?, 1e-11, 20_000)?;
        samples.push((eta, sol.v_im()));
    }
    let (eta_prev, v_prev) = samples[samples.len() - 2];
    let (eta_last, v_last) = samples[samples.len() - 1];
    let decay = v_last / v_prev;
    let linear = eta_last / eta_prev;
    let verdict = if v_last < 10.0 * eta_last || decay <= 2.0 * linear {
        SupportVerdict::Outside
    } else if decay >= 0.5 {
        SupportVerdict::Inside
    } else {
        SupportVerdict::Boundary
    };
    Ok(SupportClassification { verdict, samples })
}

fn density_indicator(z: C64, rho0: C64, energy: f64) -> Result<f64> {
    let sol = solve(
        &DysonParams::new(z, C64::new(energy, GAP_ETA), rho0)?,
        1e-11,
        20_000,
    )?;
    Ok(0.5 * (sol.a.im + sol.c.im))
}

/// Width of the spectral gap of the free Hermitization around 0, i.e. the
/// smallest singular value of the free shifted elliptic element. Zero when
/// `z` is in the support.
pub fn gap_estimate(z: C64, rho0: C64) -> Result<f64> {
    if density_indicator(z, rho0, 0.0)? > GAP_DENSITY_THRESHOLD {
        return Ok(0.0);
    }
    let step = 0.02;
    let e_max = z.norm() + 3.0;
    let mut lo = 0.0;
    let mut hi = None;
    let mut e = step;
    while e <= e_max {
        if density_indicator(z, rho0, e)? > GAP_DENSITY_THRESHOLD {
            hi = Some(e);
            break;
        }
        lo = e;
        e += step;
    }
    let Some(mut hi) = hi else {
        return Err(Error::Bracket(format!(
            "no spectral density found on [0, {e_max}] for z = {z}, rho0 = {rho0}"
        )));
    };
    while hi - lo > 1e-9 {
        let mid = 0.5 * (lo + hi);
        if density_indicator(z, rho0, mid)? > GAP_DENSITY_THRESHOLD {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub z: C64,
    /// `V` at the smallest η of the schedule.
    pub v: f64,
    /// Upper off-diagonal entry `b` at the smallest η.
    pub b: C64,
    pub verdict: SupportVerdict,
}

/// Classifies every point of `grid`, keeping the last-step solution.
pub fn sweep(grid: &[C64], rho0: C64, eta_schedule: &[f64]) -> Result<Vec<SweepRow>> {
    let eta = *eta_schedule
        .last()
        .ok_or_else(|| Error::InvalidArgument("empty eta schedule".into()))?;
    grid.iter()
        .map(|&z| {
            let class = classify_support(z, rho0, eta_schedule)?;
            let sol = solve(&DysonParams::imaginary(z, eta, rho0)?, 1e-11, 20_000)?;
            Ok(SweepRow {
                z,
                v: sol.v_im(),
                b: sol.b,
                verdict: class.verdict,
            })
        })
        .collect()
}

pub fn write_sweep_csv<W: Write>(mut out: W, rows: &[SweepRow]) -> std::io::Result<()> {
    writeln!(out, "z_re,z_im,V,b_re,b_im,verdict")?;
    for r in rows {
        let verdict = match r.verdict {
            SupportVerdict::Inside => "inside",
            SupportVerdict::Outside => "outside",
            SupportVerdict::Boundary => "boundary",
        };
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.z.re, r.z.im, r.v, r.b.re, r.b.im, verdict
        )?;
    }
    Ok(())
}
