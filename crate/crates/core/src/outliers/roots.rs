//! Argument-principle counting and Newton refinement for analytic functions
//! given only as evaluators `z ↦ f(z)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::geometry::EllipticRegion;
use crate::{CMat, Error, Result, C64};

pub const CONTOUR_POINTS: usize = 64;
pub const ROOT_TOL: f64 = 1e-10;

/// `|f|` below this on the contour means the contour runs through a root.
const CONTOUR_FLOOR: f64 = 1e-8;
/// Largest phase step tolerated between neighbouring contour points.
const MAX_PHASE_STEP: f64 = PI / 2.0;
const NEWTON_MAX_ITER: usize = 60;
const CLUSTER_GAP: f64 = 1e-3;

/// Roots enclosed by one circle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RootCluster {
    pub seed: C64,
    /// Radius actually used (perturbed once if the first contour hit a root).
    pub radius: f64,
    pub winding: i64,
    /// Refined roots, repeated according to multiplicity.
    pub roots: Vec<C64>,
}

fn circle(center: C64, radius: f64, m: usize) -> Vec<C64> {
    (0..m)
        .map(|k| center + C64::from_polar(radius, 2.0 * PI * k as f64 / m as f64))
        .collect()
}

/// Phase increments of `f` along the closed polyline through `values`.
/// `None` if some step exceeds the phase tolerance.
fn phase_steps(values: &[C64]) -> Option<Vec<f64>> {
    let m = values.len();
    let steps: Vec<f64> = (0..m)
        .map(|k| (values[(k + 1) % m] / values[k]).arg())
        .collect();
    if steps.iter().any(|s| s.abs() > MAX_PHASE_STEP) {
        None
    } else {
        Some(steps)
    }
}

fn evaluate<F>(f: &F, points: &[C64]) -> Result<Option<Vec<C64>>>
where
    F: Fn(C64) -> Result<C64>,
{
    let mut values = Vec::with_capacity(points.len());
    for &z in points {
        let v = f(z)?;
        if !(v.norm() >= CONTOUR_FLOOR) {
            return Ok(None);
        }
        values.push(v);
    }
    Ok(Some(values))
}

struct Contour {
    radius: f64,
    points: Vec<C64>,
    values: Vec<C64>,
    steps: Vec<f64>,
}

/// 64-point phase tracking with one doubling; the radius is enlarged by 10%
/// once if the contour comes too close to a root.
fn trace_circle<F>(f: &F, center: C64, radius: f64) -> Result<Contour>
where
    F: Fn(C64) -> Result<C64>,
{
    for r in [radius, 1.1 * radius] {
        let mut hit = false;
        for m in [CONTOUR_POINTS, 2 * CONTOUR_POINTS] {
            let points = circle(center, r, m);
            let Some(values) = evaluate(f, &points)? else {
                hit = true;
                break;
            };
            if let Some(steps) = phase_steps(&values) {
                return Ok(Contour {
                    radius: r,
                    points,
                    values,
                    steps,
                });
            }
        }
        if !hit {
            // phase still jumps after doubling: a root sits on or next to the contour
            log::debug!("phase tracking failed around {center} at radius {r}");
        }
    }
    Err(Error::ContourHitsRoot { center, radius })
}

/// Winding number of `f` around the circle `∂B(center, radius)`.
pub fn winding_number<F>(f: &F, center: C64, radius: f64) -> Result<i64>
where
    F: Fn(C64) -> Result<C64>,
{
    let c = trace_circle(f, center, radius)?;
    Ok((c.steps.iter().sum::<f64>() / (2.0 * PI)).round() as i64)
}

/// Winding number of `f` along a closed polygon, with each edge subdivided
/// until the phase steps are below tolerance.
pub fn polygon_winding<F>(f: &F, vertices: &[C64]) -> Result<i64>
where
    F: Fn(C64) -> Result<C64>,
{
    if vertices.len() < 3 {
        return Err(Error::InvalidArgument(
            "a polygon needs at least 3 vertices".into(),
        ));
    }
    let mut total = 0.0;
    for k in 0..vertices.len() {
        let (a, b) = (vertices[k], vertices[(k + 1) % vertices.len()]);
        total += edge_phase(f, a, b, f(a)?, f(b)?, 0)?;
    }
    Ok((total / (2.0 * PI)).round() as i64)
}

fn edge_phase<F>(f: &F, a: C64, b: C64, fa: C64, fb: C64, depth: usize) -> Result<f64>
where
    F: Fn(C64) -> Result<C64>,
{
    if !(fa.norm() >= CONTOUR_FLOOR) || !(fb.norm() >= CONTOUR_FLOOR) {
        return Err(Error::ContourHitsRoot {
            center: (a + b) / 2.0,
            radius: (b - a).norm() / 2.0,
        });
    }
    let step = (fb / fa).arg();
    if (depth >= 4 && step.abs() <= PI / 4.0) || depth >= 24 {
        if step.abs() > PI / 2.0 {
            return Err(Error::ContourHitsRoot {
                center: (a + b) / 2.0,
                radius: (b - a).norm() / 2.0,
            });
        }
        return Ok(step);
    }
    let mid = (a + b) / 2.0;
    let fm = f(mid)?;
    Ok(edge_phase(f, a, mid, fa, fm, depth + 1)? + edge_phase(f, mid, b, fm, fb, depth + 1)?)
}

/// Power sums `Σ r_j^p`, `p = 1..=count`, of the roots inside the traced
/// circle, from `∮ z^p d(log f)` with midpoint weights.
fn power_sums(c: &Contour, center: C64, count: usize) -> Vec<C64> {
    let m = c.points.len();
    let mut sums = vec![C64::new(0.0, 0.0); count];
    for k in 0..m {
        let next = (k + 1) % m;
        let dlog = C64::new(
            (c.values[next].norm() / c.values[k].norm()).ln(),
            c.steps[k],
        );
        let theta = 2.0 * PI * (k as f64 + 0.5) / m as f64;
        let mid = C64::from_polar(c.radius, theta);
        let mut zp = C64::new(1.0, 0.0);
        for s in sums.iter_mut() {
            zp *= mid;
            *s += zp * dlog;
        }
    }
    // shift back from the centred variable
    let local: Vec<C64> = sums
        .into_iter()
        .map(|s| s / C64::new(0.0, 2.0 * PI))
        .collect();
    let roots = roots_from_power_sums(&local);
    roots.into_iter().map(|r| r + center).collect()
}

/// Roots of the monic polynomial whose roots have the given power sums (Newton identities).
fn roots_from_power_sums(p: &[C64]) -> Vec<C64> {
    let k = p.len();
    if k == 0 {
        return Vec::new();
    }
    // elementary symmetric polynomials e_1..e_k
    let mut e = vec![C64::new(1.0, 0.0)];
    for j in 1..=k {
        let mut acc = C64::new(0.0, 0.0);
        for i in 1..=j {
            let sign = if i % 2 == 1 { 1.0 } else { -1.0 };
            acc += e[j - i] * p[i - 1] * sign;
        }
        e.push(acc / j as f64);
    }
    if k == 1 {
        return vec![e[1]];
    }
    // companion matrix of z^k - e1 z^{k-1} + e2 z^{k-2} - ...
    let coeff = |j: usize| if j % 2 == 1 { e[j] } else { -e[j] };
    let comp = CMat::from_fn(k, k, |i, j| {
        if i == 0 {
            coeff(j + 1)
        } else if i == j + 1 {
            C64::new(1.0, 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    });
    comp.eigenvalues()
        .unwrap_or_else(|_| vec![e[1] / k as f64; k])
}

/// Newton iteration with a central-difference derivative and step
/// `m·f/f'` for a root of known multiplicity `m`.
pub fn newton<F>(f: &F, z0: C64, multiplicity: usize) -> Result<C64>
where
    F: Fn(C64) -> Result<C64>,
{
    let mut z = z0;
    let mut fz = f(z)?;
    for _ in 0..NEWTON_MAX_ITER {
        if fz == C64::new(0.0, 0.0) {
            return Ok(z);
        }
        let h = 1e-6 * (1.0 + z.norm());
        let deriv = (f(z + h)? - f(z - h)?) / (2.0 * h);
        if deriv == C64::new(0.0, 0.0) || !deriv.re.is_finite() || !deriv.im.is_finite() {
            break;
        }
        let step = fz / deriv * multiplicity as f64;
        let next = z - step;
        let f_next = f(next)?;
        if step.norm() <= ROOT_TOL * (1.0 + z.norm()) {
            return Ok(if f_next.norm() <= fz.norm() { next } else { z });
        }
        if f_next.norm() > 2.0 * fz.norm() && step.norm() < 1e-6 {
            // rounding floor reached near a multiple root
            return Ok(z);
        }
        z = next;
        fz = f_next;
    }
    Ok(z)
}

fn refine<F>(f: &F, c: &Contour, center: C64, winding: usize) -> Result<Vec<C64>>
where
    F: Fn(C64) -> Result<C64>,
{
    let guesses = power_sums(c, center, winding);
    let mut roots = Vec::with_capacity(winding);
    let mut used = vec![false; guesses.len()];
    for i in 0..guesses.len() {
        if used[i] {
            continue;
        }
        let members: Vec<usize> = (i..guesses.len())
            .filter(|&j| {
                !used[j] && (guesses[j] - guesses[i]).norm() < CLUSTER_GAP * c.radius.max(1.0)
            })
            .collect();
        let mult = members.len();
        let start = members.iter().map(|&j| guesses[j]).sum::<C64>() / mult as f64;
        for &j in &members {
            used[j] = true;
        }
        let mut root = newton(f, start, mult)?;
        if (root - center).norm() > c.radius {
            root = start;
        }
        roots.extend(std::iter::repeat_n(root, mult));
    }
    Ok(roots)
}

/// For every seed: the winding number of `f` around `∂B(seed, radius)` and
/// the refined roots it encloses.
pub fn find_roots<F>(
    f: &F,
    seeds: &[C64],
    region: &EllipticRegion,
    radius: f64,
) -> Result<Vec<RootCluster>>
where
    F: Fn(C64) -> Result<C64>,
{
    if !(radius > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "radius must be positive, got {radius}"
        )));
    }
    let mut out = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        if region.contains(seed) {
            return Err(Error::InsideRegion { z: seed });
        }
        let contour = trace_circle(f, seed, radius)?;
        let winding = (contour.steps.iter().sum::<f64>() / (2.0 * PI)).round() as i64;
        let roots = if winding > 0 {
            refine(f, &contour, seed, winding as usize)?
        } else {
            Vec::new()
        };
        out.push(RootCluster {
            seed,
            radius: contour.radius,
            winding,
            roots,
        });
    }
    Ok(out)
}

/// Newton from every point of a square grid of half-width `extent` and the
/// given spacing, plus the extra seeds; returns the distinct roots found
/// inside the square and outside `region`. Seeds where `f` cannot be evaluated are skipped.
pub fn scan_roots<F>(
    f: &F,
    region: &EllipticRegion,
    extent: f64,
    spacing: f64,
    extra_seeds: &[C64],
) -> Vec<C64>
where
    F: Fn(C64) -> Result<C64>,
{
    let steps = (2.0 * extent / spacing).ceil() as i64;
    let mut seeds: Vec<C64> = extra_seeds.to_vec();
    for i in 0..=steps {
        for j in 0..=steps {
            let z = C64::new(-extent + i as f64 * spacing, -extent + j as f64 * spacing);
            if !region.contains(z) {
                seeds.push(z);
            }
        }
    }
    let mut roots: Vec<C64> = Vec::new();
    for s in seeds {
        let Ok(r) = newton(f, s, 1) else { continue };
        let Ok(fr) = f(r) else { continue };
        let in_box = r.re.abs() <= extent && r.im.abs() <= extent;
        if !in_box || !(fr.norm() < 1e-8) || region.contains(r) {
            continue;
        }
        if roots
            .iter()
            .all(|&q| (q - r).norm() > 1e-7 * (1.0 + r.norm()))
        {
            roots.push(r);
        }
    }
    roots
}
