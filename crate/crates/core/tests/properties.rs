use proptest::prelude::*;

use elliptic_outliers::dyson::limit_b;
use elliptic_outliers::ensemble::{
    sample_matrix, truncate, EnsembleSpec, EntryModel, Family, GraphSpec, SelfLoops,
};
use elliptic_outliers::geometry::EllipticRegion;
use elliptic_outliers::harness::wilson_interval;
use elliptic_outliers::outliers::{
    det_f, det_f_full, match_outliers, winding_number, Perturbation,
};
use elliptic_outliers::products::{linearization_defect, sample_product, ProductSpec};
use elliptic_outliers::{CMat, C64};

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn rho_strategy() -> impl Strategy<Value = C64> {
    (0.0..0.95f64, 0.0..std::f64::consts::TAU).prop_map(|(r, t)| C64::from_polar(r, t))
}

fn exterior_point() -> impl Strategy<Value = C64> {
    (1.05..4.0f64, 0.0..std::f64::consts::TAU).prop_map(|(r, t)| C64::from_polar(r, t))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn image_of_unit_disk_is_inside(rho in rho_strategy(), r in 0.0..0.999f64, t in 0.0..std::f64::consts::TAU) {
        let x = C64::from_polar(r, t);
        let region = EllipticRegion::new(rho, 0.0).unwrap();
        prop_assert!(region.contains(x + rho * x.conj()));
    }

    #[test]
    fn joukowski_exterior_is_outside(rho in rho_strategy(), x in exterior_point()) {
        // z = x + ρ/x with |x| > 1 lies outside E(ρ), and b̄(z) = -1/x maps it into the unit disk
        let z = x + rho / x;
        let region = EllipticRegion::new(rho, 0.0).unwrap();
        prop_assert!(!region.contains(z));
        let b = limit_b(z, rho).unwrap();
        prop_assert!((b + 1.0 / x).norm() < 1e-9 * (1.0 + x.norm()), "b = {b}, x = {x}");
        prop_assert!(b.norm() < 1.0);
        prop_assert!((rho * b * b + z * b + 1.0).norm() < 1e-9);
    }

    #[test]
    fn fattening_is_monotone(rho in rho_strategy(), z in exterior_point(), e1 in 0.0..1.0f64, e2 in 0.0..1.0f64) {
        let (lo, hi) = if e1 < e2 { (e1, e2) } else { (e2, e1) };
        let small = EllipticRegion::new(rho, lo).unwrap();
        if small.contains(z) {
            prop_assert!(small.fattened(hi).contains(z));
        }
    }

    #[test]
    fn fattened_boundary_is_at_distance_epsilon(rho in rho_strategy(), eps in 0.05..1.0f64) {
        let region = EllipticRegion::new(rho, eps).unwrap();
        for z in region.boundary_points(16).unwrap() {
            prop_assert!((region.distance(z) - eps).abs() < 1e-6, "{} vs {eps}", region.distance(z));
        }
    }

    #[test]
    fn wilson_contains_estimate(total in 1u64..500, frac in 0.0..=1.0f64) {
        let s = (frac * total as f64).round() as u64;
        let (lo, hi) = wilson_interval(s, total);
        let p = s as f64 / total as f64;
        prop_assert!(0.0 <= lo && lo <= p + 1e-12 && p <= hi + 1e-12 && hi <= 1.0);
    }

    #[test]
    fn matching_respects_cap(
        obs in prop::collection::vec((-3.0..3.0f64, -3.0..3.0f64), 0..6),
        pred in prop::collection::vec((-3.0..3.0f64, -3.0..3.0f64), 0..6),
        cap in 0.01..2.0f64,
    ) {
        let obs: Vec<C64> = obs.into_iter().map(|(a, b)| c(a, b)).collect();
        let pred: Vec<C64> = pred.into_iter().map(|(a, b)| c(a, b)).collect();
        let r = match_outliers(&obs, &pred, cap);
        prop_assert!(r.matches.iter().all(|m| m.distance <= cap));
        prop_assert_eq!(r.matches.len() + r.unmatched_observed.len(), obs.len());
        prop_assert_eq!(r.matches.len() + r.unmatched_predictions.len(), pred.len());
    }

    #[test]
    fn winding_counts_enclosed_roots(
        roots in prop::collection::vec((-2.0..2.0f64, -2.0..2.0f64), 1..5),
        radius in 0.5..2.5f64,
    ) {
        let roots: Vec<C64> = roots.into_iter().map(|(a, b)| c(a, b)).collect();
        // skip circles passing too close to a root
        prop_assume!(roots.iter().all(|r| (r.norm() - radius).abs() > 0.05));
        let f = |z: C64| Ok(roots.iter().map(|r| z - r).product::<C64>());
        let expect = roots.iter().filter(|r| r.norm() < radius).count() as i64;
        prop_assert_eq!(winding_number(&f, c(0.0, 0.0), radius).unwrap(), expect);
    }

    #[test]
    fn winding_is_additive_over_disjoint_circles(a in (-2.0..-0.6f64, -1.0..1.0f64), b in (0.6..2.0f64, -1.0..1.0f64)) {
        let (a, b) = (c(a.0, a.1), c(b.0, b.1));
        let f = |z: C64| Ok((z - a) * (z - b) * (z - b));
        let left = winding_number(&f, a, 0.5).unwrap();
        let right = winding_number(&f, b, 0.5).unwrap();
        let both = winding_number(&f, c(0.0, 0.0), 5.0).unwrap();
        prop_assert_eq!(left + right, both);
        prop_assert_eq!(right, 2);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn sampling_is_seeded(seed in any::<u64>(), trial in 0u64..1000) {
        let spec = EnsembleSpec::new(GraphSpec::circulant_band(24, 3, SelfLoops::All), EntryModel::gaussian_complex(c(0.0, 0.0)));
        let a = sample_matrix(&spec, seed, trial).unwrap();
        let b = sample_matrix(&spec, seed, trial).unwrap();
        prop_assert_eq!(a.entries, b.entries);
    }

    #[test]
    fn symmetric_when_rho_is_one(seed in any::<u64>()) {
        let spec = EnsembleSpec::new(GraphSpec::circulant_band(30, 4, SelfLoops::All), EntryModel::gaussian_real(1.0));
        let x = sample_matrix(&spec, seed, 0).unwrap().entries;
        for i in 0..30 {
            for j in 0..30 {
                prop_assert_eq!(x[(i, j)], x[(j, i)]);
            }
        }
    }

    #[test]
    fn support_follows_graph(seed in any::<u64>(), rho in -1.0..1.0f64) {
        let spec = EnsembleSpec::new(GraphSpec::circulant_band(30, 4, SelfLoops::None), EntryModel::gaussian_real(rho));
        let x = sample_matrix(&spec, seed, 1).unwrap().entries;
        for i in 0..30usize {
            for j in 0..30usize {
                let gap = (i as i64 - j as i64).rem_euclid(30).min((j as i64 - i as i64).rem_euclid(30));
                if gap == 0 || gap > 4 {
                    prop_assert_eq!(x[(i, j)], c(0.0, 0.0));
                }
            }
        }
    }

    #[test]
    fn truncation_is_idempotent(seed in any::<u64>(), level in 5.0..15.0f64) {
        // thresholds between 1.2 and 3.6, above the smallest magnitude of the law
        let mut entries = EntryModel::new(Family::HeavyP);
        entries.p = Some(5.0);
        let spec = EnsembleSpec::new(GraphSpec::circulant_band(64, 8, SelfLoops::None), entries);
        let s = sample_matrix(&spec, seed, 0).unwrap();
        let (once, _) = truncate(&s, level).unwrap();
        let (twice, _) = truncate(&once, level).unwrap();
        prop_assert_eq!(once.entries, twice.entries);
        prop_assert_eq!(once.scale, twice.scale);
    }

    #[test]
    fn determinant_sides_agree(seed in any::<u64>(), theta in exterior_point(), z in exterior_point()) {
        let spec = EnsembleSpec::new(GraphSpec::circulant_band(20, 3, SelfLoops::None), EntryModel::gaussian_real(0.3));
        let x = sample_matrix(&spec, seed, 0).unwrap().entries;
        let a = CMat::from_fn(20, 2, |i, j| c(((i + j) % 3) as f64 * 0.2, 0.1 * j as f64));
        let b = CMat::from_fn(2, 20, |i, j| c(0.1, ((i * j) % 5) as f64 * 0.1) * theta);
        let p = Perturbation::from_factors(a, b).unwrap();
        let z = z * 3.0;
        let small = det_f(z, &x, &p).unwrap();
        let full = det_f_full(z, &x, &p).unwrap();
        prop_assert!((small - full).norm() < 1e-9 * (1.0 + small.norm()));
    }

    #[test]
    fn linearization_powers_are_product_eigenvalues(seed in any::<u64>()) {
        let f = EnsembleSpec::new(GraphSpec::complete(12, SelfLoops::All), EntryModel::gaussian_complex(c(0.0, 0.0)));
        let spec = ProductSpec { factors: vec![f.clone(), f.clone(), f], perturbations: None, epsilon: 0.1 };
        let s = sample_product(&spec, seed, 0).unwrap();
        prop_assert!(linearization_defect(&s).unwrap() < 1e-9);
    }
}
