use habopt_core::resource::{default_bang_bang_tol, left_boundary_crenel, right_boundary_crenel};
use habopt_core::{
    bang_bang_fraction, distance_to_boundary_crenel, fragment_count_1d, make_crenel_1d, make_random,
    project_admissible, threshold_to_volume, ConstraintSet, Grid, ResourceField, ScalarField,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_field(grid: &Grid<f64>, seed: u64, lo: f64, hi: f64) -> ScalarField<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ScalarField::new(grid, (0..grid.total_cells()).map(|_| rng.gen_range(lo..hi)).collect()).unwrap()
}

/// Finds the shift by scanning a fine grid of candidate shifts and interpolating, without
/// any bisection.
fn scanned_shift(values: &[f64], kappa: f64, m0: f64) -> f64 {
    let mean = |t: f64| values.iter().map(|v| (v + t).clamp(0.0, kappa)).sum::<f64>() / values.len() as f64;
    let lo = -values.iter().cloned().fold(f64::MIN, f64::max) - 1.0;
    let hi = kappa - values.iter().cloned().fold(f64::MAX, f64::min) + 1.0;
    let steps = 200_000;
    let dt = (hi - lo) / steps as f64;
    let mut prev = (lo, mean(lo));
    for k in 1..=steps {
        let t = lo + k as f64 * dt;
        let m = mean(t);
        if m >= m0 {
            // mean is piecewise linear; refine linearly inside the bracketing step
            let mut a = prev.0;
            let mut b = t;
            for _ in 0..60 {
                let c = 0.5 * (a + b);
                if mean(c) < m0 { a = c } else { b = c }
            }
            return 0.5 * (a + b);
        }
        prev = (t, m);
    }
    hi
}

#[test]
fn projection_matches_scanned_kkt_structure() {
    let g = Grid::<f64>::line(64).unwrap();
    let c = ConstraintSet::new(1.0, 0.3).unwrap();
    for seed in 0..10 {
        let f = random_field(&g, seed, -1.5, 2.5);
        let p = project_admissible(&f, c);
        let t = scanned_shift(f.values(), 1.0, 0.3);
        assert!((g.integrate(p.field()).unwrap() - 0.3).abs() <= 1e-12);
        for (&fi, &pi) in f.values().iter().zip(p.values()) {
            let shifted = fi + t;
            if shifted < -1e-9 {
                assert_eq!(pi, 0.0);
            } else if shifted > 1.0 + 1e-9 {
                assert_eq!(pi, 1.0);
            } else if shifted > 1e-9 && shifted < 1.0 - 1e-9 {
                assert!((pi - shifted).abs() < 1e-8, "{pi} vs {shifted}");
            }
        }
    }
}

#[test]
fn projected_bang_bang_field_stays_bang_bang() {
    let g = Grid::<f64>::line(40).unwrap();
    let c = ConstraintSet::new(2.0, 0.5).unwrap();
    let m = make_crenel_1d(&g, c, &[(0.1, 0.2), (0.5, 0.65)]).unwrap();
    let p = project_admissible(m.field(), c);
    assert_eq!(bang_bang_fraction(&p, default_bang_bang_tol(c)), 1.0);
}

#[test]
fn threshold_maximizes_linear_objective() {
    let g = Grid::<f64>::line(64).unwrap();
    let c = ConstraintSet::new(1.0, 0.37).unwrap();
    let grad = random_field(&g, 99, -1.0, 1.0);
    let best = threshold_to_volume(&grad, c).unwrap();
    let top = grad.inner(best.field()).unwrap();
    for seed in 0..1000 {
        let m = make_random(&g, c, seed);
        assert!(top >= grad.inner(m.field()).unwrap() - 1e-14);
    }
    // and against crenels and single swaps of the thresholded field
    for a in 0..=26 {
        let a = a as f64 / 64.0;
        let m = make_crenel_1d(&g, c, &[(a, a + 0.37)]).unwrap();
        assert!(top >= grad.inner(m.field()).unwrap() - 1e-14);
    }
}

#[test]
fn boundary_crenels_are_mirror_images() {
    let g = Grid::<f64>::line(50).unwrap();
    let c = ConstraintSet::new(1.0, 0.33).unwrap();
    let left = left_boundary_crenel(&g, c).unwrap();
    let right = right_boundary_crenel(&g, c).unwrap();
    assert!(left.reflect(0).field().max_abs_diff(right.field()).unwrap() < 1e-12);
}

proptest! {
    #[test]
    fn projection_is_idempotent(seed in any::<u64>(), n in 2usize..80, m0 in 0.05f64..0.95, scale in 0.1f64..5.0) {
        let g = Grid::<f64>::line(n).unwrap();
        let c = ConstraintSet::new(1.0, m0).unwrap();
        let f = random_field(&g, seed, -scale, scale);
        let p = project_admissible(&f, c);
        prop_assert!(ResourceField::new(p.field().clone(), c).is_ok());
        let pp = project_admissible(p.field(), c);
        prop_assert!(pp.field().max_abs_diff(p.field()).unwrap() <= 1e-12);
    }

    #[test]
    fn projection_is_nonexpansive_towards_the_set(seed in any::<u64>(), n in 2usize..64, m0 in 0.05f64..0.95) {
        let g = Grid::<f64>::line(n).unwrap();
        let c = ConstraintSet::new(1.0, m0).unwrap();
        let f = random_field(&g, seed, -2.0, 3.0);
        let target = make_random(&g, c, seed.wrapping_add(1));
        let p = project_admissible(&f, c);
        let dist = |a: &ScalarField<f64>| {
            let d = a.zip_map(target.field(), |x, y| x - y).unwrap();
            d.inner(&d).unwrap().sqrt()
        };
        prop_assert!(dist(p.field()) <= dist(&f) + 1e-10);
    }

    #[test]
    fn reflection_preserves_1d_metrics(seed in any::<u64>(), n in 4usize..80) {
        let g = Grid::<f64>::line(n).unwrap();
        let c = ConstraintSet::new(1.0, 0.4).unwrap();
        let m = make_random(&g, c, seed);
        let r = m.reflect(0);
        prop_assert_eq!(fragment_count_1d(&m).unwrap(), fragment_count_1d(&r).unwrap());
        let d = distance_to_boundary_crenel(&m).unwrap();
        let dr = distance_to_boundary_crenel(&r).unwrap();
        prop_assert!((d - dr).abs() <= 1e-12);
    }

    #[test]
    fn reflection_swaps_nearest_boundary_crenel(n in 8usize..80, a in 0.0f64..0.3) {
        let g = Grid::<f64>::line(n).unwrap();
        let c = ConstraintSet::new(1.0, 0.4).unwrap();
        let m = make_crenel_1d(&g, c, &[(a, a + 0.4)]).unwrap();
        let left = left_boundary_crenel(&g, c).unwrap();
        let right = right_boundary_crenel(&g, c).unwrap();
        let r = m.reflect(0);
        prop_assert!((m.l1_distance(&left).unwrap() - r.l1_distance(&right).unwrap()).abs() <= 1e-12);
        prop_assert!((m.l1_distance(&right).unwrap() - r.l1_distance(&left).unwrap()).abs() <= 1e-12);
    }
}
