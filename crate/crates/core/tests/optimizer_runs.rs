use habopt_core::resource::{left_boundary_crenel, right_boundary_crenel};
use habopt_core::{
    bang_bang_fraction, distance_to_boundary_crenel, make_crenel_1d, make_random, multistart, optimize,
    project_admissible, solve_steady, ConstraintSet, Grid, OptimOptions, ResourceField, ScalarField, Strategy,
    SteadyOptions, Termination,
};

fn cs() -> ConstraintSet<f64> {
    ConstraintSet::new(1.0, 0.4).unwrap()
}

fn f(g: &Grid<f64>, m: &ResourceField<f64>, mu: f64) -> f64 {
    solve_steady(g, m, mu, &SteadyOptions::default()).unwrap().total_population
}

/// Largest `F` over single crenels at every cell-aligned offset.
fn crenel_scan(g: &Grid<f64>, c: ConstraintSet<f64>, mu: f64) -> f64 {
    let n = g.cells_per_axis()[0];
    let len = c.volume_fraction();
    (0..n)
        .map(|k| k as f64 / n as f64)
        .filter(|a| a + len <= 1.0 + 1e-12)
        .map(|a| f(g, &make_crenel_1d(g, c, &[(a, (a + len).min(1.0))]).unwrap(), mu))
        .fold(f64::MIN, f64::max)
}

fn assert_feasible(m: &ResourceField<f64>) {
    let c = m.constraints();
    assert!(m.values().iter().all(|&v| v >= -1e-12 && v <= c.kappa() + 1e-12));
    assert!((m.grid().integrate(m.field()).unwrap() - c.m0()).abs() <= 1e-10);
}

#[test]
fn left_perturbation_converges_to_left_crenel() {
    let g = Grid::<f64>::line(256).unwrap();
    let c = cs();
    let bump = ScalarField::from_fn(&g, |x| 0.4 + 0.2 * (-(x[0] / 0.1).powi(2)).exp()).unwrap();
    let init = project_admissible(&bump, c);
    for strategy in [Strategy::Thresholding, Strategy::ProjectedGradient] {
        let run = optimize(&g, c, 1.0, &init, &OptimOptions { strategy, ..Default::default() }).unwrap();
        let left = left_boundary_crenel(&g, c).unwrap();
        assert!(run.final_m.l1_distance(&left).unwrap() <= 2.0 / 256.0, "{strategy:?}");
        assert!(distance_to_boundary_crenel(&run.final_m).unwrap() <= 2.0 / 256.0);
        assert!(run.bang_bang >= 1.0 - 2.0 / 256.0);
    }
}

#[test]
fn boundary_crenel_is_a_fixed_point() {
    let g = Grid::<f64>::line(64).unwrap();
    let c = cs();
    let left = left_boundary_crenel(&g, c).unwrap();
    let run = optimize(&g, c, 1.0, &left, &OptimOptions::default()).unwrap();
    assert!(run.iterations <= 3);
    assert_eq!(run.termination, Termination::Converged);
    assert!(run.final_m.l1_distance(&left).unwrap() <= 1e-12);
}

#[test]
fn no_single_cell_swap_improves_the_boundary_crenel() {
    let g = Grid::<f64>::line(64).unwrap();
    let c = cs();
    let left = left_boundary_crenel(&g, c).unwrap();
    let base = f(&g, &left, 1.0);
    let v = left.values();
    for i in 0..64 {
        for j in (i + 1)..64 {
            if v[i] == v[j] {
                continue;
            }
            let mut w = v.to_vec();
            w.swap(i, j);
            let swapped = ResourceField::new(ScalarField::new(&g, w).unwrap(), c).unwrap();
            assert!(f(&g, &swapped, 1.0) <= base + 1e-12, "swap {i} {j}");
        }
    }
}

#[test]
fn centered_start_never_loses_population() {
    let g = Grid::<f64>::line(128).unwrap();
    let c = cs();
    let centered = make_crenel_1d(&g, c, &[(0.3, 0.7)]).unwrap();
    let run = optimize(&g, c, 1.0, &centered, &OptimOptions::default()).unwrap();
    assert!(run.final_f >= f(&g, &centered, 1.0));
}

#[test]
fn ascent_is_monotone_and_feasible() {
    let g = Grid::<f64>::line(64).unwrap();
    let c = cs();
    for strategy in [Strategy::Thresholding, Strategy::ProjectedGradient] {
        for seed in 0..6 {
            for mu in [0.003, 0.1, 3.0] {
                let init = make_random(&g, c, seed);
                let run = optimize(&g, c, mu, &init, &OptimOptions { strategy, ..Default::default() }).unwrap();
                assert!(run.f_history.windows(2).all(|w| w[1] >= w[0]), "{strategy:?} {seed} {mu}");
                assert_eq!(*run.f_history.last().unwrap(), run.final_f);
                assert_feasible(&run.final_m);
            }
        }
    }
}

#[test]
fn mirrored_start_gives_mirrored_result() {
    let g = Grid::<f64>::line(64).unwrap();
    let c = cs();
    for seed in 1..5 {
        let init = make_random(&g, c, seed);
        let a = optimize(&g, c, 1.0, &init, &OptimOptions::default()).unwrap();
        let b = optimize(&g, c, 1.0, &init.reflect(0), &OptimOptions::default()).unwrap();
        assert!((a.final_f - b.final_f).abs() <= 1e-8, "seed {seed}");
    }
}

#[test]
fn multistart_is_deterministic() {
    let g = Grid::<f64>::line(64).unwrap();
    let o = OptimOptions { seed: 17, ..Default::default() };
    let a = multistart(&g, cs(), 0.5, 4, &o).unwrap();
    let b = multistart(&g, cs(), 0.5, 4, &o).unwrap();
    assert_eq!(a, b);
    let one = multistart(&g, cs(), 0.5, 1, &o).unwrap();
    let direct = optimize(&g, cs(), 0.5, &ResourceField::constant(&g, cs()), &o).unwrap();
    assert_eq!(one.runs, vec![direct]);
}

#[test]
fn multistart_winner_matches_crenel_scan() {
    let g = Grid::<f64>::line(64).unwrap();
    let c = cs();
    for mu in [0.3, 1.0, 10.0] {
        let ms = multistart(&g, c, mu, 10, &OptimOptions::default()).unwrap();
        let w = ms.winner();
        let scan = crenel_scan(&g, c, mu);
        assert!((w.final_f - scan).abs() <= 1e-8, "mu {mu}: {} vs {scan}", w.final_f);
        let left = left_boundary_crenel(&g, c).unwrap();
        let right = right_boundary_crenel(&g, c).unwrap();
        let d = w.final_m.l1_distance(&left).unwrap().min(w.final_m.l1_distance(&right).unwrap());
        assert!(d <= 4.0 / 64.0);
        assert!(bang_bang_fraction(&w.final_m, 1e-3) >= 1.0 - 2.0 / 64.0);
    }
}

#[test]
fn single_precision_optimization() {
    let g = Grid::<f32>::line(32).unwrap();
    let c = ConstraintSet::new(1.0f32, 0.4).unwrap();
    let run = optimize(&g, c, 1.0f32, &make_random(&g, c, 3), &OptimOptions::default()).unwrap();
    assert!(run.f_history.windows(2).all(|w| w[1] >= w[0]));
    assert!(run.final_f > 0.4);
}
