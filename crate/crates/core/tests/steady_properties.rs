use habopt_core::steady::linearized_shift;
use habopt_core::{
    evolve, make_crenel_1d, make_random, residual_norm, solve_steady, ConstraintSet, EvolutionOptions, Grid,
    ResourceField, ScalarField, SteadyOptions,
};

fn opts() -> SteadyOptions<f64> {
    SteadyOptions::default()
}

fn battery(g: &Grid<f64>, c: ConstraintSet<f64>) -> Vec<(&'static str, ResourceField<f64>)> {
    vec![
        ("constant", ResourceField::constant(g, c)),
        ("crenel", make_crenel_1d(g, c, &[(0.2, 0.2 + c.m0())]).unwrap()),
        ("random", make_random(g, c, 11)),
    ]
}

#[test]
fn population_exceeds_mean_resource() {
    let g = Grid::<f64>::line(128).unwrap();
    let c = ConstraintSet::new(1.0, 0.4).unwrap();
    for seed in 0..20 {
        let m = make_random(&g, c, seed);
        for mu in [0.01, 1.0] {
            let s = solve_steady(&g, &m, mu, &opts()).unwrap();
            assert!(s.total_population >= 0.4 - 1e-12, "seed {seed} mu {mu}");
        }
    }
    let crenel = make_crenel_1d(&g, c, &[(0.0, 0.4)]).unwrap();
    let s = solve_steady(&g, &crenel, 1.0, &opts()).unwrap();
    assert!(s.total_population - 0.4 > 1e-6);
}

#[test]
fn population_identity_holds_discretely() {
    // dividing the equation by θ and summing: ∫θ = ∫m + μ Σ_faces (Δθ)² / (θ_i θ_j) · N²h
    let n = 200;
    let g = Grid::<f64>::line(n).unwrap();
    let c = ConstraintSet::new(1.0, 0.3).unwrap();
    let m = make_random(&g, c, 5);
    let mu = 0.2;
    let s = solve_steady(&g, &m, mu, &opts()).unwrap();
    let th = s.theta.values();
    let nf = n as f64;
    let faces: f64 = th.windows(2).map(|w| (w[1] - w[0]).powi(2) / (w[0] * w[1])).sum::<f64>() * nf;
    let rhs = 0.3 + mu * faces;
    assert!((s.total_population - rhs).abs() < 1e-9, "{} vs {rhs}", s.total_population);
}

#[test]
fn flattening_at_large_diffusion() {
    let g = Grid::<f64>::line(256).unwrap();
    let c = ConstraintSet::new(1.0, 0.4).unwrap();
    let m = make_crenel_1d(&g, c, &[(0.0, 0.4)]).unwrap();
    let excess: Vec<f64> = [1.0, 10.0, 100.0, 1000.0]
        .iter()
        .map(|&mu| (solve_steady(&g, &m, mu, &opts()).unwrap().total_population - 0.4).abs())
        .collect();
    for w in excess.windows(2) {
        assert!(w[1] < w[0], "{excess:?}");
    }
    assert!(excess[3] < 1e-3);
}

#[test]
fn maximum_principle_and_positivity() {
    let g = Grid::<f64>::square(16).unwrap();
    let c = ConstraintSet::new(2.0, 0.5).unwrap();
    for seed in 0..5 {
        let m = make_random(&g, c, seed);
        for mu in [0.003, 0.1, 3.0] {
            let s = solve_steady(&g, &m, mu, &opts()).unwrap();
            assert!(s.theta.min() > 0.0);
            assert!(s.theta.max() <= m.field().max() + 1e-8);
            assert!(s.residual_norm <= s.tolerance);
            assert!(residual_norm(&g, &m, mu, &s.theta).unwrap() <= s.tolerance);
        }
    }
}

#[test]
fn second_order_mesh_convergence_on_crenel() {
    let c = ConstraintSet::new(1.0, 0.5).unwrap();
    let f: Vec<f64> = [64usize, 128, 256, 512]
        .iter()
        .map(|&n| {
            let g = Grid::<f64>::line(n).unwrap();
            let m = make_crenel_1d(&g, c, &[(0.0, 0.5)]).unwrap();
            solve_steady(&g, &m, 1.0, &opts()).unwrap().total_population
        })
        .collect();
    let d: Vec<f64> = f.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    for w in d.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!(order >= 1.9, "order {order}, values {f:?}");
    }
}

#[test]
fn reflection_equivariance() {
    let g = Grid::<f64>::square(12).unwrap();
    let c = ConstraintSet::new(1.0, 0.35).unwrap();
    let m = make_random(&g, c, 3);
    let s = solve_steady(&g, &m, 0.05, &opts()).unwrap();
    for axis in 0..2 {
        let r = solve_steady(&g, &m.reflect(axis), 0.05, &opts()).unwrap();
        assert!(r.theta.max_abs_diff(&s.theta.reflect(axis)).unwrap() < 1e-9);
        assert!((r.total_population - s.total_population).abs() < 1e-10);
    }
}

#[test]
fn agrees_with_time_evolution() {
    let g = Grid::<f64>::line(256).unwrap();
    let c = ConstraintSet::new(1.0, 0.4).unwrap();
    for (name, m) in battery(&g, c) {
        for mu in [0.01, 0.1, 1.0, 10.0] {
            let s = solve_steady(&g, &m, mu, &opts()).unwrap();
            let e = evolve(&g, &m, mu, &ScalarField::constant(&g, 0.01), &EvolutionOptions::for_kappa(1.0)).unwrap();
            assert!(e.stationary);
            let d = e.u.max_abs_diff(&s.theta).unwrap();
            assert!(d <= 1e-6, "{name} mu {mu}: {d}");
        }
    }
}

#[test]
fn evolution_converges_from_above_and_below() {
    let g = Grid::<f64>::line(256).unwrap();
    let c = ConstraintSet::new(1.0, 0.5).unwrap();
    let m = make_crenel_1d(&g, c, &[(0.0, 0.5)]).unwrap();
    let o = EvolutionOptions::for_kappa(1.0);
    let lo = evolve(&g, &m, 1.0, &ScalarField::constant(&g, 0.01), &o).unwrap();
    let hi = evolve(&g, &m, 1.0, &ScalarField::constant(&g, 1.0), &o).unwrap();
    let s = solve_steady(&g, &m, 1.0, &opts()).unwrap();
    assert!(lo.u.max_abs_diff(&s.theta).unwrap() <= 1e-6);
    assert!(hi.u.max_abs_diff(&s.theta).unwrap() <= 1e-6);
    assert!(lo.u.max_abs_diff(&hi.u).unwrap() <= 2.0 * o.stop_tol / o.dt);
}

#[test]
fn evolution_preserves_order_and_positivity() {
    let g = Grid::<f64>::line(64).unwrap();
    let c = ConstraintSet::new(1.0, 0.4).unwrap();
    let m = make_random(&g, c, 8);
    for seed in 0..10u64 {
        let a = make_random(&g, ConstraintSet::new(1.0, 0.3).unwrap(), 100 + seed).into_field();
        let u0 = a.map(|v| 0.01 + 0.5 * v);
        let v0 = u0.zip_map(&a, |u, w| u + 0.1 * w).unwrap();
        for steps in [1usize, 5, 40] {
            let o = EvolutionOptions { max_steps: steps, stop_tol: 0.0, ..EvolutionOptions::for_kappa(1.0) };
            let u = evolve(&g, &m, 0.05, &u0, &o).unwrap().u;
            let v = evolve(&g, &m, 0.05, &v0, &o).unwrap().u;
            assert!(u.min() > 0.0);
            for (x, y) in u.values().iter().zip(v.values()) {
                assert!(*x <= *y + 1e-12);
            }
        }
    }
}

#[test]
fn newton_operator_is_the_linearization() {
    let g = Grid::<f64>::line(64).unwrap();
    let c = ConstraintSet::new(1.0, 0.4).unwrap();
    let m = make_random(&g, c, 2);
    let s = solve_steady(&g, &m, 0.3, &opts()).unwrap();
    let shift = linearized_shift(&m, &s.theta).unwrap();
    for (i, v) in shift.values().iter().enumerate() {
        assert_eq!(*v, m.values()[i] - 2.0 * s.theta.values()[i]);
    }
}

#[test]
fn single_precision_solve() {
    let g = Grid::<f32>::line(64).unwrap();
    let c = ConstraintSet::new(1.0f32, 0.4).unwrap();
    let m = make_crenel_1d(&g, c, &[(0.0, 0.4)]).unwrap();
    let s = solve_steady(&g, &m, 1.0f32, &SteadyOptions::default()).unwrap();
    let g64 = Grid::<f64>::line(64).unwrap();
    let m64 = make_crenel_1d(&g64, ConstraintSet::new(1.0, 0.4).unwrap(), &[(0.0, 0.4)]).unwrap();
    let s64 = solve_steady(&g64, &m64, 1.0, &opts()).unwrap();
    let d = (s.total_population as f64 - s64.total_population).abs();
    assert!(d < 1e-5, "{d} {} {}", s.residual_norm, s.iterations);
}

#[test]
fn trajectory_dump_is_json_lines() {
    let g = Grid::<f64>::line(16).unwrap();
    let c = ConstraintSet::new(1.0, 0.4).unwrap();
    let m = make_random(&g, c, 1);
    let o = EvolutionOptions { max_steps: 10, stop_tol: 0.0, ..EvolutionOptions::for_kappa(1.0) };
    let mut buf = Vec::new();
    let e = habopt_core::evolve_recording(&g, &m, 0.1, &ScalarField::constant(&g, 0.4), &o, 3, &mut buf).unwrap();
    let lines: Vec<serde_json::Value> =
        String::from_utf8(buf).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    let steps: Vec<u64> = lines.iter().map(|v| v["step"].as_u64().unwrap()).collect();
    assert_eq!(steps[..4], [0, 3, 6, 9]);
    let last: ScalarField<f64> = habopt_core::io::field_from_json(lines.last().unwrap()).unwrap();
    if *steps.last().unwrap() == e.steps as u64 {
        assert_eq!(last, e.u);
    }
}
