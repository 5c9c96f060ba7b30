//! Scenario implementations. Each writes its artifacts and returns a JSON summary for the
//! manifest; the computational pieces are public for reuse by the acceptance suite.

use habopt_core::io::{gradient_json, optim_run_json, resource_json, steady_json};
use habopt_core::resource::{default_bang_bang_tol, left_boundary_crenel};
use habopt_core::{
    bang_bang_fraction, distance_to_boundary_crenel, fragment_count_1d, make_crenel_1d, monotone_concentration_defect,
    multistart, optimize, solve_adjoint, solve_steady, ConstraintSet, Grid, Multistart, OptimRun,
    ResourceField, ScalarField, SteadyOptions, SteadySolution,
};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::{Resolved, Scenario};
use crate::output::{num, Artifacts, Echo};
use crate::svg;
use crate::RunError;

/// Margin by which a two-sided crenel must beat the best single crenel to count as a
/// fragmentation witness.
pub const FRAGMENTATION_MARGIN: f64 = 1e-8;

pub fn run(r: &Resolved, out: &mut Artifacts) -> Result<Value, RunError> {
    match r.scenario {
        Scenario::Solve => solve(r, out),
        Scenario::Optimize => optimize_one(r, out),
        Scenario::MuSweep => mu_sweep(r, out),
        Scenario::CrenelStudy1d => crenel_study_1d(r, out),
        Scenario::MuStarEstimate => mu_star_estimate(r, out),
        Scenario::Concentration2d => concentration_2d(r, out),
        Scenario::FragmentationSmallMu => fragmentation_small_mu(r, out),
    }
}

fn echo(r: &Resolved) -> Echo {
    Echo {
        kappa: r.constraints.kappa(),
        m0: r.constraints.m0(),
        n: r.cells(),
        seed: r.seed,
    }
}

/// Profile plot (1D) or `m`/`θ` heatmaps (2D) of a resource field and its steady state.
fn figures(out: &mut Artifacts, stem: &str, m: &ResourceField<f64>, theta: &ScalarField<f64>, title: &str) -> std::io::Result<()> {
    let g = m.grid();
    match g.dim() {
        1 => {
            let x = svg::centers(g.total_cells());
            let series = vec![
                ("m".to_string(), m.values().to_vec()),
                ("theta".to_string(), theta.values().to_vec()),
            ];
            out.write_bytes(&format!("{stem}.svg"), svg::profiles(&x, &series, title).as_bytes())
        }
        2 => {
            let kappa = m.constraints().kappa();
            let hm = svg::heatmap(m.field(), 0.0, kappa, &format!("m, {title}"));
            out.write_bytes(&format!("{stem}_m.svg"), hm.as_bytes())?;
            let ht = svg::heatmap(theta, 0.0, kappa, &format!("theta, {title}"));
            out.write_bytes(&format!("{stem}_theta.svg"), ht.as_bytes())
        }
        _ => Ok(()),
    }
}

fn solve(r: &Resolved, out: &mut Artifacts) -> Result<Value, RunError> {
    let m = r.resource.as_ref().expect("resolved resource");
    out.write_json("resource.json", &resource_json(m))?;
    let t = out.table(
        "solve.csv",
        &["total_population", "excess", "residual_norm", "tolerance", "iterations", "restarted", "theta_min", "theta_max"],
    );
    let sol = solve_steady(&r.grid, m, r.mu, &r.steady)?;
    let e = echo(r);
    out.rows(t).push(
        &e,
        r.mu,
        vec![
            num(sol.total_population),
            num(sol.total_population - r.constraints.m0()),
            num(sol.residual_norm),
            num(sol.tolerance),
            sol.iterations.to_string(),
            sol.restarted.to_string(),
            num(sol.theta.min()),
            num(sol.theta.max()),
        ],
    );
    out.write_json("solution.json", &steady_json(&sol))?;
    let bundle = solve_adjoint(&r.grid, m, r.mu, &sol)?;
    out.write_json("gradient.json", &gradient_json(&bundle))?;
    figures(out, "solution", m, &sol.theta, &format!("mu = {}", r.mu))?;
    Ok(json!({
        "total_population": sol.total_population,
        "residual_norm": sol.residual_norm,
        "iterations": sol.iterations,
    }))
}

/// Scenario-independent metrics of a final resource field.
fn shape_metrics(m: &ResourceField<f64>, defect_threshold: f64) -> Value {
    if m.grid().dim() == 1 {
        json!({
            "fragments": fragment_count_1d(m).ok(),
            "distance_to_boundary_crenel": distance_to_boundary_crenel(m).ok(),
        })
    } else {
        json!({ "concentration_defect": monotone_concentration_defect(m, defect_threshold) })
    }
}

fn optimize_one(r: &Resolved, out: &mut Artifacts) -> Result<Value, RunError> {
    let init = r.resource.as_ref().expect("resolved resource");
    out.write_json("init.json", &resource_json(init))?;
    let hist = out.table("history.csv", &["iteration", "F"]);
    let summary = out.table("optimize.csv", &["final_f", "bang_bang", "iterations", "termination"]);
    let run = optimize(&r.grid, r.constraints, r.mu, init, &r.optimizer)?;
    let e = echo(r);
    for (k, f) in run.f_history.iter().enumerate() {
        out.rows(hist).push(&e, r.mu, vec![k.to_string(), num(*f)]);
    }
    out.rows(summary).push(
        &e,
        r.mu,
        vec![num(run.final_f), num(run.bang_bang), run.iterations.to_string(), run.termination.as_str().into()],
    );
    let mut doc = optim_run_json(&run);
    doc["metrics"]["shape"] = shape_metrics(&run.final_m, r.defect_threshold);
    out.write_json("run.json", &doc)?;
    figures(out, "final", &run.final_m, &run.final_state.theta, &format!("mu = {}, F = {:.10}", r.mu, run.final_f))?;
    Ok(json!({
        "final_f": run.final_f,
        "bang_bang": run.bang_bang,
        "iterations": run.iterations,
        "termination": run.termination.as_str(),
    }))
}

/// Solves for every `mu` in parallel; the results are in input order and stop at the
/// first failure.
fn solve_each(
    grid: &Grid<f64>,
    m: &ResourceField<f64>,
    mus: &[f64],
    opts: &SteadyOptions<f64>,
) -> (Vec<SteadySolution<f64>>, Option<habopt_core::Error>) {
    let all: Vec<_> = mus.par_iter().map(|&mu| solve_steady(grid, m, mu, opts)).collect();
    let mut ok = Vec::new();
    for s in all {
        match s {
            Ok(s) => ok.push(s),
            Err(e) => return (ok, Some(e)),
        }
    }
    (ok, None)
}

fn mu_sweep(r: &Resolved, out: &mut Artifacts) -> Result<Value, RunError> {
    let m = r.resource.as_ref().expect("resolved resource");
    out.write_json("resource.json", &resource_json(m))?;
    let t = out.table("mu_sweep.csv", &["F", "excess", "residual_norm", "iterations"]);
    let (sols, err) = solve_each(&r.grid, m, &r.mu_list, &r.steady);
    let e = echo(r);
    for s in &sols {
        out.rows(t).push(
            &e,
            s.mu,
            vec![
                num(s.total_population),
                num(s.total_population - r.constraints.m0()),
                num(s.residual_norm),
                s.iterations.to_string(),
            ],
        );
    }
    if let Some(err) = err {
        return Err(err.into());
    }
    if r.grid.dim() == 1 {
        let x = svg::centers(r.grid.total_cells());
        let mut series = vec![("m".to_string(), m.values().to_vec())];
        series.extend(sols.iter().map(|s| (format!("theta, mu = {}", s.mu), s.theta.values().to_vec())));
        out.write_bytes("mu_sweep.svg", svg::profiles(&x, &series, "steady states along the sweep").as_bytes())?;
    }
    Ok(json!({
        "F": sols.iter().map(|s| s.total_population).collect::<Vec<_>>(),
        "mu": r.mu_list,
    }))
}

/// `F` of every member of the two crenel families at one `mu`.
#[derive(Clone, Debug, PartialEq)]
pub struct CrenelScan {
    pub mu: f64,
    /// `(offset a, F)` of the single crenel `[a, a + m0/κ]`, first at `a = 0`, last touching
    /// the right boundary.
    pub singles: Vec<(f64, f64)>,
    /// `(split s, F)` of the crenel pair `[0, s L] ∪ [1 − (1 − s) L, 1]`, `L = m0/κ`.
    pub doubles: Vec<(f64, f64)>,
}

fn first_max(v: &[(f64, f64)]) -> Option<(f64, f64)> {
    v.iter().copied().fold(None, |b, x| match b {
        Some(b) if b.1 >= x.1 => Some(b),
        _ => Some(x),
    })
}

impl CrenelScan {
    pub fn best_single(&self) -> (f64, f64) {
        first_max(&self.singles).expect("at least one offset")
    }

    pub fn best_double(&self) -> Option<(f64, f64)> {
        first_max(&self.doubles)
    }

    pub fn left(&self) -> f64 {
        self.singles[0].1
    }

    pub fn right(&self) -> f64 {
        self.singles.last().expect("at least one offset").1
    }

    /// Best two-sided `F` minus best single `F`.
    pub fn double_minus_single(&self) -> Option<f64> {
        self.best_double().map(|d| d.1 - self.best_single().1)
    }

    /// Best two-sided `F` minus the boundary crenel's `F`.
    pub fn double_minus_boundary(&self) -> Option<f64> {
        self.best_double().map(|d| d.1 - self.left().max(self.right()))
    }
}

/// Offsets `0, h, 2h, …` up to `1 − len`, with `1 − len` itself appended when it is not a
/// multiple of `h = 1/n`.
pub fn single_offsets(n: usize, len: f64) -> Vec<f64> {
    let last = 1.0 - len;
    let mut v: Vec<f64> = (0..=n).map(|k| k as f64 / n as f64).take_while(|&a| a <= last + 1e-12).collect();
    if (v.last().copied().unwrap_or(-1.0) - last).abs() > 1e-12 {
        v.push(last);
    }
    v
}

pub fn double_crenel(grid: &Grid<f64>, c: ConstraintSet<f64>, s: f64) -> habopt_core::Result<ResourceField<f64>> {
    let len = c.volume_fraction();
    make_crenel_1d(grid, c, &[(0.0, s * len), (1.0 - (1.0 - s) * len, 1.0)])
}

pub fn crenel_scan(
    grid: &Grid<f64>,
    c: ConstraintSet<f64>,
    mu: f64,
    splits: &[f64],
    opts: &SteadyOptions<f64>,
) -> habopt_core::Result<CrenelScan> {
    let len = c.volume_fraction();
    let f = |m: habopt_core::Result<ResourceField<f64>>| -> habopt_core::Result<f64> {
        Ok(solve_steady(grid, &m?, mu, opts)?.total_population)
    };
    let singles = single_offsets(grid.total_cells(), len)
        .into_par_iter()
        .map(|a| Ok((a, f(make_crenel_1d(grid, c, &[(a, (a + len).min(1.0))]))?)))
        .collect::<habopt_core::Result<Vec<_>>>()?;
    let doubles = splits
        .par_iter()
        .map(|&s| Ok((s, f(double_crenel(grid, c, s))?)))
        .collect::<habopt_core::Result<Vec<_>>>()?;
    Ok(CrenelScan { mu, singles, doubles })
}

fn opt_num(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn crenel_study_1d(r: &Resolved, out: &mut Artifacts) -> Result<Value, RunError> {
    let e = echo(r);
    let scan_t = out.table("crenel_scan.csv", &["family", "parameter", "F"]);
    let best_t = out.table(
        "crenel_argmax.csv",
        &[
            "best_family",
            "best_parameter",
            "best_F",
            "best_single_offset",
            "best_single_F",
            "best_double_split",
            "best_double_F",
            "boundary_F",
            "double_minus_single",
            "double_minus_boundary",
            "fragmentation_witness",
        ],
    );
    let mut scans = Vec::new();
    for &mu in &r.mu_list {
        let s = crenel_scan(&r.grid, r.constraints, mu, &r.split_fractions, &r.steady)?;
        for &(a, f) in &s.singles {
            out.rows(scan_t).push(&e, mu, vec!["single".into(), num(a), num(f)]);
        }
        for &(sp, f) in &s.doubles {
            out.rows(scan_t).push(&e, mu, vec!["double".into(), num(sp), num(f)]);
        }
        let single = s.best_single();
        let double = s.best_double();
        let (family, param, best) = match double {
            Some(d) if d.1 > single.1 => ("double", d.0, d.1),
            _ => ("single", single.0, single.1),
        };
        let gap = s.double_minus_single();
        out.rows(best_t).push(
            &e,
            mu,
            vec![
                family.into(),
                num(param),
                num(best),
                num(single.0),
                num(single.1),
                opt_num(double.map(|d| d.0)),
                opt_num(double.map(|d| d.1)),
                num(s.left().max(s.right())),
                opt_num(gap),
                opt_num(s.double_minus_boundary()),
                gap.is_some_and(|g| g > FRAGMENTATION_MARGIN).to_string(),
            ],
        );
        scans.push(s);
    }

    let witnesses: Vec<f64> = scans
        .iter()
        .filter(|s| s.double_minus_single().is_some_and(|g| g > FRAGMENTATION_MARGIN))
        .map(|s| s.mu)
        .collect();
    let beats_boundary: Vec<f64> = scans
        .iter()
        .filter(|s| s.double_minus_boundary().is_some_and(|g| g > FRAGMENTATION_MARGIN))
        .map(|s| s.mu)
        .collect();
    let symmetry = scans.iter().map(|s| (s.left() - s.right()).abs()).fold(0.0, f64::max);
    let summary = json!({
        "margin": FRAGMENTATION_MARGIN,
        "double_beats_best_single_mu": witnesses,
        "double_beats_boundary_crenel_mu": beats_boundary,
        "boundary_reflection_gap": symmetry,
    });
    out.write_json("crenel_study.json", &summary)?;

    let x: Vec<f64> = scans.iter().map(|s| s.mu.log10()).collect();
    let series = vec![
        (
            "best double - best single".to_string(),
            scans.iter().map(|s| s.double_minus_single().unwrap_or(f64::NAN)).collect(),
        ),
        (
            "best double - boundary".to_string(),
            scans.iter().map(|s| s.double_minus_boundary().unwrap_or(f64::NAN)).collect(),
        ),
    ];
    out.write_bytes("crenel_margins.svg", svg::profiles(&x, &series, "F margins against log10 mu").as_bytes())?;
    Ok(summary)
}

fn runs_table(out: &mut Artifacts, name: &str) -> usize {
    out.table(name, &["start", "final_f", "bang_bang", "iterations", "termination"])
}

fn push_runs(out: &mut Artifacts, t: usize, e: &Echo, mu: f64, ms: &Multistart<f64>) {
    for (i, run) in ms.runs.iter().enumerate() {
        out.rows(t).push(
            e,
            mu,
            vec![
                i.to_string(),
                num(run.final_f),
                num(run.bang_bang),
                run.iterations.to_string(),
                run.termination.as_str().into(),
            ],
        );
    }
}

/// Smallest grid value from which every winner reaches `bang_bang ≥ 1 − 2/N`.
pub fn mu_hat(mus: &[f64], winner_bang_bang: &[f64], cells: usize) -> Option<f64> {
    let need = 1.0 - 2.0 / cells as f64;
    let mut hat = None;
    for (mu, bb) in mus.iter().zip(winner_bang_bang).rev() {
        if *bb >= need {
            hat = Some(*mu);
        } else {
            break;
        }
    }
    hat
}

pub const MU_HAT_NOTE: &str = "mu_hat is the smallest grid value of mu from which every multistart winner has \
bang_bang_fraction >= 1 - 2/N. It is an upper-bound-style indicator computed from first-order local \
maximizers on a finite grid and a finite mu grid; it is not the critical diffusivity itself, which may be \
smaller than every grid value.";

fn mu_star_estimate(r: &Resolved, out: &mut Artifacts) -> Result<Value, RunError> {
    let e = echo(r);
    let n = r.cells();
    let tol = default_bang_bang_tol(r.constraints);
    let t = out.table(
        "mu_star.csv",
        &[
            "winner_start",
            "winner_F",
            "winner_bang_bang",
            "winner_non_bang_bang",
            "max_run_non_bang_bang",
            "winner_fragments",
            "winner_distance_to_boundary_crenel",
            "winner_is_bang_bang",
        ],
    );
    let runs_t = runs_table(out, "mu_star_runs.csv");
    let need = 1.0 - 2.0 / n as f64;
    let mut bbs = Vec::new();
    let mut winners = Vec::new();
    let mut rows = Vec::new();
    for &mu in &r.mu_list {
        let ms = multistart(&r.grid, r.constraints, mu, r.n_starts, &r.optimizer)?;
        push_runs(out, runs_t, &e, mu, &ms);
        let w = ms.winner();
        let bb = bang_bang_fraction(&w.final_m, tol);
        let worst = ms
            .runs
            .iter()
            .map(|run| 1.0 - bang_bang_fraction(&run.final_m, tol))
            .fold(0.0, f64::max);
        let frags = fragment_count_1d(&w.final_m)?;
        let dist = distance_to_boundary_crenel(&w.final_m)?;
        out.rows(t).push(
            &e,
            mu,
            vec![
                ms.best.to_string(),
                num(w.final_f),
                num(bb),
                num(1.0 - bb),
                num(worst),
                frags.to_string(),
                num(dist),
                (bb >= need).to_string(),
            ],
        );
        rows.push(json!({"mu": mu, "F": w.final_f, "bang_bang": bb, "fragments": frags, "distance_to_boundary_crenel": dist}));
        bbs.push(bb);
        winners.push((mu, w.final_m.values().to_vec()));
    }
    let hat = mu_hat(&r.mu_list, &bbs, n);
    let summary = json!({
        "mu_hat": hat,
        "bang_bang_threshold": need,
        "note": MU_HAT_NOTE,
        "winners": rows,
    });
    out.write_json("mu_star.json", &summary)?;
    let series: Vec<(String, Vec<f64>)> = winners.into_iter().map(|(mu, v)| (format!("mu = {mu}"), v)).collect();
    out.write_bytes("mu_star_winners.svg", svg::profiles(&svg::centers(n), &series, "multistart winners").as_bytes())?;
    Ok(summary)
}

fn concentration_2d(r: &Resolved, out: &mut Artifacts) -> Result<Value, RunError> {
    let e = echo(r);
    let t = out.table(
        "concentration.csv",
        &["winner_start", "F", "bang_bang", "defect", "l1_to_previous", "iterations", "termination"],
    );
    let runs_t = runs_table(out, "concentration_runs.csv");
    let tol = default_bang_bang_tol(r.constraints);
    let mut defects = Vec::new();
    let mut prev: Option<ResourceField<f64>> = None;
    for (k, &mu) in r.mu_list.iter().enumerate() {
        let ms = multistart(&r.grid, r.constraints, mu, r.n_starts, &r.optimizer)?;
        push_runs(out, runs_t, &e, mu, &ms);
        let w = ms.winner();
        let defect = monotone_concentration_defect(&w.final_m, r.defect_threshold);
        let l1 = match &prev {
            Some(p) => Some(w.final_m.l1_distance(p)?),
            None => None,
        };
        out.rows(t).push(
            &e,
            mu,
            vec![
                ms.best.to_string(),
                num(w.final_f),
                num(bang_bang_fraction(&w.final_m, tol)),
                num(defect),
                opt_num(l1),
                w.iterations.to_string(),
                w.termination.as_str().into(),
            ],
        );
        figures(out, &format!("winner_{k:02}"), &w.final_m, &w.final_state.theta, &format!("mu = {mu}"))?;
        defects.push(defect);
        prev = Some(w.final_m.clone());
    }
    let summary = json!({
        "mu": r.mu_list,
        "defect": defects,
        "last_not_above_first": defects.last() <= defects.first(),
    });
    out.write_json("concentration.json", &summary)?;
    Ok(summary)
}

fn fragmentation_small_mu(r: &Resolved, out: &mut Artifacts) -> Result<Value, RunError> {
    let e = echo(r);
    let n = r.cells();
    let tol = default_bang_bang_tol(r.constraints);
    let t = out.table(
        "fragmentation.csv",
        &[
            "winner_start",
            "winner_F",
            "winner_bang_bang",
            "winner_fragments",
            "winner_distance_to_boundary_crenel",
            "boundary_crenel_F",
            "best_single_crenel_F",
            "winner_minus_best_single",
        ],
    );
    let runs_t = runs_table(out, "fragmentation_runs.csv");
    let left = left_boundary_crenel(&r.grid, r.constraints)?;
    let mut rows = Vec::new();
    let mut winners = Vec::new();
    for &mu in &r.mu_list {
        let ms = multistart(&r.grid, r.constraints, mu, r.n_starts, &r.optimizer)?;
        push_runs(out, runs_t, &e, mu, &ms);
        let w: &OptimRun<f64> = ms.winner();
        let boundary = solve_steady(&r.grid, &left, mu, &r.steady)?.total_population;
        let best_single = crenel_scan(&r.grid, r.constraints, mu, &[], &r.steady)?.best_single().1;
        let frags = fragment_count_1d(&w.final_m)?;
        out.rows(t).push(
            &e,
            mu,
            vec![
                ms.best.to_string(),
                num(w.final_f),
                num(bang_bang_fraction(&w.final_m, tol)),
                frags.to_string(),
                num(distance_to_boundary_crenel(&w.final_m)?),
                num(boundary),
                num(best_single),
                num(w.final_f - best_single),
            ],
        );
        rows.push(json!({"mu": mu, "F": w.final_f, "fragments": frags, "gain_over_best_single": w.final_f - best_single}));
        winners.push((format!("mu = {mu}"), w.final_m.values().to_vec()));
    }
    out.write_bytes(
        "fragmentation_winners.svg",
        svg::profiles(&svg::centers(n), &winners, "multistart winners at small mu").as_bytes(),
    )?;
    let summary = json!({ "winners": rows });
    out.write_json("fragmentation.json", &summary)?;
    Ok(summary)
}
