//! Positive steady state of `μΔθ + (m − θ)θ = 0` with zero-flux boundary, by damped Newton.

use crate::error::{Error, Result};
use crate::evolution::{evolve, EvolutionOptions};
use crate::grid::{Grid, ScalarField};
use crate::linear::{laplacian_norm, ShiftedOperator, ROUNDOFF_FACTOR};
use crate::resource::ResourceField;
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SteadyOptions<T> {
    /// Stop when `‖R(θ)‖_∞` falls to this value, or to [`residual_floor`] if larger.
    pub newton_tol: T,
    pub max_newton_iters: usize,
    /// Smallest step fraction tried by the backtracking before a stall is declared.
    pub damping_min: T,
}

impl<T: Real> Default for SteadyOptions<T> {
    fn default() -> Self {
        Self {
            newton_tol: T::tol(1e-10),
            max_newton_iters: 50,
            damping_min: T::lit(1e-4),
        }
    }
}

impl<T: Real> SteadyOptions<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.newton_tol > T::zero()) {
            return Err(Error::InvalidArgument("newton_tol must be positive".into()));
        }
        if self.max_newton_iters < 1 {
            return Err(Error::InvalidArgument("max_newton_iters must be at least 1".into()));
        }
        if !(self.damping_min > T::zero() && self.damping_min <= T::one()) {
            return Err(Error::InvalidArgument("damping_min must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SteadySolution<T> {
    pub theta: ScalarField<T>,
    pub mu: T,
    pub residual_norm: T,
    /// Stopping threshold actually applied (see [`SteadyOptions::newton_tol`]).
    pub tolerance: T,
    pub iterations: usize,
    /// `∫ θ`.
    pub total_population: T,
    /// `‖R‖_∞` before each Newton step and after the last one.
    pub residual_history: Vec<T>,
    /// Set when Newton stalled and was restarted from a time-stepped state.
    pub restarted: bool,
}

fn residual_into<T: Real>(grid: &Grid<T>, m: &[T], mu: T, theta: &[T], out: &mut [T]) -> T {
    grid.laplacian_into(theta, out);
    let mut norm = T::zero();
    for ((o, &mi), &ti) in out.iter_mut().zip(m).zip(theta) {
        *o = mu * *o + (mi - ti) * ti;
        norm = norm.max(o.abs());
    }
    norm
}

/// Level below which `‖R(θ)‖_∞` is indistinguishable from rounding of `θ` itself:
/// `8 eps (‖μL‖_∞ + ‖m‖_∞ + ‖θ‖_∞) ‖θ‖_∞`.
pub fn residual_floor<T: Real>(grid: &Grid<T>, mu: T, m_max: T, theta_max: T) -> T {
    T::lit(ROUNDOFF_FACTOR) * T::epsilon() * (laplacian_norm(grid, mu) + m_max + theta_max) * theta_max
}

/// `‖μLθ + (m − θ)∘θ‖_∞`.
pub fn residual_norm<T: Real>(
    grid: &Grid<T>,
    m: &ResourceField<T>,
    mu: T,
    theta: &ScalarField<T>,
) -> Result<T> {
    grid.ensure_same(m.grid())?;
    grid.ensure_same(theta.grid())?;
    let mut out = vec![T::zero(); grid.total_cells()];
    Ok(residual_into(grid, m.values(), mu, theta.values(), &mut out))
}

/// Diagonal `m − 2θ` of the linearized operator `μL + diag(m − 2θ)`.
pub fn linearized_shift<T: Real>(m: &ResourceField<T>, theta: &ScalarField<T>) -> Result<ScalarField<T>> {
    m.field().zip_map(theta, |mi, ti| mi - ti - ti)
}

/// Solves for the positive steady state starting from `θ⁰ ≡ m0`.
pub fn solve_steady<T: Real>(
    grid: &Grid<T>,
    m: &ResourceField<T>,
    mu: T,
    opts: &SteadyOptions<T>,
) -> Result<SteadySolution<T>> {
    let init = ScalarField::constant(grid, m.constraints().m0());
    solve_steady_from(grid, m, mu, &init, opts)
}

/// Newton from a caller-supplied positive initial guess.
pub fn solve_steady_from<T: Real>(
    grid: &Grid<T>,
    m: &ResourceField<T>,
    mu: T,
    init: &ScalarField<T>,
    opts: &SteadyOptions<T>,
) -> Result<SteadySolution<T>> {
    opts.validate()?;
    if !(mu > T::zero()) || !mu.is_finite() {
        return Err(Error::InvalidArgument(format!("mu must be positive, got {mu}")));
    }
    grid.ensure_same(m.grid())?;
    grid.ensure_same(init.grid())?;
    if let Some(index) = init.values().iter().position(|&v| !(v > T::zero())) {
        return Err(Error::InvalidArgument(format!(
            "initial guess must be positive (cell {index})"
        )));
    }

    let n = grid.total_cells();
    let mv = m.values();
    let mut theta = init.values().to_vec();
    let mut r = vec![T::zero(); n];
    let mut rn = residual_into(grid, mv, mu, &theta, &mut r);
    let mut history = vec![rn];
    let mut cand = vec![T::zero(); n];
    let mut rc = vec![T::zero(); n];
    let mut stalls = 0usize;
    let mut restarted = false;
    let mut lost_positivity = false;

    let m_max = m.field().max();
    let floor = |theta: &[T]| {
        let tmax = theta.iter().fold(T::zero(), |a, &v| a.max(v));
        residual_floor(grid, mu, m_max, tmax)
    };
    let mut tol = opts.newton_tol.max(floor(&theta));
    // a residual between newton_tol and the roundoff floor only counts once Newton has
    // also stopped moving θ
    let mut last_step = T::infinity();
    let small_step = |theta: &[T]| T::epsilon().sqrt() * theta.iter().fold(T::zero(), |a, &v| a.max(v));
    let done = |rn: T, tol: T, step: T, theta: &[T]| rn <= opts.newton_tol || (rn <= tol && step <= small_step(theta));

    for it in 0..opts.max_newton_iters {
        if done(rn, tol, last_step, &theta) {
            return Ok(finish(grid, mu, theta, rn, tol, it, history, restarted));
        }
        let shift = ScalarField::from_parts(
            grid,
            mv.iter().zip(&theta).map(|(&mi, &ti)| mi - ti - ti).collect(),
        );
        let op = ShiftedOperator::new(grid, mu, &shift)?;
        let rhs = ScalarField::from_parts(grid, r.iter().map(|&v| -v).collect());
        let delta = op.solve(&rhs)?;

        let mut alpha = T::one();
        let mut accepted = false;
        while alpha >= opts.damping_min {
            let mut positive = true;
            for ((c, &t), &d) in cand.iter_mut().zip(&theta).zip(delta.values()) {
                *c = t + alpha * d;
                positive &= *c > T::zero();
            }
            if positive {
                let rcn = residual_into(grid, mv, mu, &cand, &mut rc);
                if rcn < rn {
                    std::mem::swap(&mut theta, &mut cand);
                    std::mem::swap(&mut r, &mut rc);
                    rn = rcn;
                    last_step = alpha * delta.norm_inf();
                    accepted = true;
                    break;
                }
            } else {
                lost_positivity = true;
            }
            alpha *= T::lit(0.5);
        }
        history.push(rn);
        tol = opts.newton_tol.max(floor(&theta));
        if accepted {
            continue;
        }
        if rn <= T::lit(100.0) * floor(&theta) {
            // stagnated at roundoff level
            return Ok(finish(grid, mu, theta, rn, rn, it + 1, history, restarted));
        }

        stalls += 1;
        if stalls >= 2 {
            if restarted {
                return Err(if lost_positivity {
                    Error::PositivityLoss { iterations: it + 1 }
                } else {
                    Error::NewtonNotConverged {
                        iterations: it + 1,
                        history: history.iter().map(|v| v.to_f64_lossy()).collect(),
                    }
                });
            }
            // time-step towards the globally attracting state, then resume Newton
            let horizon = T::lit(50.0) / mu;
            let mut eopts = EvolutionOptions::for_kappa(m.constraints().kappa());
            let steps = (horizon / eopts.dt).ceil().to_usize().unwrap_or(usize::MAX);
            eopts.max_steps = steps.clamp(1, 200_000);
            let start = ScalarField::from_parts(grid, theta.clone());
            let evolved = evolve(grid, m, mu, &start, &eopts)?;
            theta = evolved.u.into_values();
            rn = residual_into(grid, mv, mu, &theta, &mut r);
            history.push(rn);
            tol = opts.newton_tol.max(floor(&theta));
            last_step = T::infinity();
            restarted = true;
            stalls = 0;
            lost_positivity = false;
        }
    }
    if done(rn, tol, last_step, &theta) {
        let iters = opts.max_newton_iters;
        return Ok(finish(grid, mu, theta, rn, tol, iters, history, restarted));
    }
    Err(Error::NewtonNotConverged {
        iterations: opts.max_newton_iters,
        history: history.iter().map(|v| v.to_f64_lossy()).collect(),
    })
}

#[allow(clippy::too_many_arguments)]
fn finish<T: Real>(
    grid: &Grid<T>,
    mu: T,
    theta: Vec<T>,
    rn: T,
    tolerance: T,
    iterations: usize,
    residual_history: Vec<T>,
    restarted: bool,
) -> SteadySolution<T> {
    let theta = ScalarField::from_parts(grid, theta);
    let total_population = theta.sum() * grid.cell_volume();
    SteadySolution {
        theta,
        mu,
        residual_norm: rn,
        tolerance,
        iterations,
        total_population,
        residual_history,
        restarted,
    }
}

/// `F_μ(m) = ∫ θ_{m,μ}`.
pub fn total_population<T: Real>(
    grid: &Grid<T>,
    m: &ResourceField<T>,
    mu: T,
    opts: &SteadyOptions<T>,
) -> Result<T> {
    Ok(solve_steady(grid, m, mu, opts)?.total_population)
}
