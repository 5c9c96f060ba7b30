//! Maximization of the total population over the bathtub set.
//!
//! Two strategies share one acceptance rule (an iterate is kept only if `F` increases):
//! projected gradient ascent with backtracking, and a conditional-gradient step that
//! jumps to the maximizer of the linearized objective, which is a thresholded
//! (bang-bang) field.

use std::cmp::Ordering;

use rayon::prelude::*;

use crate::adjoint::solve_adjoint;
use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField};
use crate::resource::{
    bang_bang_fraction, default_bang_bang_tol, make_random, project_admissible, ConstraintSet,
    ResourceField,
};
use crate::scalar::Real;
use crate::steady::{solve_steady, solve_steady_from, SteadyOptions, SteadySolution};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Strategy {
    ProjectedGradient,
    Thresholding,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Termination {
    Converged,
    MaxIters,
    Stalled,
}

impl Termination {
    pub fn as_str(&self) -> &'static str {
        match self {
            Termination::Converged => "converged",
            Termination::MaxIters => "max_iters",
            Termination::Stalled => "stalled",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OptimOptions<T> {
    pub strategy: Strategy,
    /// Initial ascent step of the projected-gradient line search.
    pub step0: T,
    pub max_iters: usize,
    /// Converged once `F` gained less than this (relative) over `stall_window` iterates.
    pub f_rel_tol: T,
    pub stall_window: usize,
    /// Base seed of multistart initial fields.
    pub seed: u64,
    pub steady: SteadyOptions<T>,
}

impl<T: Real> Default for OptimOptions<T> {
    fn default() -> Self {
        Self {
            strategy: Strategy::Thresholding,
            step0: T::one(),
            max_iters: 500,
            f_rel_tol: T::tol(1e-10),
            stall_window: 10,
            seed: 0,
            steady: SteadyOptions::default(),
        }
    }
}

impl<T: Real> OptimOptions<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.step0 > T::zero()) {
            return Err(Error::InvalidArgument("step0 must be positive".into()));
        }
        if self.max_iters < 1 {
            return Err(Error::InvalidArgument("max_iters must be at least 1".into()));
        }
        if self.stall_window < 1 {
            return Err(Error::InvalidArgument("stall_window must be at least 1".into()));
        }
        self.steady.validate()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimRun<T> {
    pub final_m: ResourceField<T>,
    /// Steady state at `final_m`.
    pub final_state: SteadySolution<T>,
    /// `F` of every accepted iterate, starting with the initial field.
    pub f_history: Vec<T>,
    pub final_f: T,
    pub bang_bang: T,
    pub iterations: usize,
    pub termination: Termination,
}

/// Shortest ascent step before the line search gives up.
const MIN_STEP: f64 = 1e-8;

/// Maximizer of `m ↦ ⟨g, m⟩` over the bathtub set: `κ` on the `floor(m0 N/κ)` cells
/// with the largest `g`, one partially filled cell carrying the remaining mass, `0`
/// elsewhere. Ties in `g` go to the lower cell index.
pub fn threshold_to_volume<T: Real>(g: &ScalarField<T>, c: ConstraintSet<T>) -> Result<ResourceField<T>> {
    let n = g.len();
    let vals = g.values();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| vals[b].partial_cmp(&vals[a]).unwrap_or(Ordering::Equal));

    let kappa = c.kappa();
    let mass = c.m0() * T::count(n);
    let k = ((mass / kappa + T::lit(1e-9)).floor().to_usize().unwrap_or(0)).min(n);
    let mut out = vec![T::zero(); n];
    for &i in &order[..k] {
        out[i] = kappa;
    }
    let rem = mass - T::count(k) * kappa;
    if rem > T::zero() && k < n {
        out[order[k]] = rem.min(kappa);
    } else if rem < T::zero() && k > 0 {
        out[order[k - 1]] += rem;
    }
    ResourceField::new(ScalarField::new(g.grid(), out)?, c)
}

fn evaluate<T: Real>(
    grid: &Grid<T>,
    m: &ResourceField<T>,
    mu: T,
    warm: &ScalarField<T>,
    opts: &SteadyOptions<T>,
) -> Result<SteadySolution<T>> {
    solve_steady_from(grid, m, mu, warm, opts).or_else(|_| solve_steady(grid, m, mu, opts))
}

#[allow(clippy::large_enum_variant)]
enum StepOutcome<T> {
    Accepted(ResourceField<T>, SteadySolution<T>),
    Stationary,
    Stalled,
}

#[allow(clippy::too_many_arguments)]
fn projected_step<T: Real>(
    grid: &Grid<T>,
    c: ConstraintSet<T>,
    mu: T,
    m: &ResourceField<T>,
    sol: &SteadySolution<T>,
    grad: &ScalarField<T>,
    alpha: &mut T,
    opts: &SteadyOptions<T>,
) -> Result<StepOutcome<T>> {
    let still = T::tol(1e-13) * c.kappa();
    loop {
        let trial = m.field().zip_map(grad, |mi, gi| mi + *alpha * gi)?;
        let cand = project_admissible(&trial, c);
        if cand.field().max_abs_diff(m.field())? <= still {
            return Ok(StepOutcome::Stationary);
        }
        let s = evaluate(grid, &cand, mu, &sol.theta, opts)?;
        if s.total_population > sol.total_population {
            *alpha = *alpha + *alpha;
            return Ok(StepOutcome::Accepted(cand, s));
        }
        *alpha *= T::lit(0.5);
        if *alpha < T::lit(MIN_STEP) {
            return Ok(StepOutcome::Stalled);
        }
    }
}

/// Ascent from `init` until `F` stagnates, a stationary point is detected, the line
/// search stalls or `max_iters` is reached.
pub fn optimize<T: Real>(
    grid: &Grid<T>,
    c: ConstraintSet<T>,
    mu: T,
    init: &ResourceField<T>,
    opts: &OptimOptions<T>,
) -> Result<OptimRun<T>> {
    opts.validate()?;
    grid.ensure_same(init.grid())?;
    if init.constraints() != c {
        return Err(Error::NotAdmissible(
            "initial field carries different constraints".into(),
        ));
    }
    let mut m = ResourceField::new(init.field().clone(), c)?;
    let mut sol = solve_steady(grid, &m, mu, &opts.steady)?;
    let mut history = vec![sol.total_population];
    let mut alpha = opts.step0;
    let mut termination = Termination::MaxIters;
    let mut iterations = 0;
    let same = T::tol(1e-12) * c.kappa();

    for iter in 1..=opts.max_iters {
        iterations = iter;
        let bundle = solve_adjoint(grid, &m, mu, &sol)?;

        let outcome = match opts.strategy {
            Strategy::Thresholding => {
                let cand = threshold_to_volume(&bundle.grad, c)?;
                if cand.field().max_abs_diff(m.field())? <= same {
                    // m already maximizes the linearized objective: first-order stationary
                    StepOutcome::Stationary
                } else {
                    let s = evaluate(grid, &cand, mu, &sol.theta, &opts.steady)?;
                    if s.total_population > sol.total_population {
                        StepOutcome::Accepted(cand, s)
                    } else {
                        projected_step(grid, c, mu, &m, &sol, &bundle.grad, &mut alpha, &opts.steady)?
                    }
                }
            }
            Strategy::ProjectedGradient => {
                projected_step(grid, c, mu, &m, &sol, &bundle.grad, &mut alpha, &opts.steady)?
            }
        };

        match outcome {
            StepOutcome::Accepted(next_m, next_sol) => {
                m = next_m;
                sol = next_sol;
                history.push(sol.total_population);
            }
            StepOutcome::Stationary => {
                termination = Termination::Converged;
                break;
            }
            StepOutcome::Stalled => {
                termination = Termination::Stalled;
                break;
            }
        }

        let len = history.len();
        if len > opts.stall_window {
            let f = history[len - 1];
            let old = history[len - 1 - opts.stall_window];
            if f - old <= opts.f_rel_tol * f.abs() {
                termination = Termination::Converged;
                break;
            }
        }
    }

    let bang_bang = bang_bang_fraction(&m, default_bang_bang_tol(c));
    Ok(OptimRun {
        final_f: sol.total_population,
        final_m: m,
        final_state: sol,
        f_history: history,
        bang_bang,
        iterations,
        termination,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Multistart<T> {
    pub runs: Vec<OptimRun<T>>,
    /// Index of the run with the largest final `F` (first one on ties).
    pub best: usize,
}

impl<T> Multistart<T> {
    pub fn winner(&self) -> &OptimRun<T> {
        &self.runs[self.best]
    }
}

/// Initial fields of a multistart: the constant field first, then random fields seeded
/// with `seed + 1, seed + 2, …`.
pub fn multistart_inits<T: Real>(
    grid: &Grid<T>,
    c: ConstraintSet<T>,
    n_starts: usize,
    seed: u64,
) -> Vec<ResourceField<T>> {
    (0..n_starts)
        .map(|i| {
            if i == 0 {
                ResourceField::constant(grid, c)
            } else {
                make_random(grid, c, seed.wrapping_add(i as u64))
            }
        })
        .collect()
}

/// Runs [`optimize`] from `n_starts` initial fields (see [`multistart_inits`]) in
/// parallel. Results are deterministic and ordered by start.
pub fn multistart<T: Real>(
    grid: &Grid<T>,
    c: ConstraintSet<T>,
    mu: T,
    n_starts: usize,
    opts: &OptimOptions<T>,
) -> Result<Multistart<T>> {
    if n_starts < 1 {
        return Err(Error::InvalidArgument("n_starts must be at least 1".into()));
    }
    let inits = multistart_inits(grid, c, n_starts, opts.seed);
    let runs = inits
        .par_iter()
        .map(|init| optimize(grid, c, mu, init, opts))
        .collect::<Result<Vec<_>>>()?;
    let best = runs
        .iter()
        .enumerate()
        .fold(0, |b, (i, r)| if r.final_f > runs[b].final_f { i } else { b });
    Ok(Multistart { runs, best })
}
