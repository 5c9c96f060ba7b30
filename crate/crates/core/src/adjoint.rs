//! Adjoint-state gradient of the total population `F_μ(m) = ∫ θ_{m,μ}`.
//!
//! Differentiating `μLθ + (m − θ)θ = 0` gives `(μL + diag(m − 2θ)) θ̇ = −θ ṁ`. With `p`
//! solving `(μL + diag(m − 2θ)) p = −1` (the operator is symmetric), the derivative of
//! `F` in direction `ṁ` is `∫ p θ ṁ`, so the L² gradient is `pθ`. This is exact for the
//! discrete problem, not only in the continuum limit.

use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField};
use crate::linear::ShiftedOperator;
use crate::resource::{ResourceField, BOUND_TOL};
use crate::scalar::Real;
use crate::steady::{linearized_shift, solve_steady, SteadyOptions, SteadySolution};

#[derive(Clone, Debug, PartialEq)]
pub struct GradientBundle<T> {
    /// Adjoint state.
    pub p: ScalarField<T>,
    /// `p ∘ θ`, the L² gradient of `F_μ` at `m` (ascent direction).
    pub grad: ScalarField<T>,
    pub theta_ref: SteadySolution<T>,
    /// Diagonal `m − 2θ` of the adjoint operator.
    pub shift: ScalarField<T>,
}

pub fn solve_adjoint<T: Real>(
    grid: &Grid<T>,
    m: &ResourceField<T>,
    mu: T,
    sol: &SteadySolution<T>,
) -> Result<GradientBundle<T>> {
    grid.ensure_same(m.grid())?;
    grid.ensure_same(sol.theta.grid())?;
    if sol.mu != mu {
        return Err(Error::InvalidArgument(format!(
            "steady state computed at mu = {}, adjoint requested at mu = {mu}",
            sol.mu
        )));
    }
    let shift = linearized_shift(m, &sol.theta)?;
    let op = ShiftedOperator::new(grid, mu, &shift)?;
    let p = op.solve(&ScalarField::constant(grid, -T::one()))?;
    let grad = p.zip_map(&sol.theta, |pi, ti| pi * ti)?;
    Ok(GradientBundle {
        p,
        grad,
        theta_ref: sol.clone(),
        shift,
    })
}

/// Steady solve followed by the adjoint solve.
pub fn gradient<T: Real>(
    grid: &Grid<T>,
    m: &ResourceField<T>,
    mu: T,
    opts: &SteadyOptions<T>,
) -> Result<GradientBundle<T>> {
    let sol = solve_steady(grid, m, mu, opts)?;
    solve_adjoint(grid, m, mu, &sol)
}

/// Outcome of comparing the adjoint directional derivative with central differences.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FdReport<T> {
    /// `⟨grad, d⟩`.
    pub analytic: T,
    /// `(F(m + h d) − F(m − h d)) / 2h`.
    pub finite_difference: T,
    pub abs_error: T,
    /// `abs_error / max(1e-14, |analytic|)`.
    pub rel_error: T,
}

impl<T: Real> FdReport<T> {
    /// Relative error, or the absolute error at flat points where the derivative
    /// itself is below `1e-8`.
    pub fn error(&self) -> T {
        if self.analytic.abs() < T::lit(1e-8) {
            self.abs_error
        } else {
            self.rel_error
        }
    }
}

/// Checks the adjoint gradient against central finite differences of `F_μ` along a
/// mean-zero `direction` with step `h`.
pub fn fd_validate<T: Real>(
    grid: &Grid<T>,
    m: &ResourceField<T>,
    mu: T,
    direction: &ScalarField<T>,
    h: T,
    opts: &SteadyOptions<T>,
) -> Result<FdReport<T>> {
    grid.ensure_same(direction.grid())?;
    if !(h > T::zero()) {
        return Err(Error::InvalidArgument("step must be positive".into()));
    }
    let mean = grid.integrate(direction)?;
    if mean.abs() > T::tol(1e-12) * T::one().max(direction.norm_inf()) {
        return Err(Error::InvalidArgument(format!(
            "direction must have zero mean, got {mean}"
        )));
    }
    let c = m.constraints();
    let shifted = |sign: T| -> Result<ResourceField<T>> {
        let values: Vec<T> = m
            .values()
            .iter()
            .zip(direction.values())
            .map(|(&mi, &di)| mi + sign * h * di)
            .collect();
        let btol = T::tol(BOUND_TOL);
        if values.iter().any(|&v| v < -btol || v > c.kappa() + btol) {
            return Err(Error::InvalidArgument(
                "m ± h·direction leaves [0, kappa]".into(),
            ));
        }
        ResourceField::new(ScalarField::new(grid, values)?, c)
    };
    let plus = shifted(T::one())?;
    let minus = shifted(-T::one())?;

    let bundle = gradient(grid, m, mu, opts)?;
    let analytic = bundle.grad.inner(direction)?;
    let fp = solve_steady(grid, &plus, mu, opts)?.total_population;
    let fm = solve_steady(grid, &minus, mu, opts)?.total_population;
    let finite_difference = (fp - fm) / (h + h);
    let abs_error = (analytic - finite_difference).abs();
    let rel_error = abs_error / analytic.abs().max(T::lit(1e-14));
    Ok(FdReport {
        analytic,
        finite_difference,
        abs_error,
        rel_error,
    })
}
