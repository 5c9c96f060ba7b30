//! Semi-implicit time stepping of `∂u/∂t = μΔu + u(m − u)` with zero-flux boundary.
//!
//! Diffusion is implicit and the logistic reaction explicit:
//! `(I − dt μL) u_{n+1} = u_n + dt u_n (m − u_n)`. The only stability restriction is
//! `dt ≤ 0.5/κ`, under which the scheme is positivity preserving and monotone. Used as an
//! oracle for the steady solver: its fixed points solve the same discrete equation, but
//! stationarity is judged from the update rate alone.

use std::io::Write;

use serde_json::json;

use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField};
use crate::linear::ShiftedOperator;
use crate::resource::ResourceField;
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvolutionOptions<T> {
    pub dt: T,
    /// Stationary once `‖u_{n+1} − u_n‖_∞ / dt` drops below this.
    pub stop_tol: T,
    pub max_steps: usize,
}

impl<T: Real> EvolutionOptions<T> {
    /// `dt = 0.25/κ`.
    pub fn for_kappa(kappa: T) -> Self {
        Self {
            dt: T::lit(0.25) / kappa,
            stop_tol: T::tol(1e-11),
            max_steps: 1_000_000,
        }
    }
}

impl<T: Real> Default for EvolutionOptions<T> {
    fn default() -> Self {
        Self::for_kappa(T::one())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Evolution<T> {
    pub u: ScalarField<T>,
    pub steps: usize,
    pub stationary: bool,
    pub time: T,
}

pub fn evolve<T: Real>(
    grid: &Grid<T>,
    m: &ResourceField<T>,
    mu: T,
    u0: &ScalarField<T>,
    opts: &EvolutionOptions<T>,
) -> Result<Evolution<T>> {
    run(grid, m, mu, u0, opts, None)
}

/// Like [`evolve`], also writing `u` every `every` steps (and the initial state) to
/// `sink`, one field JSON object per line with added `step` and `time` members.
pub fn evolve_recording<T: Real>(
    grid: &Grid<T>,
    m: &ResourceField<T>,
    mu: T,
    u0: &ScalarField<T>,
    opts: &EvolutionOptions<T>,
    every: usize,
    sink: &mut dyn Write,
) -> Result<Evolution<T>> {
    if every == 0 {
        return Err(Error::InvalidArgument("dump interval must be positive".into()));
    }
    run(grid, m, mu, u0, opts, Some((every, sink)))
}

fn dump_line<T: Real>(sink: &mut dyn Write, u: &ScalarField<T>, step: usize, time: T) -> Result<()> {
    let mut obj = crate::io::field_json(u);
    obj["step"] = json!(step);
    obj["time"] = json!(time.to_f64_lossy());
    serde_json::to_writer(&mut *sink, &obj)?;
    sink.write_all(b"\n")?;
    Ok(())
}

fn run<T: Real>(
    grid: &Grid<T>,
    m: &ResourceField<T>,
    mu: T,
    u0: &ScalarField<T>,
    opts: &EvolutionOptions<T>,
    mut dump: Option<(usize, &mut dyn Write)>,
) -> Result<Evolution<T>> {
    grid.ensure_same(m.grid())?;
    grid.ensure_same(u0.grid())?;
    let kappa = m.constraints().kappa();
    let bound = T::lit(0.5) / kappa;
    if !(opts.dt > T::zero()) {
        return Err(Error::InvalidArgument("dt must be positive".into()));
    }
    if opts.dt > bound * (T::one() + T::epsilon() * T::lit(4.0)) {
        return Err(Error::TimeStepTooLarge {
            dt: opts.dt.to_f64_lossy(),
            bound: bound.to_f64_lossy(),
        });
    }
    if u0.values().iter().any(|&v| v < T::zero()) {
        return Err(Error::InvalidArgument("initial density must be nonnegative".into()));
    }
    if u0.values().iter().all(|&v| v == T::zero()) {
        return Err(Error::InvalidArgument("initial density must not vanish identically".into()));
    }

    let dt = opts.dt;
    let inv_dt = T::one() / dt;
    let op = ShiftedOperator::new(grid, mu, &ScalarField::constant(grid, -inv_dt))?;
    let mv = m.values();
    let mut u = u0.clone();
    let mut time = T::zero();
    if let Some((_, sink)) = dump.as_mut() {
        dump_line(&mut **sink, &u, 0, time)?;
    }

    for step in 1..=opts.max_steps {
        let rhs = ScalarField::from_parts(
            grid,
            u.values()
                .iter()
                .zip(mv)
                .map(|(&ui, &mi)| -(ui + dt * ui * (mi - ui)) * inv_dt)
                .collect(),
        );
        let next = op.solve(&rhs)?;
        if let Some((index, &value)) = next.values().iter().enumerate().find(|(_, &v)| v < T::zero()) {
            return Err(Error::NegativeDensity {
                step,
                index,
                value: value.to_f64_lossy(),
            });
        }
        let rate = next.max_abs_diff(&u)? * inv_dt;
        u = next;
        time += dt;
        if let Some((every, sink)) = dump.as_mut() {
            if step % *every == 0 {
                dump_line(&mut **sink, &u, step, time)?;
            }
        }
        if rate < opts.stop_tol {
            return Ok(Evolution {
                u,
                steps: step,
                stationary: true,
                time,
            });
        }
    }
    Ok(Evolution {
        u,
        steps: opts.max_steps,
        stationary: false,
        time,
    })
}
