//! Total-population maximization for the steady logistic-diffusive equation
//! `μΔθ + (m − θ)θ = 0` on `(0,1)^n` with zero-flux boundary, over resource
//! distributions `0 ≤ m ≤ κ` of prescribed mean `m0`.
//!
//! Everything numeric is generic over [`Real`] (`f32`/`f64`); the `*64` aliases below
//! fix the double-precision types used by the experiment tooling.

// `!(x > 0)` is used on purpose so that NaN is rejected as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adjoint;
pub mod error;
pub mod evolution;
pub mod grid;
pub mod io;
pub mod linear;
pub mod optimizer;
pub mod resource;
pub mod scalar;
pub mod steady;

pub use adjoint::{fd_validate, gradient, solve_adjoint, FdReport, GradientBundle};
pub use error::{Error, Result};
pub use evolution::{evolve, evolve_recording, Evolution, EvolutionOptions};
pub use grid::{Grid, ScalarField};
pub use linear::{solve_shifted, ShiftedOperator};
pub use optimizer::{
    multistart, optimize, threshold_to_volume, Multistart, OptimOptions, OptimRun, Strategy,
    Termination,
};
pub use resource::{
    bang_bang_fraction, distance_to_boundary_crenel, fragment_count_1d, make_crenel_1d,
    make_random, monotone_concentration_defect, project_admissible, ConstraintSet, ResourceField,
};
pub use scalar::Real;
pub use steady::{residual_norm, solve_steady, solve_steady_from, total_population, SteadyOptions, SteadySolution};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub type Grid64 = Grid<f64>;
pub type Field64 = ScalarField<f64>;
pub type Constraints64 = ConstraintSet<f64>;
pub type Resource64 = ResourceField<f64>;
pub type Steady64 = SteadySolution<f64>;
pub type Gradient64 = GradientBundle<f64>;
pub type Run64 = OptimRun<f64>;

pub type Grid32 = Grid<f32>;
pub type Field32 = ScalarField<f32>;
pub type Resource32 = ResourceField<f32>;
