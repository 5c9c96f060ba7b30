//! Resource distributions in the bathtub set
//! `{ 0 ≤ m ≤ κ, mean(m) = m0 }`, generators and structural metrics.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField};
use crate::scalar::Real;

/// Pointwise bound tolerance of an admissible field.
pub const BOUND_TOL: f64 = 1e-12;
/// Mean-constraint tolerance of an admissible field.
pub const MEAN_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConstraintSet<T> {
    kappa: T,
    m0: T,
}

impl<T: Real> ConstraintSet<T> {
    pub fn new(kappa: T, m0: T) -> Result<Self> {
        if !(kappa > T::zero() && m0 > T::zero() && m0 < kappa) || !kappa.is_finite() {
            return Err(Error::InvalidConstraints {
                kappa: kappa.to_f64_lossy(),
                m0: m0.to_f64_lossy(),
            });
        }
        Ok(Self { kappa, m0 })
    }

    pub fn kappa(&self) -> T {
        self.kappa
    }

    pub fn m0(&self) -> T {
        self.m0
    }

    /// Volume fraction `m0/κ` of a bang-bang field.
    pub fn volume_fraction(&self) -> T {
        self.m0 / self.kappa
    }
}

/// A scalar field known to lie in the admissible set of its constraints.
#[derive(Clone, Debug, PartialEq)]
pub struct ResourceField<T> {
    field: ScalarField<T>,
    constraints: ConstraintSet<T>,
}

impl<T: Real> ResourceField<T> {
    /// Wraps `field` after checking bounds (±1e-12) and mean (±1e-10).
    pub fn new(field: ScalarField<T>, constraints: ConstraintSet<T>) -> Result<Self> {
        let kappa = constraints.kappa();
        let btol = T::tol(BOUND_TOL);
        if let Some((i, v)) = field
            .values()
            .iter()
            .enumerate()
            .find(|(_, &v)| v < -btol || v > kappa + btol)
        {
            return Err(Error::NotAdmissible(format!(
                "cell {i} has value {v} outside [0, {kappa}]"
            )));
        }
        let mean = field.grid().integrate(&field)?;
        if (mean - constraints.m0()).abs() > T::tol(MEAN_TOL) {
            return Err(Error::NotAdmissible(format!(
                "mean {mean} differs from m0 = {}",
                constraints.m0()
            )));
        }
        Ok(Self { field, constraints })
    }

    /// The constant field `m ≡ m0`.
    pub fn constant(grid: &Grid<T>, constraints: ConstraintSet<T>) -> Self {
        Self {
            field: ScalarField::constant(grid, constraints.m0()),
            constraints,
        }
    }

    pub fn field(&self) -> &ScalarField<T> {
        &self.field
    }

    pub fn grid(&self) -> &Grid<T> {
        self.field.grid()
    }

    pub fn values(&self) -> &[T] {
        self.field.values()
    }

    pub fn constraints(&self) -> ConstraintSet<T> {
        self.constraints
    }

    pub fn into_field(self) -> ScalarField<T> {
        self.field
    }

    /// Mirror image along `axis`; admissibility is preserved exactly.
    pub fn reflect(&self, axis: usize) -> Self {
        Self {
            field: self.field.reflect(axis),
            constraints: self.constraints,
        }
    }

    pub fn l1_distance(&self, other: &Self) -> Result<T> {
        self.field.l1_distance(&other.field)
    }
}

fn clamped_mean<T: Real>(values: &[T], shift: T, kappa: T) -> T {
    let s: T = values
        .iter()
        .map(|&v| (v + shift).max(T::zero()).min(kappa))
        .sum();
    s / T::count(values.len())
}

/// L² projection onto the bathtub set: `clamp(f + t, 0, κ)` with the scalar shift `t`
/// chosen so the mean equals `m0`.
pub fn project_admissible<T: Real>(f: &ScalarField<T>, c: ConstraintSet<T>) -> ResourceField<T> {
    let (kappa, m0) = (c.kappa(), c.m0());
    let values = f.values();
    let n = T::count(values.len());

    let in_bounds = values.iter().all(|&v| v >= T::zero() && v <= kappa);
    if in_bounds && (f.sum() / n - m0).abs() <= T::tol(1e-14) {
        return ResourceField {
            field: f.clone(),
            constraints: c,
        };
    }

    // mean(clamp(f + t)) is continuous and non-decreasing in t, 0 at lo and κ at hi
    let mut lo = -f.max();
    let mut hi = kappa - f.min();
    for _ in 0..200 {
        let mid = lo + (hi - lo) * T::lit(0.5);
        if mid <= lo || mid >= hi {
            break;
        }
        let mean = clamped_mean(values, mid, kappa);
        if (mean - m0).abs() <= T::epsilon() * kappa {
            lo = mid;
            hi = mid;
            break;
        }
        if mean < m0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut t = lo + (hi - lo) * T::lit(0.5);

    // the mean is affine in t over cells left unclamped; one exact correction step
    for _ in 0..2 {
        let free = values
            .iter()
            .filter(|&&v| v + t > T::zero() && v + t < kappa)
            .count();
        if free == 0 {
            break;
        }
        let mean = clamped_mean(values, t, kappa);
        let dt = (m0 - mean) * n / T::count(free);
        let trial = t + dt;
        if (clamped_mean(values, trial, kappa) - m0).abs() <= (mean - m0).abs() {
            t = trial;
        }
    }

    let out = values
        .iter()
        .map(|&v| (v + t).max(T::zero()).min(kappa))
        .collect();
    ResourceField {
        field: ScalarField::from_parts(f.grid(), out),
        constraints: c,
    }
}

fn require_dim<T: Real>(grid: &Grid<T>, dim: usize) -> Result<()> {
    if grid.dim() != dim {
        return Err(Error::Dimension {
            expected: dim,
            found: grid.dim(),
        });
    }
    Ok(())
}

/// Piecewise-constant 1D field equal to `κ` on the union of `intervals`.
///
/// Cells cut by an interval end get the covered fraction of `κ`; any remaining
/// mismatch with `m0` (at most one cell per interval end) is absorbed by the cells at the
/// interval ends so that the mean is exactly `m0`.
pub fn make_crenel_1d<T: Real>(
    grid: &Grid<T>,
    c: ConstraintSet<T>,
    intervals: &[(T, T)],
) -> Result<ResourceField<T>> {
    require_dim(grid, 1)?;
    if intervals.is_empty() {
        return Err(Error::InvalidArgument("at least one interval required".into()));
    }
    let mut sorted = intervals.to_vec();
    for &(a, b) in &sorted {
        if !(a >= T::zero() && a < b && b <= T::one()) {
            return Err(Error::InvalidArgument(format!(
                "interval ({a}, {b}) not inside [0, 1]"
            )));
        }
    }
    sorted.sort_by(|x, y| x.0.partial_cmp(&y.0).expect("finite"));
    if sorted.windows(2).any(|w| w[1].0 < w[0].1) {
        return Err(Error::InvalidArgument("overlapping intervals".into()));
    }

    let n = grid.total_cells();
    let nf = T::count(n);
    let kappa = c.kappa();
    let mut values = vec![T::zero(); n];
    for &(a, b) in &sorted {
        for (i, v) in values.iter_mut().enumerate() {
            let x0 = T::count(i) / nf;
            let x1 = T::count(i + 1) / nf;
            let overlap = b.min(x1) - a.max(x0);
            if overlap > T::zero() {
                *v += kappa * (overlap * nf).min(T::one());
            }
        }
    }
    for v in values.iter_mut() {
        *v = v.min(kappa);
    }

    // cells at which the interval ends may be adjusted, nearest ends first
    let mut end_cells = Vec::new();
    for &(a, b) in sorted.iter().rev() {
        let hi = ((b * nf).ceil().to_usize().unwrap_or(n)).clamp(1, n) - 1;
        let lo = ((a * nf).floor().to_usize().unwrap_or(0)).min(n - 1);
        end_cells.push(hi);
        if hi + 1 < n {
            end_cells.push(hi + 1);
        }
        end_cells.push(lo);
        if lo > 0 {
            end_cells.push(lo - 1);
        }
    }

    let max_gap = T::count(2 * sorted.len()) * kappa + T::tol(1e-9);
    let mut need = c.m0() * nf - values.iter().copied().sum::<T>();
    if need.abs() > max_gap {
        return Err(Error::InvalidArgument(format!(
            "intervals cover mass {} but m0 = {}",
            values.iter().copied().sum::<T>() / nf,
            c.m0()
        )));
    }
    for &i in &end_cells {
        if need == T::zero() {
            break;
        }
        let v = values[i];
        let nv = (v + need).max(T::zero()).min(kappa);
        need -= nv - v;
        values[i] = nv;
    }
    if need.abs() > T::tol(1e-9) {
        return Err(Error::InvalidArgument(
            "interval ends cannot absorb the mass mismatch".into(),
        ));
    }
    ResourceField::new(ScalarField::new(grid, values)?, c)
}

/// Crenel `[0, m0/κ)` touching the left boundary.
pub fn left_boundary_crenel<T: Real>(grid: &Grid<T>, c: ConstraintSet<T>) -> Result<ResourceField<T>> {
    make_crenel_1d(grid, c, &[(T::zero(), c.volume_fraction())])
}

/// Crenel `(1 - m0/κ, 1]` touching the right boundary.
pub fn right_boundary_crenel<T: Real>(grid: &Grid<T>, c: ConstraintSet<T>) -> Result<ResourceField<T>> {
    make_crenel_1d(grid, c, &[(T::one() - c.volume_fraction(), T::one())])
}

/// I.i.d. uniform values on `[0, κ]` from a ChaCha8 stream seeded with `seed`,
/// projected onto the admissible set.
pub fn make_random<T: Real>(grid: &Grid<T>, c: ConstraintSet<T>, seed: u64) -> ResourceField<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let kappa = c.kappa();
    let values = (0..grid.total_cells())
        .map(|_| T::lit(rng.gen::<f64>()) * kappa)
        .collect();
    project_admissible(&ScalarField::from_parts(grid, values), c)
}

/// Fraction of cells within `tol` of `0` or of `κ`.
pub fn bang_bang_fraction<T: Real>(m: &ResourceField<T>, tol: T) -> T {
    let kappa = m.constraints().kappa();
    let hits = m
        .values()
        .iter()
        .filter(|&&v| v.abs() <= tol || (v - kappa).abs() <= tol)
        .count();
    T::count(hits) / T::count(m.values().len())
}

/// Default bang-bang tolerance `1e-3 κ`.
pub fn default_bang_bang_tol<T: Real>(c: ConstraintSet<T>) -> T {
    T::lit(1e-3) * c.kappa()
}

/// Number of maximal runs of cells with value above `κ/2`.
pub fn fragment_count_1d<T: Real>(m: &ResourceField<T>) -> Result<usize> {
    require_dim(m.grid(), 1)?;
    let half = m.constraints().kappa() * T::lit(0.5);
    let mut runs = 0;
    let mut inside = false;
    for &v in m.values() {
        let on = v > half;
        if on && !inside {
            runs += 1;
        }
        inside = on;
    }
    Ok(runs)
}

/// Fraction of (axis, grid line) pairs along which the thresholded set `{m > threshold}`
/// fails to be monotone in the axis' majority orientation. Zero means the set is monotone
/// in every variable.
pub fn monotone_concentration_defect<T: Real>(m: &ResourceField<T>, threshold: T) -> T {
    let g = m.grid();
    let set: Vec<bool> = m.values().iter().map(|&v| v > threshold).collect();
    let mut failed = 0usize;
    let mut total = 0usize;
    for axis in 0..g.dim() {
        let n = g.cells_per_axis()[axis];
        let s = g.stride(axis);
        // (non-increasing, non-decreasing) per line
        let lines: Vec<(bool, bool)> = (0..g.total_cells())
            .filter(|&i| g.axis_index(i, axis) == 0)
            .map(|start| {
                let mut dec = true;
                let mut inc = true;
                for k in 1..n {
                    let prev = set[start + (k - 1) * s];
                    let cur = set[start + k * s];
                    if cur && !prev {
                        dec = false;
                    }
                    if prev && !cur {
                        inc = false;
                    }
                }
                (dec, inc)
            })
            .collect();
        let dec_ok = lines.iter().filter(|l| l.0).count();
        let inc_ok = lines.iter().filter(|l| l.1).count();
        total += lines.len();
        failed += lines.len() - dec_ok.max(inc_ok);
    }
    T::count(failed) / T::count(total)
}

/// Default threshold `κ/2` for set-valued metrics.
pub fn default_threshold<T: Real>(c: ConstraintSet<T>) -> T {
    c.kappa() * T::lit(0.5)
}

/// L¹ distance from `m` to the nearer of the two boundary crenels.
pub fn distance_to_boundary_crenel<T: Real>(m: &ResourceField<T>) -> Result<T> {
    require_dim(m.grid(), 1)?;
    let c = m.constraints();
    let left = left_boundary_crenel(m.grid(), c)?;
    let right = right_boundary_crenel(m.grid(), c)?;
    Ok(m.l1_distance(&left)?.min(m.l1_distance(&right)?))
}
