//! Cell-centered tensor grids on the unit box, scalar fields living on them,
//! the zero-flux Laplacian and midpoint quadrature.
//!
//! Cells are ordered row-major over their multi-index with the **last axis varying
//! fastest**; this is the order of `ScalarField::values` and of every serialized field.

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq)]
pub struct Grid<T> {
    cells: Vec<usize>,
    spacing: Vec<T>,
    inv_h2: Vec<T>,
    strides: Vec<usize>,
    cell_volume: T,
    total_cells: usize,
}

impl<T: Real> Grid<T> {
    /// Uniform grid on `(0,1)^dim` with `cells_per_axis[d]` cells along axis `d`.
    pub fn new(dim: usize, cells_per_axis: &[usize]) -> Result<Self> {
        if dim < 1 {
            return Err(Error::InvalidGrid("dimension must be at least 1".into()));
        }
        if cells_per_axis.len() != dim {
            return Err(Error::InvalidGrid(format!(
                "{} cell counts given for dimension {dim}",
                cells_per_axis.len()
            )));
        }
        if let Some(&n) = cells_per_axis.iter().find(|&&n| n < 2) {
            return Err(Error::InvalidGrid(format!(
                "every axis needs at least 2 cells, got {n}"
            )));
        }
        let total_cells = cells_per_axis
            .iter()
            .try_fold(1usize, |acc, &n| acc.checked_mul(n))
            .ok_or_else(|| Error::InvalidGrid("cell count overflows".into()))?;

        let spacing: Vec<T> = cells_per_axis.iter().map(|&n| T::one() / T::count(n)).collect();
        let inv_h2 = cells_per_axis
            .iter()
            .map(|&n| T::count(n) * T::count(n))
            .collect();
        let mut strides = vec![1usize; dim];
        for d in (0..dim.saturating_sub(1)).rev() {
            strides[d] = strides[d + 1] * cells_per_axis[d + 1];
        }
        let cell_volume = T::one() / T::count(total_cells);

        Ok(Self {
            cells: cells_per_axis.to_vec(),
            spacing,
            inv_h2,
            strides,
            cell_volume,
            total_cells,
        })
    }

    /// One-dimensional grid with `n` cells.
    pub fn line(n: usize) -> Result<Self> {
        Self::new(1, &[n])
    }

    /// Square grid with `n x n` cells.
    pub fn square(n: usize) -> Result<Self> {
        Self::new(2, &[n, n])
    }

    pub fn dim(&self) -> usize {
        self.cells.len()
    }

    pub fn cells_per_axis(&self) -> &[usize] {
        &self.cells
    }

    pub fn spacing(&self) -> &[T] {
        &self.spacing
    }

    pub fn cell_volume(&self) -> T {
        self.cell_volume
    }

    pub fn total_cells(&self) -> usize {
        self.total_cells
    }

    /// Flat-index distance between neighbours along `axis`.
    pub fn stride(&self, axis: usize) -> usize {
        self.strides[axis]
    }

    /// Position of cell `index` along `axis`.
    #[inline]
    pub fn axis_index(&self, index: usize, axis: usize) -> usize {
        (index / self.strides[axis]) % self.cells[axis]
    }

    pub fn multi_index(&self, index: usize) -> Vec<usize> {
        (0..self.dim()).map(|d| self.axis_index(index, d)).collect()
    }

    pub fn flat_index(&self, multi: &[usize]) -> usize {
        multi.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    /// Cell center `((i_d + 1/2) h_d)_d`.
    pub fn center(&self, index: usize) -> Vec<T> {
        let half = T::lit(0.5);
        (0..self.dim())
            .map(|d| (T::count(self.axis_index(index, d)) + half) * self.spacing[d])
            .collect()
    }

    pub(crate) fn ensure_same(&self, other: &Grid<T>) -> Result<()> {
        if self.cells != other.cells {
            return Err(Error::GridMismatch {
                expected: self.cells.clone(),
                found: other.cells.clone(),
            });
        }
        Ok(())
    }

    /// Discrete Neumann Laplacian of `values` (raw slice form, no checks).
    ///
    /// Each axis contributes `((f[i-1] - f[i]) + (f[i+1] - f[i])) / h^2`, with the ghost
    /// value across the boundary equal to `f[i]` itself. Differences are formed before
    /// scaling so the rounding error tracks the local variation of `f`, not its size.
    pub(crate) fn laplacian_into(&self, values: &[T], out: &mut [T]) {
        debug_assert_eq!(values.len(), self.total_cells);
        for (i, o) in out.iter_mut().enumerate() {
            let fi = values[i];
            let mut acc = T::zero();
            for d in 0..self.dim() {
                let s = self.strides[d];
                let k = self.axis_index(i, d);
                let left = if k > 0 { values[i - s] } else { fi };
                let right = if k + 1 < self.cells[d] { values[i + s] } else { fi };
                acc += ((left - fi) + (right - fi)) * self.inv_h2[d];
            }
            *o = acc;
        }
    }

    /// Laplacian with the zero-flux boundary condition.
    pub fn laplacian(&self, f: &ScalarField<T>) -> Result<ScalarField<T>> {
        self.ensure_same(&f.grid)?;
        let mut out = vec![T::zero(); self.total_cells];
        self.laplacian_into(&f.values, &mut out);
        Ok(ScalarField {
            grid: self.clone(),
            values: out,
        })
    }

    /// Midpoint quadrature over the unit box. Since `|Ω| = 1` this is also the mean.
    pub fn integrate(&self, f: &ScalarField<T>) -> Result<T> {
        self.ensure_same(&f.grid)?;
        Ok(f.sum() * self.cell_volume)
    }
}

/// One real value per grid cell.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField<T> {
    grid: Grid<T>,
    values: Vec<T>,
}

impl<T: Real> ScalarField<T> {
    pub fn new(grid: &Grid<T>, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.total_cells() {
            return Err(Error::LengthMismatch {
                expected: grid.total_cells(),
                found: values.len(),
            });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self {
            grid: grid.clone(),
            values,
        })
    }

    pub fn constant(grid: &Grid<T>, value: T) -> Self {
        Self {
            grid: grid.clone(),
            values: vec![value; grid.total_cells()],
        }
    }

    pub fn zeros(grid: &Grid<T>) -> Self {
        Self::constant(grid, T::zero())
    }

    /// Samples `f` at the cell centers.
    pub fn from_fn(grid: &Grid<T>, mut f: impl FnMut(&[T]) -> T) -> Result<Self> {
        let values = (0..grid.total_cells()).map(|i| f(&grid.center(i))).collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Crate-internal constructor for values already known to be finite and sized.
    pub(crate) fn from_parts(grid: &Grid<T>, values: Vec<T>) -> Self {
        debug_assert_eq!(values.len(), grid.total_cells());
        Self {
            grid: grid.clone(),
            values,
        }
    }

    pub fn sum(&self) -> T {
        self.values.iter().copied().sum()
    }

    pub fn min(&self) -> T {
        self.values.iter().copied().fold(T::infinity(), T::min)
    }

    pub fn max(&self) -> T {
        self.values.iter().copied().fold(T::neg_infinity(), T::max)
    }

    pub fn norm_inf(&self) -> T {
        self.values.iter().fold(T::zero(), |a, v| a.max(v.abs()))
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self::from_parts(&self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(T, T) -> T) -> Result<Self> {
        self.grid.ensure_same(&other.grid)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Ok(Self::from_parts(&self.grid, values))
    }

    /// L² inner product `∫ f g` by midpoint quadrature.
    pub fn inner(&self, other: &Self) -> Result<T> {
        self.grid.ensure_same(&other.grid)?;
        let s: T = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| a * b)
            .sum();
        Ok(s * self.grid.cell_volume())
    }

    /// Discrete L¹ distance `∫ |f - g|`.
    pub fn l1_distance(&self, other: &Self) -> Result<T> {
        self.grid.ensure_same(&other.grid)?;
        let s: T = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| (a - b).abs())
            .sum();
        Ok(s * self.grid.cell_volume())
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<T> {
        self.grid.ensure_same(&other.grid)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs())))
    }

    /// Mirror image across the mid-plane orthogonal to `axis`.
    pub fn reflect(&self, axis: usize) -> Self {
        let g = &self.grid;
        let n = g.cells_per_axis()[axis];
        let s = g.stride(axis);
        let values = (0..g.total_cells())
            .map(|i| {
                let k = g.axis_index(i, axis);
                let j = i - k * s + (n - 1 - k) * s;
                self.values[j]
            })
            .collect();
        Self::from_parts(g, values)
    }
}

impl ScalarField<f64> {
    /// Converts an `f64` field to another precision.
    pub fn cast<U: Real>(&self) -> Result<ScalarField<U>> {
        let grid = Grid::<U>::new(self.grid.dim(), self.grid.cells_per_axis())?;
        ScalarField::new(&grid, self.values.iter().map(|&v| U::lit(v)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builds_line_grid() {
        let g = Grid::<f64>::new(1, &[4]).unwrap();
        assert_eq!(g.spacing(), &[0.25]);
        assert_eq!(g.cell_volume(), 0.25);
        assert_eq!(g.total_cells(), 4);
        assert_eq!(g.center(0), vec![0.125]);
        assert_eq!(g.center(3), vec![0.875]);
    }

    #[test]
    fn builds_square_grid() {
        let g = Grid::<f64>::new(2, &[8, 8]).unwrap();
        assert_eq!(g.total_cells(), 64);
        assert_eq!(g.cell_volume(), 1.0 / 64.0);
        assert_eq!(g.stride(0), 8);
        assert_eq!(g.stride(1), 1);
        assert_eq!(g.multi_index(11), vec![1, 3]);
        assert_eq!(g.flat_index(&[1, 3]), 11);
    }

    #[test]
    fn rejects_degenerate_grids() {
        assert!(Grid::<f64>::new(1, &[1]).is_err());
        assert!(Grid::<f64>::new(0, &[]).is_err());
        assert!(Grid::<f64>::new(2, &[4]).is_err());
        assert!(Grid::<f64>::new(2, &[4, 1]).is_err());
    }

    #[test]
    fn spacing_and_volume_invariants() {
        for cells in [vec![2usize], vec![3], vec![7, 5], vec![64, 64], vec![3, 4, 5]] {
            let g = Grid::<f64>::new(cells.len(), &cells).unwrap();
            for (h, &n) in g.spacing().iter().zip(&cells) {
                assert!((h * n as f64 - 1.0).abs() <= 1e-15);
            }
            assert!((g.cell_volume() * g.total_cells() as f64 - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn laplacian_hand_example() {
        let g = Grid::<f64>::line(4).unwrap();
        let f = ScalarField::new(&g, vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        let lap = g.laplacian(&f).unwrap();
        assert_eq!(lap.values(), &[16.0, -16.0, -16.0, 16.0]);
    }

    #[test]
    fn laplacian_kills_constants() {
        let g = Grid::<f64>::new(2, &[5, 7]).unwrap();
        let f = ScalarField::constant(&g, 3.25);
        assert!(g.laplacian(&f).unwrap().values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn integrate_examples() {
        let g = Grid::<f64>::line(4).unwrap();
        assert_eq!(g.integrate(&ScalarField::constant(&g, 2.5)).unwrap(), 2.5);
        let f = ScalarField::new(&g, vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        assert_eq!(g.integrate(&f).unwrap(), 0.5);

        let g = Grid::<f64>::line(10).unwrap();
        let mut v = vec![0.0; 10];
        v[..3].fill(0.7);
        let f = ScalarField::new(&g, v).unwrap();
        assert!((g.integrate(&f).unwrap() - 0.7 * 3.0 / 10.0).abs() < 1e-15);
    }

    #[test]
    fn mismatched_grids_are_rejected() {
        let g4 = Grid::<f64>::line(4).unwrap();
        let g8 = Grid::<f64>::line(8).unwrap();
        let f = ScalarField::constant(&g8, 1.0);
        assert!(matches!(g4.laplacian(&f), Err(Error::GridMismatch { .. })));
        assert!(g4.integrate(&f).is_err());
    }

    #[test]
    fn fields_reject_bad_values() {
        let g = Grid::<f64>::line(3).unwrap();
        assert!(ScalarField::new(&g, vec![0.0; 2]).is_err());
        assert!(matches!(
            ScalarField::new(&g, vec![0.0, f64::NAN, 1.0]),
            Err(Error::NonFinite { index: 1 })
        ));
    }

    #[test]
    fn reflect_is_an_involution_per_axis() {
        let g = Grid::<f64>::new(2, &[3, 4]).unwrap();
        let f = ScalarField::new(&g, (0..12).map(f64::from).collect()).unwrap();
        let r0 = f.reflect(0);
        assert_eq!(&r0.values()[..4], &[8.0, 9.0, 10.0, 11.0]);
        let r1 = f.reflect(1);
        assert_eq!(&r1.values()[..4], &[3.0, 2.0, 1.0, 0.0]);
        assert_eq!(r0.reflect(0), f);
        assert_eq!(r1.reflect(1), f);
    }

    #[test]
    fn works_in_single_precision() {
        let g = Grid::<f32>::line(4).unwrap();
        let f = ScalarField::new(&g, vec![0.0f32, 1.0, 1.0, 0.0]).unwrap();
        assert_eq!(g.laplacian(&f).unwrap().values(), &[16.0f32, -16.0, -16.0, 16.0]);
        assert_eq!(g.integrate(&f).unwrap(), 0.5f32);
    }
}
