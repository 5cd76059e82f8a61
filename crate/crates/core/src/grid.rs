//! Periodic uniform grids and the scalar fields that live on them.

use crate::error::{Error, Result};

/// Smallest admissible number of cells per axis.
pub const MIN_CELLS: usize = 16;

/// User-facing description of a grid: the box `[-L, L]^d` split into
/// `N` cells per axis, periodic on every side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub dim: usize,
    pub half_width: f64,
    pub cells: usize,
}

impl GridSpec {
    pub fn new(dim: usize, half_width: f64, cells: usize) -> Self {
        Self {
            dim,
            half_width,
            cells,
        }
    }
}

/// A validated periodic grid. Cheap to copy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    dim: usize,
    n: usize,
    half_width: f64,
    dx: f64,
}

pub fn make_grid(spec: GridSpec) -> Result<Grid> {
    Grid::new(spec)
}

impl Grid {
    pub fn new(spec: GridSpec) -> Result<Self> {
        let GridSpec {
            dim,
            half_width,
            cells,
        } = spec;
        if dim != 1 && dim != 2 {
            return Err(Error::InvalidGrid(format!("dimension must be 1 or 2, got {dim}")));
        }
        if cells < MIN_CELLS {
            return Err(Error::InvalidGrid(format!(
                "need at least {MIN_CELLS} cells per axis, got {cells}"
            )));
        }
        if cells % 2 != 0 {
            return Err(Error::InvalidGrid(format!(
                "cells per axis must be even, got {cells}"
            )));
        }
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "half-width must be positive, got {half_width}"
            )));
        }
        Ok(Self::unchecked(dim, cells, half_width))
    }

    /// Builds a grid without the minimum-size rule. Only used where a tiny
    /// grid is needed for hand-checkable values.
    pub(crate) fn unchecked(dim: usize, n: usize, half_width: f64) -> Self {
        Self {
            dim,
            n,
            half_width,
            dx: 2.0 * half_width / n as f64,
        }
    }

    pub fn spec(&self) -> GridSpec {
        GridSpec::new(self.dim, self.half_width, self.n)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Cells per axis.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    /// Quadrature weight `dx^d` of a single cell.
    pub fn cell_volume(&self) -> f64 {
        self.dx.powi(self.dim as i32)
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Measure of the whole box, `(2L)^d`.
    pub fn volume(&self) -> f64 {
        (2.0 * self.half_width).powi(self.dim as i32)
    }

    /// Center coordinate of cell `i` along one axis.
    pub fn coord(&self, i: usize) -> f64 {
        -self.half_width + (i as f64 + 0.5) * self.dx
    }

    /// Per-axis indices of a flat (row-major) cell index.
    pub fn unflatten(&self, idx: usize) -> [usize; 2] {
        if self.dim == 1 {
            [idx, 0]
        } else {
            [idx / self.n, idx % self.n]
        }
    }

    pub fn flatten(&self, ij: [usize; 2]) -> usize {
        if self.dim == 1 {
            ij[0]
        } else {
            ij[0] * self.n + ij[1]
        }
    }

    /// Cell center; the second component is zero in 1D.
    pub fn center(&self, idx: usize) -> [f64; 2] {
        let [i, j] = self.unflatten(idx);
        if self.dim == 1 {
            [self.coord(i), 0.0]
        } else {
            [self.coord(i), self.coord(j)]
        }
    }

    pub fn radius_sq(&self, idx: usize) -> f64 {
        let [x, y] = self.center(idx);
        x * x + y * y
    }

    /// Flat index of the cell displaced by `offset` cells along `axis`,
    /// wrapping periodically.
    pub fn shift(&self, idx: usize, axis: usize, offset: isize) -> usize {
        let mut ij = self.unflatten(idx);
        let n = self.n as isize;
        ij[axis] = (ij[axis] as isize + offset).rem_euclid(n) as usize;
        self.flatten(ij)
    }

    /// Signed lattice offset of index `i` in the range `[-N/2, N/2)`.
    pub fn signed_offset(&self, i: usize) -> isize {
        let n = self.n as isize;
        let i = i as isize;
        if i >= n / 2 {
            i - n
        } else {
            i
        }
    }
}

/// Cell-centered scalar field.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        Self {
            grid,
            values: vec![c; grid.len()],
        }
    }

    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::ShapeMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { grid, values })
    }

    /// Samples `f` at every cell center.
    pub fn from_fn(grid: Grid, f: impl Fn([f64; 2]) -> f64) -> Self {
        let values = (0..grid.len()).map(|i| f(grid.center(i))).collect();
        Self { grid, values }
    }

    /// Wraps values the caller guarantees to be finite and of the right length.
    pub(crate) fn from_raw(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Midpoint-rule integral `sum f_i dx^d`.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_volume()
    }

    /// First non-finite entry, if any.
    pub fn first_non_finite(&self) -> Option<usize> {
        self.values.iter().position(|v| !v.is_finite())
    }

    /// Rejects negative entries, naming the offending cell.
    pub fn check_nonnegative(&self) -> Result<()> {
        match self.values.iter().position(|&v| !(v >= 0.0)) {
            None => Ok(()),
            Some(index) => Err(Error::NegativeDensity {
                index,
                value: self.values[index],
            }),
        }
    }

    pub fn same_grid(&self, other: &Field) -> Result<()> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64 + Sync + Send) -> Field {
        let v = &self.values;
        Field::from_raw(self.grid, crate::par::map_cells(v.len(), |i| f(v[i])))
    }

    pub fn zip_map(&self, other: &Field, f: impl Fn(f64, f64) -> f64 + Sync + Send) -> Field {
        let (a, b) = (&self.values, &other.values);
        Field::from_raw(self.grid, crate::par::map_cells(a.len(), |i| f(a[i], b[i])))
    }

    pub fn add(&self, other: &Field) -> Field {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Field) -> Field {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn scale(&self, c: f64) -> Field {
        self.map(|a| c * a)
    }
}

impl std::ops::Index<usize> for Field {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.values[i]
    }
}

/// Staggered field: one value per cell face per axis. `axis(a)[i]` lives on
/// the face between cell `i` and its `+1` neighbour along axis `a`; the last
/// face on each axis wraps onto the first cell.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceField {
    grid: Grid,
    axes: Vec<Vec<f64>>,
}

impl FaceField {
    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            axes: vec![vec![0.0; grid.len()]; grid.dim()],
        }
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        Self {
            grid,
            axes: vec![vec![c; grid.len()]; grid.dim()],
        }
    }

    pub fn from_axes(grid: Grid, axes: Vec<Vec<f64>>) -> Result<Self> {
        if axes.len() != grid.dim() {
            return Err(Error::ShapeMismatch {
                expected: grid.dim(),
                got: axes.len(),
            });
        }
        for a in &axes {
            if a.len() != grid.len() {
                return Err(Error::ShapeMismatch {
                    expected: grid.len(),
                    got: a.len(),
                });
            }
        }
        Ok(Self { grid, axes })
    }

    pub(crate) fn from_raw(grid: Grid, axes: Vec<Vec<f64>>) -> Self {
        Self { grid, axes }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn axis(&self, a: usize) -> &[f64] {
        &self.axes[a]
    }

    pub fn axes(&self) -> &[Vec<f64>] {
        &self.axes
    }

    pub fn max_abs(&self) -> f64 {
        self.axes
            .iter()
            .flat_map(|a| a.iter())
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `sum over faces of |F|^2 dx^d`.
    pub fn sq_integral(&self) -> f64 {
        let s: f64 = self.axes.iter().flat_map(|a| a.iter()).map(|v| v * v).sum();
        s * self.grid.cell_volume()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64 + Sync + Send) -> FaceField {
        let axes = self
            .axes
            .iter()
            .map(|a| crate::par::map_cells(a.len(), |i| f(a[i])))
            .collect();
        FaceField::from_raw(self.grid, axes)
    }

    pub fn sub(&self, other: &FaceField) -> FaceField {
        let axes = self
            .axes
            .iter()
            .zip(&other.axes)
            .map(|(a, b)| crate::par::map_cells(a.len(), |i| a[i] - b[i]))
            .collect();
        FaceField::from_raw(self.grid, axes)
    }
}

/// Pressure law `p = (u + v)^gamma`.
pub fn pressure_field(u: &Field, v: &Field, gamma: f64) -> Result<Field> {
    u.same_grid(v)?;
    u.check_nonnegative()?;
    v.check_nonnegative()?;
    Ok(u.zip_map(v, |a, b| pressure(a + b, gamma)))
}

/// Scalar pressure law; vacuum maps to zero pressure.
#[inline]
pub fn pressure(density: f64, gamma: f64) -> f64 {
    if density <= 0.0 {
        0.0
    } else {
        density.powf(gamma)
    }
}
