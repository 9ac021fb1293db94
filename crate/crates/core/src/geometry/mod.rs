//! Grids, fields and conformal metrics on a periodic rectangle.
//!
//! Every metric handled here has the form `g = e^{2f}(dx² + dy²)` with `f`
//! sampled at the nodes `(i·hx, j·hy)` of an `nx × ny` periodic grid. Fields are stored
//! row-major (`index = j * nx + i`, `i` along x). Tensor fields are stored
//! cell-major with `2^rank` coordinate components per cell.

mod calculus;
mod distance;

pub use calculus::{
    covariant_derivative, curvature_derivative_norm, gradient, laplace_beltrami,
    scalar_curvature, tensor_norm, CovariantCalculus,
};
pub(crate) use calculus::flat_laplacian;
pub use distance::{geodesic_distance, metric_ball, BallMask, NEIGHBOR_OFFSETS};

use thiserror::Error;

/// Highest tensor rank produced by repeated covariant differentiation.
pub const DEFAULT_MAX_RANK: usize = 4;

/// Smallest admissible cell count per axis.
pub const MIN_CELLS: usize = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("field shape does not match grid: expected {expected} values, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("unsupported tensor rank {rank} (maximum {max})")]
    UnsupportedRank { rank: usize, max: usize },
    #[error("unsupported curvature derivative order {order} (maximum {max})")]
    UnsupportedOrder { order: usize, max: usize },
    #[error("grid index ({i}, {j}) outside {nx}x{ny} grid")]
    IndexOutOfRange { i: usize, j: usize, nx: usize, ny: usize },
}

pub type Result<T> = std::result::Result<T, GeometryError>;

/// Periodic rectangle `[0, lx) × [0, ly)` split into `nx × ny` cells.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
}

impl GridSpec {
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Self> {
        if nx < MIN_CELLS || ny < MIN_CELLS {
            return Err(GeometryError::InvalidGrid(format!(
                "need at least {MIN_CELLS} cells per axis, got {nx}x{ny}"
            )));
        }
        if !(lx.is_finite() && ly.is_finite() && lx > 0.0 && ly > 0.0) {
            return Err(GeometryError::InvalidGrid(format!(
                "side lengths must be positive and finite, got {lx} x {ly}"
            )));
        }
        Ok(Self { nx, ny, lx, ly })
    }

    /// Square `[0, 2π)²` grid with `n` cells per side.
    pub fn square_2pi(n: usize) -> Result<Self> {
        Self::new(n, n, std::f64::consts::TAU, std::f64::consts::TAU)
    }

    pub fn hx(&self) -> f64 {
        self.lx / self.nx as f64
    }

    pub fn hy(&self) -> f64 {
        self.ly / self.ny as f64
    }

    pub fn h_min(&self) -> f64 {
        self.hx().min(self.hy())
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn ij(&self, cell: usize) -> (usize, usize) {
        (cell % self.nx, cell / self.nx)
    }

    /// Index of the cell displaced by `(di, dj)` with periodic wraparound.
    #[inline]
    pub fn offset(&self, cell: usize, di: isize, dj: isize) -> usize {
        let (i, j) = self.ij(cell);
        let i = (i as isize + di).rem_euclid(self.nx as isize) as usize;
        let j = (j as isize + dj).rem_euclid(self.ny as isize) as usize;
        self.index(i, j)
    }

    /// Physical coordinates of the grid node `(i, j)`.
    pub fn coords(&self, i: usize, j: usize) -> (f64, f64) {
        (i as f64 * self.hx(), j as f64 * self.hy())
    }

    pub fn check_index(&self, i: usize, j: usize) -> Result<usize> {
        if i >= self.nx || j >= self.ny {
            return Err(GeometryError::IndexOutOfRange {
                i,
                j,
                nx: self.nx,
                ny: self.ny,
            });
        }
        Ok(self.index(i, j))
    }

    /// Same grid with both cell counts doubled.
    pub fn refined(&self) -> Self {
        Self {
            nx: 2 * self.nx,
            ny: 2 * self.ny,
            ..*self
        }
    }
}

/// Real values sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    spec: GridSpec,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn from_values(spec: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.len() {
            return Err(GeometryError::ShapeMismatch {
                expected: spec.len(),
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(GeometryError::NonFinite("scalar field"));
        }
        Ok(Self { spec, values })
    }

    /// Builds a field without the finiteness check. Used by integrators that
    /// inspect the result themselves.
    pub(crate) fn from_raw(spec: GridSpec, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), spec.len());
        Self { spec, values }
    }

    pub fn from_fn(spec: GridSpec, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(spec.len());
        for j in 0..spec.ny {
            for i in 0..spec.nx {
                let (x, y) = spec.coords(i, j);
                values.push(f(x, y));
            }
        }
        Self { spec, values }
    }

    pub fn constant(spec: GridSpec, value: f64) -> Self {
        Self {
            spec,
            values: vec![value; spec.len()],
        }
    }

    pub fn zeros(spec: GridSpec) -> Self {
        Self::constant(spec, 0.0)
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[self.spec.index(i, j)]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            spec: self.spec,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.spec != other.spec {
            return Err(GeometryError::GridMismatch);
        }
        Ok(Self {
            spec: self.spec,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Coordinate components of a covariant tensor field (all indices down).
///
/// Component `c` of a rank-`r` tensor carries index `m` (0-based, first index
/// most significant) in bit `r - 1 - m` of `c`.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorField {
    spec: GridSpec,
    rank: usize,
    components: Vec<f64>,
}

impl TensorField {
    pub fn zeros(spec: GridSpec, rank: usize) -> Self {
        Self {
            spec,
            rank,
            components: vec![0.0; spec.len() << rank],
        }
    }

    pub fn from_components(spec: GridSpec, rank: usize, components: Vec<f64>) -> Result<Self> {
        let expected = spec.len() << rank;
        if components.len() != expected {
            return Err(GeometryError::ShapeMismatch {
                expected,
                got: components.len(),
            });
        }
        if components.iter().any(|v| !v.is_finite()) {
            return Err(GeometryError::NonFinite("tensor field"));
        }
        Ok(Self {
            spec,
            rank,
            components,
        })
    }

    /// Rank-0 view of a scalar field.
    pub fn from_scalar(field: &ScalarField) -> Self {
        Self {
            spec: field.spec,
            rank: 0,
            components: field.values.clone(),
        }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn num_components(&self) -> usize {
        1 << self.rank
    }

    pub fn components(&self) -> &[f64] {
        &self.components
    }

    /// Components at one cell.
    pub fn cell(&self, cell: usize) -> &[f64] {
        let n = self.num_components();
        &self.components[cell * n..(cell + 1) * n]
    }

    pub fn scaled(&self, lambda: f64) -> Self {
        Self {
            spec: self.spec,
            rank: self.rank,
            components: self.components.iter().map(|c| lambda * c).collect(),
        }
    }
}

/// Conformal metric `e^{2f}(dx² + dy²)` at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConformalMetric {
    f: ScalarField,
    t: f64,
}

impl ConformalMetric {
    pub fn new(f: ScalarField, t: f64) -> Result<Self> {
        if !f.is_finite() {
            return Err(GeometryError::NonFinite("conformal exponent"));
        }
        Ok(Self { f, t })
    }

    pub fn flat(spec: GridSpec) -> Self {
        Self {
            f: ScalarField::zeros(spec),
            t: 0.0,
        }
    }

    pub fn from_fn(spec: GridSpec, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        Self::new(ScalarField::from_fn(spec, f), 0.0)
    }

    pub fn spec(&self) -> &GridSpec {
        self.f.spec()
    }

    /// Conformal exponent field `f`.
    pub fn exponent(&self) -> &ScalarField {
        &self.f
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn with_time(mut self, t: f64) -> Self {
        self.t = t;
        self
    }

    /// Metric with `f` replaced by `f + c`.
    pub fn shifted(&self, c: f64) -> Self {
        Self {
            f: self.f.map(|v| v + c),
            t: self.t,
        }
    }

    /// Conformal factor `e^{2f}` at a cell.
    #[inline]
    pub fn conformal_factor(&self, cell: usize) -> f64 {
        (2.0 * self.f.values[cell]).exp()
    }

    /// Riemannian area of one cell, `e^{2f} hx hy`.
    #[inline]
    pub fn area_element(&self, cell: usize) -> f64 {
        let spec = self.spec();
        self.conformal_factor(cell) * spec.hx() * spec.hy()
    }

    pub fn total_area(&self) -> f64 {
        (0..self.spec().len()).map(|c| self.area_element(c)).sum()
    }

    pub fn min_conformal_factor(&self) -> f64 {
        (2.0 * self.f.min()).exp()
    }

    /// Midpoint-rule integral `∫ field dg`.
    pub fn integrate(&self, field: &ScalarField) -> f64 {
        field
            .values()
            .iter()
            .enumerate()
            .map(|(c, v)| v * self.area_element(c))
            .sum()
    }

    pub(crate) fn check_aligned(&self, spec: &GridSpec) -> Result<()> {
        if self.spec() != spec {
            return Err(GeometryError::GridMismatch);
        }
        Ok(())
    }
}
