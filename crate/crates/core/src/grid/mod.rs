//! Uniform grids on the square `[-L, L]²` and the scalar/vector/tensor
//! fields sampled on them.

mod cutoff;
mod diff;

pub use cutoff::{make_cutoff, CutoffProfile};
pub use diff::{gradient_fd, hessian_fd};

use serde::Serialize;

use crate::error::{LabError, Result};

/// Relative tolerance used when deciding whether a node lies in a closed disk.
/// Nodes that sit on the circle up to round-off are counted as inside.
const DISK_MEMBERSHIP_RTOL: f64 = 1e-12;

/// Uniform tensor grid with `n` nodes per axis on `[-L, L]²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Grid2 {
    half_width: f64,
    n: usize,
    spacing: f64,
}

impl Grid2 {
    pub const MIN_NODES: usize = 5;

    pub fn new(half_width: f64, n: usize) -> Result<Self> {
        if n < Self::MIN_NODES {
            return Err(LabError::TooFewNodes {
                min: Self::MIN_NODES,
                got: n,
            });
        }
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(LabError::BadHalfWidth(half_width));
        }
        Ok(Self {
            half_width,
            n,
            spacing: 2.0 * half_width / (n - 1) as f64,
        })
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn nodes_per_axis(&self) -> usize {
        self.n
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Coordinate of the `k`-th node along either axis.
    ///
    /// Computed as `(2k - (n-1)) h/2` so that mirrored nodes are exact
    /// negatives of each other and the centre node (odd `n`) is exactly zero.
    #[inline]
    pub fn coord(&self, k: usize) -> f64 {
        (2.0 * k as f64 - (self.n - 1) as f64) * (0.5 * self.spacing)
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.n + i
    }

    #[inline]
    pub fn node(&self, index: usize) -> (usize, usize) {
        (index % self.n, index / self.n)
    }

    #[inline]
    pub fn point(&self, i: usize, j: usize) -> (f64, f64) {
        (self.coord(i), self.coord(j))
    }

    #[inline]
    pub fn point_of(&self, index: usize) -> (f64, f64) {
        let (i, j) = self.node(index);
        self.point(i, j)
    }

    /// Index of the node at the origin, when `n` is odd.
    pub fn origin(&self) -> Option<usize> {
        (self.n % 2 == 1).then(|| {
            let c = (self.n - 1) / 2;
            self.index(c, c)
        })
    }

    /// Whether the node is at least `margin` nodes away from every edge.
    #[inline]
    pub fn is_interior(&self, i: usize, j: usize, margin: usize) -> bool {
        i >= margin && j >= margin && i + margin < self.n && j + margin < self.n
    }

    #[inline]
    pub fn in_disk(&self, i: usize, j: usize, radius: f64) -> bool {
        let (x, y) = self.point(i, j);
        x * x + y * y <= radius * radius * (1.0 + DISK_MEMBERSHIP_RTOL)
    }

    /// Flat indices of the nodes inside the closed disk of the given radius.
    pub fn disk_indices(&self, radius: f64) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(move |&k| {
            let (i, j) = self.node(k);
            self.in_disk(i, j, radius)
        })
    }

    pub fn check_radius(&self, radius: f64) -> Result<()> {
        if radius > self.half_width * (1.0 + DISK_MEMBERSHIP_RTOL) || !radius.is_finite() {
            return Err(LabError::RadiusOutsideGrid {
                radius,
                half_width: self.half_width,
            });
        }
        Ok(())
    }
}

/// Builds the grid with half width `half_width` and `n` nodes per axis.
pub fn build_grid(half_width: f64, n: usize) -> Result<Grid2> {
    Grid2::new(half_width, n)
}

/// Node values of a real function on a [`Grid2`]. All values are finite.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField2 {
    grid: Grid2,
    values: Vec<f64>,
}

impl ScalarField2 {
    pub fn from_values(grid: Grid2, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(LabError::WrongLength {
                expected: grid.len(),
                got: values.len(),
            });
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            let (i, j) = grid.node(k);
            return Err(LabError::NonFinite {
                i,
                j,
                value: values[k],
            });
        }
        Ok(Self { grid, values })
    }

    /// Internal constructor for values produced by finite arithmetic on
    /// finite fields.
    pub(crate) fn from_trusted(grid: Grid2, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn constant(grid: Grid2, value: f64) -> Result<Self> {
        Self::from_values(grid, vec![value; grid.len()])
    }

    pub fn grid(&self) -> &Grid2 {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    pub fn same_grid(&self, other: &ScalarField2) -> Result<()> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(LabError::GridMismatch)
        }
    }

    /// Node-wise map. Fails if the map produces a non-finite value.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::from_values(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &ScalarField2, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.same_grid(other)?;
        Self::from_values(
            self.grid,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        )
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

    /// See [`integrate_disk`].
    pub fn integrate_disk(&self, radius: f64) -> Result<f64> {
        integrate_disk(self, radius)
    }

    /// See [`sup_norm_disk`].
    pub fn sup_norm_disk(&self, radius: f64) -> Result<f64> {
        sup_norm_disk(self, radius)
    }
}

/// Samples `f` at every node. Rejects non-finite values.
pub fn sample(f: impl Fn(f64, f64) -> f64, grid: &Grid2) -> Result<ScalarField2> {
    let values = (0..grid.len())
        .map(|k| {
            let (x1, x2) = grid.point_of(k);
            f(x1, x2)
        })
        .collect();
    ScalarField2::from_values(*grid, values)
}

/// Node-indicator quadrature `Σ_{|x|≤r} f h²` over the closed disk `B_r`.
pub fn integrate_disk(f: &ScalarField2, radius: f64) -> Result<f64> {
    let grid = f.grid();
    grid.check_radius(radius)?;
    let h2 = grid.spacing() * grid.spacing();
    Ok(grid.disk_indices(radius).map(|k| f.values[k]).sum::<f64>() * h2)
}

/// `max |f|` over the nodes of the closed disk `B_r`.
pub fn sup_norm_disk(f: &ScalarField2, radius: f64) -> Result<f64> {
    let grid = f.grid();
    grid.check_radius(radius)?;
    Ok(grid
        .disk_indices(radius)
        .fold(0.0, |m, k| m.max(f.values[k].abs())))
}

/// Two-component field sharing one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Vec2Field {
    pub x1: ScalarField2,
    pub x2: ScalarField2,
}

impl Vec2Field {
    pub fn new(x1: ScalarField2, x2: ScalarField2) -> Result<Self> {
        x1.same_grid(&x2)?;
        Ok(Self { x1, x2 })
    }

    pub fn grid(&self) -> &Grid2 {
        self.x1.grid()
    }

    #[inline]
    pub fn at_index(&self, k: usize) -> [f64; 2] {
        [self.x1.values[k], self.x2.values[k]]
    }

    /// Euclidean length at every node.
    pub fn norm(&self) -> ScalarField2 {
        let values = self
            .x1
            .values
            .iter()
            .zip(&self.x2.values)
            .map(|(a, b)| a.hypot(*b))
            .collect();
        ScalarField2::from_trusted(*self.grid(), values)
    }
}

/// Symmetric 2×2 tensor field stored as `(m11, m12, m22)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMat2Field {
    pub m11: ScalarField2,
    pub m12: ScalarField2,
    pub m22: ScalarField2,
}

impl SymMat2Field {
    pub fn new(m11: ScalarField2, m12: ScalarField2, m22: ScalarField2) -> Result<Self> {
        m11.same_grid(&m12)?;
        m11.same_grid(&m22)?;
        Ok(Self { m11, m12, m22 })
    }

    pub fn grid(&self) -> &Grid2 {
        self.m11.grid()
    }

    #[inline]
    pub fn at_index(&self, k: usize) -> crate::geometry::Sym2 {
        crate::geometry::Sym2::new(self.m11.values[k], self.m12.values[k], self.m22.values[k])
    }

    /// Builds a field by evaluating a node-wise tensor function.
    pub fn from_fn(grid: Grid2, f: impl Fn(usize) -> crate::geometry::Sym2) -> Result<Self> {
        let mut m11 = Vec::with_capacity(grid.len());
        let mut m12 = Vec::with_capacity(grid.len());
        let mut m22 = Vec::with_capacity(grid.len());
        for k in 0..grid.len() {
            let s = f(k);
            m11.push(s.m11);
            m12.push(s.m12);
            m22.push(s.m22);
        }
        Self::new(
            ScalarField2::from_values(grid, m11)?,
            ScalarField2::from_values(grid, m12)?,
            ScalarField2::from_values(grid, m22)?,
        )
    }
}
