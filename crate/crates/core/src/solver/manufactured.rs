//! Exact solution pairs `(u, ψ)` with `ψ` read off the analytic Hessian.

use std::sync::Arc;

use crate::error::{LabError, Result};
use crate::geometry::{phase_of_hessian, GeometryBundle};
use crate::grid::{sample, Grid2, ScalarField2, SymMat2Field, Vec2Field};
use crate::inequalities::Regime;

use super::Potential;

/// Dirichlet data on the outer ring of grid nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryTrace {
    grid: Grid2,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl BoundaryTrace {
    fn ring(grid: &Grid2) -> Vec<usize> {
        let n = grid.nodes_per_axis();
        (0..grid.len())
            .filter(|&k| {
                let (i, j) = grid.node(k);
                i == 0 || j == 0 || i == n - 1 || j == n - 1
            })
            .collect()
    }

    /// Exact samples of `f` on the boundary ring.
    pub fn from_fn(grid: &Grid2, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let indices = Self::ring(grid);
        let mut values = Vec::with_capacity(indices.len());
        for &k in &indices {
            let (x, y) = grid.point_of(k);
            let v = f(x, y);
            if !v.is_finite() {
                let (i, j) = grid.node(k);
                return Err(LabError::NonFinite { i, j, value: v });
            }
            values.push(v);
        }
        Ok(Self {
            grid: *grid,
            indices,
            values,
        })
    }

    /// Boundary ring of an existing field.
    pub fn from_field(f: &ScalarField2) -> Self {
        let grid = *f.grid();
        let indices = Self::ring(&grid);
        let values = indices.iter().map(|&k| f.values()[k]).collect();
        Self {
            grid,
            indices,
            values,
        }
    }

    pub fn grid(&self) -> &Grid2 {
        &self.grid
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Overwrites the boundary ring of a full node vector.
    pub fn impose(&self, u: &mut [f64]) {
        for (&k, &v) in self.indices.iter().zip(&self.values) {
            u[k] = v;
        }
    }

    /// Adds `⟨p, x⟩ + c` to the data.
    pub fn shifted(&self, slope: [f64; 2], offset: f64) -> Self {
        let values = self
            .indices
            .iter()
            .zip(&self.values)
            .map(|(&k, &v)| {
                let (x, y) = self.grid.point_of(k);
                v + slope[0] * x + slope[1] * y + offset
            })
            .collect();
        Self {
            values,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone)]
pub struct ManufacturedProblem {
    pub potential: Arc<dyn Potential>,
    pub delta: f64,
    pub u_exact: ScalarField2,
    pub gradient_exact: Vec2Field,
    pub hessian_exact: SymMat2Field,
    pub psi: ScalarField2,
    pub boundary: BoundaryTrace,
    pub regime: Regime,
}

impl ManufacturedProblem {
    pub fn grid(&self) -> &Grid2 {
        self.u_exact.grid()
    }

    /// Geometry from the analytic derivatives.
    pub fn exact_bundle(&self) -> Result<GeometryBundle> {
        GeometryBundle::from_derivatives(self.gradient_exact.clone(), self.hessian_exact.clone())
    }

    /// Geometry from finite differences of the sampled `u`, carrying the
    /// analytic phase.
    pub fn sampled_bundle(&self) -> Result<GeometryBundle> {
        GeometryBundle::from_potential(&self.u_exact)?.with_phase(self.psi.clone())
    }

    /// The same potential on another grid.
    pub fn on_grid(&self, grid: &Grid2) -> Result<Self> {
        manufacture(self.potential.clone(), grid, self.delta)
    }
}

/// Samples `u`, its analytic derivatives and its phase on `grid`, and tags
/// the regime of the phase range against `delta`.
pub fn manufacture(potential: Arc<dyn Potential>, grid: &Grid2, delta: f64) -> Result<ManufacturedProblem> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(LabError::Precondition(format!("delta must be positive, got {delta}")));
    }
    let p = potential.as_ref();
    let u_exact = sample(|x, y| p.value(x, y), grid)?;
    let gradient_exact = Vec2Field::new(
        sample(|x, y| p.gradient(x, y)[0], grid)?,
        sample(|x, y| p.gradient(x, y)[1], grid)?,
    )?;
    let hessian_exact = SymMat2Field::from_fn(*grid, |k| {
        let (x, y) = grid.point_of(k);
        p.hessian(x, y)
    })?;
    // a Hessian whose squares overflow has no meaningful phase or metric
    for k in 0..grid.len() {
        let s = hessian_exact.at_index(k);
        if !s.graph_metric().is_finite() {
            let (i, j) = grid.node(k);
            return Err(LabError::NonFinite {
                i,
                j,
                value: s.spectral_norm(),
            });
        }
    }
    let psi = ScalarField2::from_values(
        *grid,
        (0..grid.len())
            .map(|k| phase_of_hessian(hessian_exact.at_index(k)))
            .collect(),
    )?;
    let regime = Regime::classify(psi.min(), psi.max(), delta);
    Ok(ManufacturedProblem {
        boundary: BoundaryTrace::from_fn(grid, |x, y| p.value(x, y))?,
        potential,
        delta,
        u_exact,
        gradient_exact,
        hessian_exact,
        psi,
        regime,
    })
}
