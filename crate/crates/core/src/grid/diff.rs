//! Second-order finite differences with one-sided closures at the edges.

use super::{Grid2, ScalarField2, SymMat2Field, Vec2Field};

#[derive(Clone, Copy)]
enum Axis {
    X1,
    X2,
}

impl Axis {
    fn stride(self, n: usize) -> usize {
        match self {
            Axis::X1 => 1,
            Axis::X2 => n,
        }
    }

    fn position(self, grid: &Grid2, k: usize) -> usize {
        let (i, j) = grid.node(k);
        match self {
            Axis::X1 => i,
            Axis::X2 => j,
        }
    }
}

/// First derivative along one axis: central inside, three-point one-sided at
/// the two edge lines.
fn first_derivative(grid: &Grid2, f: &[f64], axis: Axis) -> Vec<f64> {
    let n = grid.nodes_per_axis();
    let s = axis.stride(n);
    let inv2h = 0.5 / grid.spacing();
    (0..grid.len())
        .map(|k| match axis.position(grid, k) {
            0 => (-3.0 * f[k] + 4.0 * f[k + s] - f[k + 2 * s]) * inv2h,
            p if p == n - 1 => (3.0 * f[k] - 4.0 * f[k - s] + f[k - 2 * s]) * inv2h,
            _ => (f[k + s] - f[k - s]) * inv2h,
        })
        .collect()
}

/// Second derivative along one axis: three-point central inside, four-point
/// one-sided (second-order) at the edges.
fn second_derivative(grid: &Grid2, f: &[f64], axis: Axis) -> Vec<f64> {
    let n = grid.nodes_per_axis();
    let s = axis.stride(n);
    let invh2 = 1.0 / (grid.spacing() * grid.spacing());
    (0..grid.len())
        .map(|k| match axis.position(grid, k) {
            0 => (2.0 * f[k] - 5.0 * f[k + s] + 4.0 * f[k + 2 * s] - f[k + 3 * s]) * invh2,
            p if p == n - 1 => {
                (2.0 * f[k] - 5.0 * f[k - s] + 4.0 * f[k - 2 * s] - f[k - 3 * s]) * invh2
            }
            _ => (f[k + s] - 2.0 * f[k] + f[k - s]) * invh2,
        })
        .collect()
}

/// Finite-difference gradient `Du`, second order at every node.
pub fn gradient_fd(f: &ScalarField2) -> Vec2Field {
    let grid = *f.grid();
    Vec2Field {
        x1: ScalarField2::from_trusted(grid, first_derivative(&grid, f.values(), Axis::X1)),
        x2: ScalarField2::from_trusted(grid, first_derivative(&grid, f.values(), Axis::X2)),
    }
}

/// Finite-difference Hessian `D²u`, second order at every node.
///
/// The mixed derivative is the x1-difference of the x2-difference. Both
/// operators act along independent axes with line-invariant stencils, so
/// they commute and the result is symmetric by construction.
pub fn hessian_fd(f: &ScalarField2) -> SymMat2Field {
    let grid = *f.grid();
    let d2 = first_derivative(&grid, f.values(), Axis::X2);
    SymMat2Field {
        m11: ScalarField2::from_trusted(grid, second_derivative(&grid, f.values(), Axis::X1)),
        m12: ScalarField2::from_trusted(grid, first_derivative(&grid, &d2, Axis::X1)),
        m22: ScalarField2::from_trusted(grid, second_derivative(&grid, f.values(), Axis::X2)),
    }
}
