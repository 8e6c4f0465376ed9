//! Exact algebraic and structural identities, checked node by node.
//!
//! Each check returns an [`IdentityReport`]. Tolerances come in two classes:
//! purely algebraic identities on the eigenvalues are held to round-off, while
//! identities that go through finite differences get `C h²` with `C = 10`.

use serde::Serialize;

use crate::error::{LabError, Result};
use crate::geometry::{eigenvalues, laplace_beltrami, mean_curvature, GeometryBundle};
use crate::grid::{hessian_fd, CutoffProfile, Grid2, ScalarField2};

/// Round-off budget of the factorization `(1+iλ₁)(1+iλ₂) = V e^{iψ}`,
/// relative to `1 + max V`.
pub const FACTORIZATION_RTOL: f64 = 1e-12;
/// Round-off budget of `V = σ₁ / sin ψ`, relative to `max V`.
pub const VOLUME_FORMULA_RTOL: f64 = 1e-10;
/// `C` in the `C h²` budget of difference-based identities.
pub const DIFFERENCING_C: f64 = 10.0;
/// Largest tolerated gap between a bundle's phase and the phase of its
/// Hessian before it stops counting as a solution of the equation.
pub const SOLUTION_PHASE_TOL: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ToleranceClass {
    Algebraic,
    Differencing,
}

#[derive(Debug, Clone, Serialize)]
pub struct IdentityReport {
    pub name: String,
    pub class: ToleranceClass,
    pub max_residual: f64,
    /// Node `(i, j)` of the largest residual.
    pub location: Option<(usize, usize)>,
    pub point: Option<(f64, f64)>,
    pub tolerance: f64,
    pub pass: bool,
    /// Further named quantities reported alongside the residual.
    pub extras: Vec<(String, f64)>,
}

impl IdentityReport {
    fn new(
        name: &str,
        class: ToleranceClass,
        grid: &Grid2,
        worst: Worst,
        tolerance: f64,
        extras: Vec<(String, f64)>,
    ) -> Self {
        let location = worst.index.map(|k| grid.node(k));
        Self {
            name: name.to_string(),
            class,
            max_residual: worst.value,
            location,
            point: worst.index.map(|k| grid.point_of(k)),
            tolerance,
            pass: worst.value <= tolerance,
            extras,
        }
    }

    pub fn extra(&self, key: &str) -> Option<f64> {
        self.extras.iter().find(|(k, _)| k == key).map(|(_, v)| *v)
    }
}

/// Running maximum with its location.
#[derive(Debug, Clone, Copy)]
struct Worst {
    value: f64,
    index: Option<usize>,
}

impl Worst {
    fn new() -> Self {
        Self {
            value: 0.0,
            index: None,
        }
    }

    fn push(&mut self, k: usize, v: f64) {
        if self.index.is_none() || v > self.value {
            self.value = v;
            self.index = Some(k);
        }
    }
}

/// Compares the arctangent form with `cos ψ Δu + sin ψ (det D²u - 1) = 0`.
///
/// With `R₁ = arctan λ₁ + arctan λ₂ - ψ` one has `R₂ = V sin R₁` exactly, so the
/// report passes when `max|R₂| ≤ (1 + max V) max|R₁| + C h²`.
pub fn check_form_equivalence(u: &ScalarField2, psi: &ScalarField2) -> Result<IdentityReport> {
    u.same_grid(psi)?;
    let grid = *u.grid();
    let hess = hessian_fd(u);
    let mut r2 = Worst::new();
    let mut r1_max: f64 = 0.0;
    let mut v_max: f64 = 0.0;
    for k in 0..grid.len() {
        let s = hess.at_index(k);
        let p = psi.values()[k];
        let (l1, l2) = eigenvalues(s);
        let res2 = p.cos() * s.trace() + p.sin() * (s.det() - 1.0);
        r2.push(k, res2.abs());
        r1_max = r1_max.max((l1.atan() + l2.atan() - p).abs());
        v_max = v_max.max(((1.0 + l1 * l1) * (1.0 + l2 * l2)).sqrt());
    }
    let h = grid.spacing();
    let tol = (1.0 + v_max) * r1_max + DIFFERENCING_C * h * h;
    Ok(IdentityReport::new(
        "form_equivalence",
        ToleranceClass::Differencing,
        &grid,
        r2,
        tol,
        vec![
            ("arctan_residual".into(), r1_max),
            ("max_volume".into(), v_max),
        ],
    ))
}

/// `(1 - σ₂, σ₁) = V (cos ψ, sin ψ)` at every node.
pub fn check_complex_factorization(b: &GeometryBundle) -> IdentityReport {
    let grid = *b.grid();
    let mut worst = Worst::new();
    let v = b.volume.values();
    for k in 0..grid.len() {
        let p = b.psi.values()[k];
        let re = 1.0 - b.sigma2.values()[k] - v[k] * p.cos();
        let im = b.sigma1.values()[k] - v[k] * p.sin();
        worst.push(k, re.hypot(im));
    }
    let tol = FACTORIZATION_RTOL * (1.0 + b.volume.max());
    IdentityReport::new(
        "complex_factorization",
        ToleranceClass::Algebraic,
        &grid,
        worst,
        tol,
        vec![("max_volume".into(), b.volume.max())],
    )
}

/// `V = σ₁ / sin ψ` on the nodes where `sin ψ ≥ sin δ`.
///
/// Fails with [`LabError::PhaseOutOfRange`] if any node has `ψ ∉ (0, π)`.
pub fn check_volume_formula(b: &GeometryBundle, delta: f64) -> Result<IdentityReport> {
    let grid = *b.grid();
    if let Some(k) = b
        .psi
        .values()
        .iter()
        .position(|&p| !(p > 0.0 && p < std::f64::consts::PI))
    {
        let (i, j) = grid.node(k);
        return Err(LabError::PhaseOutOfRange(format!(
            "ψ = {} at node ({i}, {j}) is not in (0, π)",
            b.psi.values()[k]
        )));
    }
    let floor = delta.sin();
    let mut worst = Worst::new();
    let mut used = 0usize;
    for k in 0..grid.len() {
        let sp = b.psi.values()[k].sin();
        if sp < floor {
            continue;
        }
        used += 1;
        worst.push(k, (b.volume.values()[k] - b.sigma1.values()[k] / sp).abs());
    }
    let tol = VOLUME_FORMULA_RTOL * b.volume.max();
    Ok(IdentityReport::new(
        "volume_formula",
        ToleranceClass::Algebraic,
        &grid,
        worst,
        tol,
        vec![("nodes_checked".into(), used as f64)],
    ))
}

/// `|∇_g φ|² V ≤ |Dφ|² (2 cos ψ + σ₁ sin ψ)` node-wise, up to `C h²`.
///
/// The right side equals `|Dφ|² tr(g⁻¹) V` whenever `ψ` is the phase of the
/// Hessian, and `gⁱʲφᵢφⱼ ≤ |Dφ|² tr(g⁻¹)` with equality only along an
/// eigendirection, so the relation is an inequality off the Hessian frame.
pub fn check_cutoff_volume_identity(
    b: &GeometryBundle,
    cutoff: &CutoffProfile,
) -> Result<IdentityReport> {
    b.psi.same_grid(cutoff.field())?;
    let defect = b.phase_defect();
    if defect > SOLUTION_PHASE_TOL {
        return Err(LabError::Precondition(format!(
            "bundle phase differs from the Hessian phase by {defect:.3e}; not a solution"
        )));
    }
    let grid = *b.grid();
    let dphi = cutoff.gradient();
    let mut excess = Worst::new();
    let mut min_margin = f64::INFINITY;
    for k in 0..grid.len() {
        let d = dphi.at_index(k);
        let lhs = b.metric_inv.at_index(k).quadratic_form(d) * b.volume.values()[k];
        let p = b.psi.values()[k];
        let rhs = (d[0] * d[0] + d[1] * d[1])
            * (2.0 * p.cos() + b.sigma1.values()[k] * p.sin());
        excess.push(k, (lhs - rhs).max(0.0));
        min_margin = min_margin.min(rhs - lhs);
    }
    let h = grid.spacing();
    Ok(IdentityReport::new(
        "cutoff_volume",
        ToleranceClass::Differencing,
        &grid,
        excess,
        DIFFERENCING_C * h * h,
        vec![
            ("min_margin".into(), min_margin),
            ("phase_defect".into(), defect),
        ],
    ))
}

/// `b ≤ V` at every node, i.e. `b / √det g ≤ 1`.
pub fn check_slope_volume(b: &GeometryBundle) -> IdentityReport {
    let grid = *b.grid();
    let mut excess = Worst::new();
    let mut min_margin = f64::INFINITY;
    for k in 0..grid.len() {
        let d = b.volume.values()[k] - b.slope.values()[k];
        excess.push(k, (-d).max(0.0));
        min_margin = min_margin.min(d);
    }
    IdentityReport::new(
        "slope_volume",
        ToleranceClass::Algebraic,
        &grid,
        excess,
        0.0,
        vec![("min_margin".into(), min_margin)],
    )
}

/// Coordinate functions against the mean curvature: `Δ_g x_k` equals the
/// `x_k` component of `H = J∇_g ψ`, which is `-(D²u g⁻¹ Dψ)_k` and reduces to
/// `-λ_k g^{kk} ψ_k` where the Hessian is diagonal.
///
/// Checked at nodes at least two cells from the edge, against `C h²`.
pub fn check_coordinate_laplacian(b: &GeometryBundle) -> Result<IdentityReport> {
    let grid = *b.grid();
    let x1 = crate::grid::sample(|x, _| x, &grid)?;
    let x2 = crate::grid::sample(|_, y| y, &grid)?;
    let l1 = laplace_beltrami(&x1, b)?;
    let l2 = laplace_beltrami(&x2, b)?;
    let h = mean_curvature(b, &b.psi)?;
    let mut worst = Worst::new();
    for k in 0..grid.len() {
        let (i, j) = grid.node(k);
        if !grid.is_interior(i, j, 2) {
            continue;
        }
        let r = (l1.values()[k] - h.ambient[0].values()[k])
            .abs()
            .max((l2.values()[k] - h.ambient[1].values()[k]).abs());
        worst.push(k, r);
    }
    let sp = grid.spacing();
    Ok(IdentityReport::new(
        "coordinate_laplacian",
        ToleranceClass::Differencing,
        &grid,
        worst,
        DIFFERENCING_C * sp * sp,
        vec![("max_mean_curvature".into(), h.norm.max())],
    ))
}
