//! Node-wise geometry of the Lagrangian graph `(x, Du(x)) ⊂ ℂ²`.
//!
//! For a potential `u` with Hessian eigenvalues `λ₁ ≥ λ₂` the graph carries the
//! induced metric `g = I + (D²u)²`, volume element
//! `V = √((1+λ₁²)(1+λ₂²)) = √det g` and Lagrangian phase
//! `ψ = arctan λ₁ + arctan λ₂`, with `(1+iλ₁)(1+iλ₂) = V e^{iψ}`.

mod operators;

pub use operators::{grad_g_norm2, laplace_beltrami, mean_curvature, MeanCurvature};

use serde::Serialize;

use crate::error::{LabError, Result};
use crate::grid::{gradient_fd, hessian_fd, Grid2, ScalarField2, SymMat2Field, Vec2Field};

/// A single symmetric 2×2 matrix `[[m11, m12], [m12, m22]]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Sym2 {
    pub m11: f64,
    pub m12: f64,
    pub m22: f64,
}

impl Sym2 {
    pub const IDENTITY: Sym2 = Sym2 {
        m11: 1.0,
        m12: 0.0,
        m22: 1.0,
    };

    pub const fn new(m11: f64, m12: f64, m22: f64) -> Self {
        Self { m11, m12, m22 }
    }

    pub fn trace(&self) -> f64 {
        self.m11 + self.m22
    }

    pub fn det(&self) -> f64 {
        self.m11 * self.m22 - self.m12 * self.m12
    }

    pub fn is_finite(&self) -> bool {
        self.m11.is_finite() && self.m12.is_finite() && self.m22.is_finite()
    }

    /// `I + S²`, the induced metric of the gradient graph.
    pub fn graph_metric(&self) -> Sym2 {
        let Sym2 { m11, m12, m22 } = *self;
        Sym2 {
            m11: 1.0 + m11 * m11 + m12 * m12,
            m12: m12 * (m11 + m22),
            m22: 1.0 + m12 * m12 + m22 * m22,
        }
    }

    pub fn inverse(&self) -> Sym2 {
        let det = self.det();
        Sym2 {
            m11: self.m22 / det,
            m12: -self.m12 / det,
            m22: self.m11 / det,
        }
    }

    pub fn apply(&self, v: [f64; 2]) -> [f64; 2] {
        [
            self.m11 * v[0] + self.m12 * v[1],
            self.m12 * v[0] + self.m22 * v[1],
        ]
    }

    pub fn quadratic_form(&self, v: [f64; 2]) -> f64 {
        self.m11 * v[0] * v[0] + 2.0 * self.m12 * v[0] * v[1] + self.m22 * v[1] * v[1]
    }

    /// Largest absolute eigenvalue.
    pub fn spectral_norm(&self) -> f64 {
        let (l1, l2) = eigenvalues(*self);
        l1.abs().max(l2.abs())
    }
}

/// Ordered eigenvalues `λ₁ ≥ λ₂` of a symmetric 2×2 matrix.
///
/// Uses `tr/2 ± √(((m11-m22)/2)² + m12²)`, algebraically equal to
/// `(tr ± √(tr² - 4 det))/2` but with a discriminant that cannot go negative
/// through cancellation.
pub fn eigen_sym2(s: Sym2) -> Result<(f64, f64)> {
    if !s.is_finite() {
        return Err(LabError::NonFiniteMatrix);
    }
    Ok(eigenvalues(s))
}

#[inline]
pub(crate) fn eigenvalues(s: Sym2) -> (f64, f64) {
    let mean = 0.5 * (s.m11 + s.m22);
    let radius = (0.5 * (s.m11 - s.m22)).hypot(s.m12);
    (mean + radius, mean - radius)
}

/// `arctan λ₁ + arctan λ₂`.
#[inline]
pub fn phase_of_eigenvalues(l1: f64, l2: f64) -> f64 {
    l1.atan() + l2.atan()
}

/// Phase of a Hessian without an eigen-decomposition: the argument of
/// `1 - det S + i tr S`. Smooth in the entries, including at coalescence.
#[inline]
pub fn phase_of_hessian(s: Sym2) -> f64 {
    s.trace().atan2(1.0 - s.det())
}

/// Constants of the slope-function checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlopeConstants {
    /// Supercritical margin: the checks require `ψ ≥ δ`.
    pub delta: f64,
    /// Weight `A` of the quadratic added to the slope.
    pub weight: f64,
    /// Coefficient `c` of `|∇_g b|²` in the Jacobi inequality.
    pub jacobi_c: f64,
    /// Budget for the fitted additive Jacobi constant.
    pub jacobi_budget: f64,
    /// Relative eigengap below which nodes are excluded from pointwise
    /// Jacobi checks: `λ₁ - λ₂ < eps_gap (1 + |λ₁|)`.
    pub eps_gap: f64,
}

impl Default for SlopeConstants {
    fn default() -> Self {
        Self {
            delta: 0.3,
            weight: 0.0,
            jacobi_c: 0.5,
            jacobi_budget: 10.0,
            eps_gap: 1e-6,
        }
    }
}

impl SlopeConstants {
    pub fn validate(&self) -> Result<()> {
        let ok = self.delta > 0.0
            && self.weight >= 0.0
            && self.jacobi_c > 0.0
            && self.jacobi_c <= 1.0
            && self.eps_gap > 0.0
            && self.jacobi_budget >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(LabError::Precondition(format!(
                "invalid slope constants {self:?}"
            )))
        }
    }

    pub fn with_weight(self, weight: f64) -> Self {
        Self { weight, ..self }
    }
}

/// Everything the checks need at every node of one potential.
#[derive(Debug, Clone)]
pub struct GeometryBundle {
    pub gradient: Vec2Field,
    pub hessian: SymMat2Field,
    pub lambda1: ScalarField2,
    pub lambda2: ScalarField2,
    pub psi: ScalarField2,
    pub sigma1: ScalarField2,
    pub sigma2: ScalarField2,
    pub volume: ScalarField2,
    pub metric: SymMat2Field,
    pub metric_inv: SymMat2Field,
    pub sqrt_det_g: ScalarField2,
    pub slope: ScalarField2,
}

impl GeometryBundle {
    /// Bundle from finite-difference derivatives of `u`.
    pub fn from_potential(u: &ScalarField2) -> Result<Self> {
        Self::from_derivatives(gradient_fd(u), hessian_fd(u))
    }

    /// Bundle from given derivative fields (e.g. analytic ones).
    pub fn from_derivatives(gradient: Vec2Field, hessian: SymMat2Field) -> Result<Self> {
        if gradient.grid() != hessian.grid() {
            return Err(LabError::GridMismatch);
        }
        let grid = *hessian.grid();
        let len = grid.len();
        let mut cols: [Vec<f64>; 8] = Default::default();
        for c in cols.iter_mut() {
            c.reserve(len);
        }
        let mut metric = Vec::with_capacity(len);
        let mut metric_inv = Vec::with_capacity(len);
        for k in 0..len {
            let s = hessian.at_index(k);
            let (l1, l2) = eigenvalues(s);
            let g = s.graph_metric();
            let det = g.det();
            cols[0].push(l1);
            cols[1].push(l2);
            cols[2].push(phase_of_eigenvalues(l1, l2));
            cols[3].push(l1 + l2);
            cols[4].push(l1 * l2);
            cols[5].push(((1.0 + l1 * l1) * (1.0 + l2 * l2)).sqrt());
            cols[6].push(det.sqrt());
            cols[7].push(0.5 * (l1 * l1).ln_1p());
            metric.push(g);
            metric_inv.push(g.inverse());
        }
        let [l1, l2, psi, s1, s2, vol, sqdet, slope] = cols;
        let field = |v| ScalarField2::from_values(grid, v);
        Ok(Self {
            lambda1: field(l1)?,
            lambda2: field(l2)?,
            psi: field(psi)?,
            sigma1: field(s1)?,
            sigma2: field(s2)?,
            volume: field(vol)?,
            sqrt_det_g: field(sqdet)?,
            slope: field(slope)?,
            metric: SymMat2Field::from_fn(grid, |k| metric[k])?,
            metric_inv: SymMat2Field::from_fn(grid, |k| metric_inv[k])?,
            gradient,
            hessian,
        })
    }

    /// Replaces the phase computed from the Hessian by a prescribed one,
    /// e.g. the analytic phase of a manufactured problem.
    pub fn with_phase(mut self, psi: ScalarField2) -> Result<Self> {
        self.psi.same_grid(&psi)?;
        self.psi = psi;
        Ok(self)
    }

    pub fn grid(&self) -> &Grid2 {
        self.psi.grid()
    }

    /// Largest `|ψ - (arctan λ₁ + arctan λ₂)|` over the nodes, i.e. how far the
    /// stored phase is from the phase of the stored Hessian.
    pub fn phase_defect(&self) -> f64 {
        (0..self.grid().len())
            .map(|k| {
                (self.psi.values()[k]
                    - phase_of_eigenvalues(self.lambda1.values()[k], self.lambda2.values()[k]))
                .abs()
            })
            .fold(0.0, f64::max)
    }

    /// Whether the node's eigenvalues are too close for the pointwise Jacobi
    /// inequality, whose derivation needs `λ₁ > λ₂`.
    pub fn near_coalescence(&self, k: usize, eps_gap: f64) -> bool {
        let l1 = self.lambda1.values()[k];
        l1 - self.lambda2.values()[k] < eps_gap * (1.0 + l1.abs())
    }

    /// Bundle of `-u`: derivatives and phase change sign, eigenvalues swap.
    pub fn negated(&self) -> Result<Self> {
        let neg = |f: &ScalarField2| f.map(|v| -v);
        let gradient = Vec2Field::new(neg(&self.gradient.x1)?, neg(&self.gradient.x2)?)?;
        let hessian = SymMat2Field::new(
            neg(&self.hessian.m11)?,
            neg(&self.hessian.m12)?,
            neg(&self.hessian.m22)?,
        )?;
        Self::from_derivatives(gradient, hessian)?.with_phase(neg(&self.psi)?)
    }
}

/// Geometry bundle of `u` from finite differences.
pub fn bundle(u: &ScalarField2) -> Result<GeometryBundle> {
    GeometryBundle::from_potential(u)
}

/// Slope function `b = ln √(1 + λ₁²)` with `λ₁` the larger eigenvalue.
pub fn slope(b: &GeometryBundle) -> ScalarField2 {
    b.slope.clone()
}

/// `b̃ = b + (A/2)|x|²`.
pub fn modified_slope(b: &GeometryBundle, k: &SlopeConstants) -> ScalarField2 {
    let grid = *b.grid();
    let values = b
        .slope
        .values()
        .iter()
        .enumerate()
        .map(|(idx, &s)| {
            let (x, y) = grid.point_of(idx);
            s + 0.5 * k.weight * (x * x + y * y)
        })
        .collect();
    ScalarField2::from_trusted(grid, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, sample};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, LN_2};

    fn assert_const(f: &ScalarField2, value: f64, tol: f64) {
        for &v in f.values() {
            assert!((v - value).abs() <= tol, "{v} != {value}");
        }
    }

    #[test]
    fn eigen_examples() {
        assert_eq!(eigen_sym2(Sym2::IDENTITY).unwrap(), (1.0, 1.0));
        assert_eq!(eigen_sym2(Sym2::new(0.0, 1.0, 0.0)).unwrap(), (1.0, -1.0));
        let (a, b) = eigen_sym2(Sym2::new(2.0, 1.0, 2.0)).unwrap();
        assert_relative_eq!(a, 3.0);
        assert_relative_eq!(b, 1.0);
        assert!(matches!(
            eigen_sym2(Sym2::new(f64::NAN, 0.0, 1.0)),
            Err(LabError::NonFiniteMatrix)
        ));
    }

    #[test]
    fn bundle_of_half_square_norm() {
        let g = build_grid(2.0, 9).unwrap();
        let u = sample(|x, y| 0.5 * (x * x + y * y), &g).unwrap();
        let b = bundle(&u).unwrap();
        let tol = 1e-12;
        assert_const(&b.lambda1, 1.0, tol);
        assert_const(&b.lambda2, 1.0, tol);
        assert_const(&b.psi, FRAC_PI_2, tol);
        assert_const(&b.sigma1, 2.0, tol);
        assert_const(&b.sigma2, 1.0, tol);
        assert_const(&b.volume, 2.0, tol);
        assert_const(&b.slope, 0.5 * LN_2, tol);
        assert_relative_eq!(0.5 * LN_2, 0.34657, epsilon = 1e-5);
    }

    #[test]
    fn bundle_of_saddle() {
        let g = build_grid(2.0, 9).unwrap();
        let u = sample(|x, y| x * y, &g).unwrap();
        let b = bundle(&u).unwrap();
        assert_const(&b.psi, 0.0, 1e-12);
        assert_const(&b.sigma1, 0.0, 1e-12);
        assert_const(&b.sigma2, -1.0, 1e-12);
        assert_const(&b.volume, 2.0, 1e-12);
    }

    #[test]
    fn bundle_of_square_norm() {
        let g = build_grid(2.0, 9).unwrap();
        let u = sample(|x, y| x * x + y * y, &g).unwrap();
        let b = bundle(&u).unwrap();
        // λ = 2 twice: ψ = 2 arctan 2, V = 1 + 4, sin ψ = 2·2/(1+4)
        let psi = 2.0 * 2f64.atan();
        assert_relative_eq!(psi, 2.21430, epsilon = 1e-5);
        assert_const(&b.psi, psi, 1e-12);
        assert_const(&b.volume, 5.0, 1e-11);
        assert_relative_eq!(psi.sin(), 0.8, epsilon = 1e-15);
    }

    #[test]
    fn slope_examples() {
        let g = build_grid(2.0, 9).unwrap();
        let s3 = 3f64.sqrt();
        let u = sample(|x, y| 0.5 * (s3 * x * x + y * y / s3), &g).unwrap();
        let b = bundle(&u).unwrap();
        assert_const(&slope(&b), LN_2, 1e-12);

        let u = sample(|x, y| 0.5 * (x * x + y * y), &g).unwrap();
        let b = bundle(&u).unwrap();
        let k = SlopeConstants::default();
        assert_eq!(modified_slope(&b, &k), b.slope);
        let bt = modified_slope(&b, &k.with_weight(1.0));
        let o = g.origin().unwrap();
        assert_relative_eq!(bt.values()[o], 0.5 * LN_2, epsilon = 1e-12);
        assert_relative_eq!(bt.at(8, 4), 0.5 * LN_2 + 2.0, epsilon = 1e-12);
    }

    #[test]
    fn prescribed_phase_and_defect() {
        let g = build_grid(2.0, 9).unwrap();
        let u = sample(|x, y| 0.5 * (x * x + y * y), &g).unwrap();
        let b = bundle(&u).unwrap();
        assert!(b.phase_defect() < 1e-12);
        let shifted = ScalarField2::constant(g, FRAC_PI_2 + 0.01).unwrap();
        let b = b.with_phase(shifted).unwrap();
        assert_relative_eq!(b.phase_defect(), 0.01, epsilon = 1e-10);
    }

    proptest! {
        #[test]
        fn eigenvalue_invariants(m11 in -50.0..50.0f64, m12 in -50.0..50.0f64, m22 in -50.0..50.0f64) {
            let s = Sym2::new(m11, m12, m22);
            let (l1, l2) = eigen_sym2(s).unwrap();
            let scale = 1.0 + m11.abs() + m12.abs() + m22.abs();
            prop_assert!(l1 >= l2);
            prop_assert!((l1 + l2 - s.trace()).abs() <= 1e-12 * scale);
            prop_assert!((l1 * l2 - s.det()).abs() <= 1e-11 * scale * scale);
        }

        #[test]
        fn metric_determinant_is_volume_squared(m11 in -20.0..20.0f64, m12 in -20.0..20.0f64, m22 in -20.0..20.0f64) {
            let s = Sym2::new(m11, m12, m22);
            let (l1, l2) = eigenvalues(s);
            let v2 = (1.0 + l1 * l1) * (1.0 + l2 * l2);
            prop_assert!((s.graph_metric().det() - v2).abs() <= 1e-10 * v2);
            prop_assert!((phase_of_hessian(s) - phase_of_eigenvalues(l1, l2)).abs() <= 1e-12);
        }

        #[test]
        fn slope_dominated_by_volume(m11 in -1e3..1e3f64, m12 in -1e3..1e3f64, m22 in -1e3..1e3f64) {
            let (l1, l2) = eigenvalues(Sym2::new(m11, m12, m22));
            let b = 0.5 * (l1 * l1).ln_1p();
            let v = ((1.0 + l1 * l1) * (1.0 + l2 * l2)).sqrt();
            prop_assert!(b >= 0.0);
            prop_assert!(b <= v);
        }

        #[test]
        fn sign_facts_from_factorization(m11 in -30.0..30.0f64, m12 in -30.0..30.0f64, m22 in -30.0..30.0f64) {
            let (l1, l2) = eigenvalues(Sym2::new(m11, m12, m22));
            let psi = phase_of_eigenvalues(l1, l2);
            prop_assert!(psi.abs() < std::f64::consts::PI);
            if psi > 1e-9 && psi < std::f64::consts::PI {
                prop_assert!(l1 + l2 > 0.0);
            }
            if psi > FRAC_PI_2 + 1e-9 {
                prop_assert!(l1 * l2 > 1.0);
            }
        }
    }
}
