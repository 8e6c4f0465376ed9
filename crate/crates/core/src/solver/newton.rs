//! Damped Newton iteration for `arctan λ₁ + arctan λ₂ = ψ` with Dirichlet data
//! on the square.
//!
//! The interior residual is `F(u) = atan2(σ₁, 1 - σ₂) - ψ` on the central
//! difference Hessian. Since `dψ = tr(g⁻¹ dS)`, the Jacobian is the stencil
//! `g¹¹D₁₁ + 2g¹²D₁₂ + g²²D₂₂` with `g = I + S²` at the current iterate.

use serde::Serialize;

use crate::error::{LabError, Result};
use crate::geometry::{eigenvalues, phase_of_eigenvalues, phase_of_hessian, Sym2};
use crate::grid::{hessian_fd, Grid2, ScalarField2};

use super::linear::{linear_solve, CsrMatrix, LinearSolveConfig};
use super::BoundaryTrace;

#[derive(Debug, Clone, Serialize)]
pub struct NewtonConfig {
    /// Target for the residual sup-norm.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Sufficient-decrease constant in `‖F(u + tδ)‖ ≤ (1 - α t)‖F(u)‖`.
    pub armijo: f64,
    pub min_step: f64,
    pub linear: LinearSolveConfig,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_iterations: 40,
            armijo: 1e-4,
            min_step: 1.0 / 1024.0,
            linear: LinearSolveConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveState {
    #[serde(skip)]
    pub iterate: ScalarField2,
    /// Residual sup-norm of the initial iterate and after each step.
    pub residual_history: Vec<f64>,
    /// Step length accepted at each iteration.
    pub damping: Vec<f64>,
    pub linear_iterations: Vec<usize>,
    pub linear_tolerance: f64,
    pub converged: bool,
}

impl SolveState {
    pub fn iterations(&self) -> usize {
        self.damping.len()
    }

    pub fn final_residual(&self) -> f64 {
        *self.residual_history.last().unwrap_or(&f64::INFINITY)
    }

    /// Ratio of the last two residuals, if at least one step was taken.
    pub fn final_ratio(&self) -> Option<f64> {
        let h = &self.residual_history;
        (h.len() >= 2).then(|| h[h.len() - 1] / h[h.len() - 2])
    }
}

/// Central-difference Hessian at interior node `(i, j)` of a full vector.
#[inline]
fn stencil_hessian(u: &[f64], n: usize, i: usize, j: usize, inv_h2: f64) -> Sym2 {
    let at = |a: usize, b: usize| u[b * n + a];
    let c = at(i, j);
    Sym2::new(
        (at(i + 1, j) - 2.0 * c + at(i - 1, j)) * inv_h2,
        (at(i + 1, j + 1) - at(i + 1, j - 1) - at(i - 1, j + 1) + at(i - 1, j - 1)) * 0.25 * inv_h2,
        (at(i, j + 1) - 2.0 * c + at(i, j - 1)) * inv_h2,
    )
}

fn interior_residual(u: &[f64], psi: &[f64], grid: &Grid2) -> Vec<f64> {
    let n = grid.nodes_per_axis();
    let inv_h2 = 1.0 / (grid.spacing() * grid.spacing());
    let mut r = Vec::with_capacity((n - 2) * (n - 2));
    for j in 1..n - 1 {
        for i in 1..n - 1 {
            let s = stencil_hessian(u, n, i, j, inv_h2);
            r.push(phase_of_hessian(s) - psi[j * n + i]);
        }
    }
    r
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| if x.is_nan() { f64::INFINITY } else { m.max(x.abs()) })
}

/// Linearization at `u` on the interior unknowns, indexed `(j-1)(n-2) + (i-1)`.
fn jacobian(u: &[f64], grid: &Grid2) -> Result<CsrMatrix> {
    let n = grid.nodes_per_axis();
    let m = n - 2;
    let inv_h2 = 1.0 / (grid.spacing() * grid.spacing());
    let mut rows = Vec::with_capacity(m * m);
    for j in 1..n - 1 {
        for i in 1..n - 1 {
            let gi = stencil_hessian(u, n, i, j, inv_h2).graph_metric().inverse();
            if !(gi.m11 > 0.0 && gi.det() > 0.0) {
                return Err(LabError::LostEllipticity { i, j });
            }
            let (a, b, c) = (gi.m11 * inv_h2, gi.m12 * inv_h2, gi.m22 * inv_h2);
            let mut row = Vec::with_capacity(9);
            let mut push = |di: isize, dj: isize, w: f64| {
                let (p, q) = (i as isize + di, j as isize + dj);
                if p >= 1 && q >= 1 && p <= m as isize && q <= m as isize {
                    row.push(((q as usize - 1) * m + (p as usize - 1), w));
                }
            };
            push(0, 0, -2.0 * (a + c));
            push(-1, 0, a);
            push(1, 0, a);
            push(0, -1, c);
            push(0, 1, c);
            push(1, 1, 0.5 * b);
            push(-1, -1, 0.5 * b);
            push(1, -1, -0.5 * b);
            push(-1, 1, -0.5 * b);
            rows.push(row);
        }
    }
    CsrMatrix::from_rows(rows)
}

/// Discrete harmonic-type extension: solves `Δ_h u = 2 tan(ψ̄/2)` with the
/// boundary data, where `ψ̄` is the mean phase. For `u = a|x|²/2` this is the
/// exact solution.
pub fn initial_iterate(psi: &ScalarField2, boundary: &BoundaryTrace, linear: &LinearSolveConfig) -> Result<ScalarField2> {
    let grid = *psi.grid();
    let n = grid.nodes_per_axis();
    let m = n - 2;
    let mean = psi.values().iter().sum::<f64>() / grid.len() as f64;
    let source = 2.0 * (0.5 * mean).tan();
    let inv_h2 = 1.0 / (grid.spacing() * grid.spacing());
    let mut full = vec![0.0; grid.len()];
    boundary.impose(&mut full);
    let mut rows = Vec::with_capacity(m * m);
    let mut rhs = Vec::with_capacity(m * m);
    for j in 1..n - 1 {
        for i in 1..n - 1 {
            let mut row = vec![((j - 1) * m + (i - 1), -4.0 * inv_h2)];
            let mut r = source;
            for (p, q) in [(i - 1, j), (i + 1, j), (i, j - 1), (i, j + 1)] {
                if p == 0 || q == 0 || p == n - 1 || q == n - 1 {
                    r -= full[q * n + p] * inv_h2;
                } else {
                    row.push(((q - 1) * m + (p - 1), inv_h2));
                }
            }
            rows.push(row);
            rhs.push(r);
        }
    }
    let a = CsrMatrix::from_rows(rows)?;
    let sol = linear_solve(&a, &rhs, linear)?;
    for j in 1..n - 1 {
        for i in 1..n - 1 {
            full[j * n + i] = sol.solution[(j - 1) * m + (i - 1)];
        }
    }
    ScalarField2::from_values(grid, full)
}

fn validate(psi: &ScalarField2, boundary: &BoundaryTrace) -> Result<()> {
    if boundary.grid() != psi.grid() {
        return Err(LabError::GridMismatch);
    }
    if psi.min() <= 0.0 || psi.max() >= std::f64::consts::PI {
        return Err(LabError::PhaseOutOfRange(format!(
            "solver needs 0 < ψ < π, got [{}, {}]",
            psi.min(),
            psi.max()
        )));
    }
    Ok(())
}

/// Solves from the default initial iterate.
pub fn newton_solve(psi: &ScalarField2, boundary: &BoundaryTrace, config: &NewtonConfig) -> Result<SolveState> {
    validate(psi, boundary)?;
    let u0 = initial_iterate(psi, boundary, &config.linear)?;
    newton_solve_from(psi, boundary, u0, config)
}

/// Solves from a given initial iterate; its boundary ring is overwritten by
/// the data. Non-convergence returns the state with `converged == false`.
pub fn newton_solve_from(
    psi: &ScalarField2,
    boundary: &BoundaryTrace,
    initial: ScalarField2,
    config: &NewtonConfig,
) -> Result<SolveState> {
    let grid = *psi.grid();
    psi.same_grid(&initial)?;
    validate(psi, boundary)?;
    let n = grid.nodes_per_axis();
    let m = n - 2;
    let mut u = initial.into_values();
    boundary.impose(&mut u);
    let mut r = interior_residual(&u, psi.values(), &grid);
    let mut norm = sup(&r);
    let mut state = SolveState {
        iterate: ScalarField2::from_trusted(grid, vec![0.0; grid.len()]),
        residual_history: vec![norm],
        damping: Vec::new(),
        linear_iterations: Vec::new(),
        linear_tolerance: config.linear.tolerance,
        converged: norm <= config.tolerance,
    };
    while !state.converged && state.iterations() < config.max_iterations {
        let a = jacobian(&u, &grid)?;
        let rhs: Vec<f64> = r.iter().map(|v| -v).collect();
        let step = linear_solve(&a, &rhs, &config.linear)?;
        let mut t = 1.0;
        let accepted = loop {
            let mut trial = u.clone();
            for j in 1..n - 1 {
                for i in 1..n - 1 {
                    trial[j * n + i] += t * step.solution[(j - 1) * m + (i - 1)];
                }
            }
            let tr = interior_residual(&trial, psi.values(), &grid);
            let tn = sup(&tr);
            if tn <= (1.0 - config.armijo * t) * norm {
                break Some((trial, tr, tn));
            }
            t *= 0.5;
            if t < config.min_step {
                break None;
            }
        };
        let Some((trial, tr, tn)) = accepted else {
            break;
        };
        u = trial;
        r = tr;
        norm = tn;
        state.residual_history.push(norm);
        state.damping.push(t);
        state.linear_iterations.push(step.iterations);
        state.converged = norm <= config.tolerance;
    }
    state.iterate = ScalarField2::from_values(grid, u)?;
    Ok(state)
}

/// Recomputes the interior residual sup-norm from scratch through the
/// difference Hessian and explicit eigenvalues.
pub fn certify_residual(u: &ScalarField2, psi: &ScalarField2) -> Result<f64> {
    u.same_grid(psi)?;
    let grid = *u.grid();
    let hess = hessian_fd(u);
    let mut worst = 0.0f64;
    for k in 0..grid.len() {
        let (i, j) = grid.node(k);
        if grid.is_interior(i, j, 1) {
            let (l1, l2) = eigenvalues(hess.at_index(k));
            worst = worst.max((l1.atan() + l2.atan() - psi.values()[k]).abs());
            debug_assert!((phase_of_eigenvalues(l1, l2) - (l1.atan() + l2.atan())).abs() < 1e-12);
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, sample};
    use crate::solver::{manufacture, Family};
    use std::f64::consts::FRAC_PI_2;

    fn max_diff(a: &ScalarField2, b: &ScalarField2) -> f64 {
        a.values()
            .iter()
            .zip(b.values())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn jacobian_matches_difference_quotient() {
        let g = build_grid(1.0, 9).unwrap();
        let u = sample(|x, y| 0.5 * (x * x + y * y) + 0.2 * x.sin() * (2.0 * y).cos(), &g).unwrap();
        let psi = ScalarField2::constant(g, 1.0).unwrap();
        let a = jacobian(u.values(), &g).unwrap();
        let n = 9;
        let m = 7;
        let dir: Vec<f64> = (0..m * m).map(|k| ((k * 37) % 11) as f64 / 11.0 - 0.5).collect();
        let jv = a.mul(&dir);
        let e = 1e-6;
        let bump = |s: f64| {
            let mut v = u.values().to_vec();
            for j in 1..n - 1 {
                for i in 1..n - 1 {
                    v[j * n + i] += s * dir[(j - 1) * m + (i - 1)];
                }
            }
            interior_residual(&v, psi.values(), &g)
        };
        let (rp, rm) = (bump(e), bump(-e));
        for k in 0..m * m {
            let fd = (rp[k] - rm[k]) / (2.0 * e);
            assert!((fd - jv[k]).abs() < 1e-6 * (1.0 + fd.abs()), "{k}: {fd} vs {}", jv[k]);
        }
    }

    #[test]
    fn quadratic_recovered_quickly() {
        for (a, n) in [(1.0, 33), (2.0, 65)] {
            let g = build_grid(2.0, n).unwrap();
            let p = manufacture(Family::Quadratic { a }.into_potential(), &g, 0.3).unwrap();
            // start from a harmonic-looking guess to force genuine Newton steps
            let guess = sample(|x, y| 0.5 * a * (x * x + y * y) + 0.3 * (x * x - y * y), &g).unwrap();
            let s = newton_solve_from(&p.psi, &p.boundary, guess, &NewtonConfig::default()).unwrap();
            assert!(s.converged);
            assert!(max_diff(&s.iterate, &p.u_exact) < 1e-10, "{}", max_diff(&s.iterate, &p.u_exact));
            let s = newton_solve(&p.psi, &p.boundary, &NewtonConfig::default()).unwrap();
            assert!(s.converged && s.iterations() <= 3);
            assert!(max_diff(&s.iterate, &p.u_exact) < 1e-10);
        }
    }

    #[test]
    fn affine_gauge() {
        let g = build_grid(2.0, 33).unwrap();
        let p = manufacture(Family::Perturbed { eps: 0.1 }.into_potential(), &g, 0.3).unwrap();
        let cfg = NewtonConfig::default();
        let s0 = newton_solve(&p.psi, &p.boundary, &cfg).unwrap();
        let shifted = p.boundary.shifted([0.7, -1.3], 2.0);
        let s1 = newton_solve(&p.psi, &shifted, &cfg).unwrap();
        assert!(s0.converged && s1.converged);
        let affine = sample(|x, y| 0.7 * x - 1.3 * y + 2.0, &g).unwrap();
        let expect = s0.iterate.zip_map(&affine, |a, b| a + b).unwrap();
        assert!(max_diff(&s1.iterate, &expect) < 1e-9);
    }

    #[test]
    fn perturbed_converges_and_certifies() {
        let g = build_grid(2.0, 65).unwrap();
        let p = manufacture(Family::Perturbed { eps: 0.1 }.into_potential(), &g, 0.3).unwrap();
        let s = newton_solve(&p.psi, &p.boundary, &NewtonConfig::default()).unwrap();
        assert!(s.converged);
        for w in s.residual_history.windows(2) {
            assert!(w[1] < w[0]);
        }
        assert!(s.final_ratio().unwrap() <= 1e-3);
        let cert = certify_residual(&s.iterate, &p.psi).unwrap();
        assert!(cert <= 1e-10, "{cert}");
        let err = max_diff(&s.iterate, &p.u_exact);
        assert!(err < 10.0 * g.spacing().powi(2), "{err}");
        // first Newton system meets the linear tolerance
        let u0 = initial_iterate(&p.psi, &p.boundary, &LinearSolveConfig::default()).unwrap();
        let a = jacobian(u0.values(), &g).unwrap();
        let rhs: Vec<f64> = interior_residual(u0.values(), p.psi.values(), &g).iter().map(|v| -v).collect();
        for method in [super::super::linear::LinearMethod::BandedLu, super::super::linear::LinearMethod::BiCgStab] {
            let cfg = LinearSolveConfig { method, ..Default::default() };
            let out = linear_solve(&a, &rhs, &cfg).unwrap();
            let ax = a.mul(&out.solution);
            let res: f64 = ax.iter().zip(&rhs).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
            let nb: f64 = rhs.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!(res <= 1e-12 * nb);
        }
    }

    #[test]
    fn rejects_out_of_range_phase() {
        let g = build_grid(1.0, 9).unwrap();
        let p = manufacture(Family::Saddle.into_potential(), &g, 0.3).unwrap();
        assert!(matches!(
            newton_solve(&p.psi, &p.boundary, &NewtonConfig::default()),
            Err(LabError::PhaseOutOfRange(_))
        ));
        let psi = ScalarField2::constant(g, FRAC_PI_2).unwrap();
        let other = build_grid(1.0, 11).unwrap();
        let t = BoundaryTrace::from_fn(&other, |_, _| 0.0).unwrap();
        assert!(matches!(
            newton_solve(&psi, &t, &NewtonConfig::default()),
            Err(LabError::GridMismatch)
        ));
    }

    #[test]
    fn unreachable_tolerance_reports_unconverged() {
        let g = build_grid(2.0, 17).unwrap();
        let p = manufacture(Family::Perturbed { eps: 0.1 }.into_potential(), &g, 0.3).unwrap();
        let cfg = NewtonConfig { max_iterations: 1, ..Default::default() };
        let s = newton_solve(&p.psi, &p.boundary, &cfg).unwrap();
        assert!(!s.converged);
        assert_eq!(s.iterations(), 1);
    }
}
