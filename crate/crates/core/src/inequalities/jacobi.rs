//! Jacobi inequality for the slope `b = ln √(1+λ₁²)`, subharmonicity of
//! `b̃ = b + (A/2)|x|²`, and the integral form of the Jacobi inequality.

use serde::Serialize;

use super::{canonical, check_weak_max_principle_in, quadrature_slack, InequalityReport};
use crate::error::{LabError, Result};
use crate::geometry::{grad_g_norm2, laplace_beltrami, modified_slope, GeometryBundle, SlopeConstants};
use crate::grid::{gradient_fd, integrate_disk, sample, CutoffProfile, ScalarField2};

/// Allowed negative part of `min Δ_g b̃`.
pub const SUBHARMONIC_SLACK: f64 = 1e-4;

/// `C` in the `C h` budget of the discrete integration by parts.
const IBP_C: f64 = 10.0;

/// Nodes dropped from pointwise Jacobi checks: eigenvalues within the gap
/// tolerance while some 3×3 neighbour has separated eigenvalues. Where the
/// eigenvalues agree on a whole neighbourhood (`D²u` a multiple of the
/// identity there) the slope is still smooth and the node is kept.
pub fn jacobi_excluded(b: &GeometryBundle, eps_gap: f64) -> Vec<bool> {
    let grid = *b.grid();
    let n = grid.nodes_per_axis();
    let near: Vec<bool> = (0..grid.len()).map(|k| b.near_coalescence(k, eps_gap)).collect();
    (0..grid.len())
        .map(|k| {
            if !near[k] {
                return false;
            }
            let (i, j) = grid.node(k);
            let mut all = true;
            for q in j.saturating_sub(1)..=(j + 1).min(n - 1) {
                for p in i.saturating_sub(1)..=(i + 1).min(n - 1) {
                    all &= near[grid.index(p, q)];
                }
            }
            !all
        })
        .collect()
}

/// Pointwise `Δ_g b ≥ c|∇_g b|² - C` on nodes at least two away from the
/// edge. Fits `Ĉ = max(0, -min(Δ_g b - c|∇_g b|²))` and passes when
/// `Ĉ ≤` the configured budget.
pub fn check_jacobi_pointwise(b: &GeometryBundle, k: &SlopeConstants) -> Result<InequalityReport> {
    k.validate()?;
    let grid = *b.grid();
    let lb = laplace_beltrami(&b.slope, b)?;
    let gn = grad_g_norm2(&b.slope, b)?;
    let excluded = jacobi_excluded(b, k.eps_gap);
    let mut min = f64::INFINITY;
    let mut argmin = None;
    let mut dropped = 0usize;
    for idx in 0..grid.len() {
        let (i, j) = grid.node(idx);
        if !grid.is_interior(i, j, 2) {
            continue;
        }
        if excluded[idx] {
            dropped += 1;
            continue;
        }
        let v = lb.values()[idx] - k.jacobi_c * gn.values()[idx];
        if v < min {
            min = v;
            argmin = Some(idx);
        }
    }
    let Some(at) = argmin else {
        return Err(LabError::AllNodesExcluded { excluded: dropped });
    };
    let c_hat = (-min).max(0.0);
    let (x, y) = grid.point_of(at);
    let mut r = InequalityReport::new("jacobi_pointwise", c_hat, k.jacobi_budget, 0.0)
        .with_fitted("C_hat", c_hat)
        .with_fitted("min_value", min)
        .with_fitted("c", k.jacobi_c)
        .with_note(format!("minimum at ({x:.4}, {y:.4})"));
    r.excluded_nodes = dropped;
    Ok(r)
}

#[derive(Debug, Clone, Serialize)]
pub struct WeightFit {
    /// Smallest `A ≥ 0` with `Δ_g b + A Δ_g(|x|²/2) ≥ 0` on the region.
    pub a_hat: f64,
    pub min_laplacian_b: f64,
    /// Minimum of `Δ_g(|x|²/2)` over the region.
    pub min_quadratic_laplacian: f64,
    pub nodes: usize,
}

fn region(b: &GeometryBundle, radius: f64) -> Result<Vec<usize>> {
    let grid = *b.grid();
    grid.check_radius(radius)?;
    Ok(grid
        .disk_indices(radius)
        .filter(|&k| {
            let (i, j) = grid.node(k);
            grid.is_interior(i, j, 2)
        })
        .collect())
}

fn half_square(b: &GeometryBundle) -> Result<ScalarField2> {
    sample(|x, y| 0.5 * (x * x + y * y), b.grid())
}

/// Fits the quadratic weight on `B_ρ`. The discrete operator is linear, so
/// `Δ_g b̃ = Δ_g b + A q` with `q = Δ_g(|x|²/2)` holds exactly and
/// `Â = max(0, max_{Δ_g b < 0} (-Δ_g b / q))`.
pub fn fit_modified_slope_weight(b: &GeometryBundle, radius: f64) -> Result<WeightFit> {
    let nodes = region(b, radius)?;
    let lb = laplace_beltrami(&b.slope, b)?;
    let q = laplace_beltrami(&half_square(b)?, b)?;
    let mut a_hat = 0.0f64;
    let mut min_lb = f64::INFINITY;
    let mut min_q = f64::INFINITY;
    for &k in &nodes {
        let (l, qk) = (lb.values()[k], q.values()[k]);
        min_lb = min_lb.min(l);
        min_q = min_q.min(qk);
        if l < 0.0 {
            if qk <= 0.0 {
                let (x, y) = b.grid().point_of(k);
                return Err(LabError::Precondition(format!(
                    "no quadratic weight helps at ({x:.4}, {y:.4}): Δ_g b = {l}, Δ_g(|x|²/2) = {qk}"
                )));
            }
            a_hat = a_hat.max(-l / qk);
        }
    }
    Ok(WeightFit {
        a_hat,
        min_laplacian_b: min_lb,
        min_quadratic_laplacian: min_q,
        nodes: nodes.len(),
    })
}

/// Subharmonicity of `b̃` on `B_ρ` for the weight in `k`, followed by the weak
/// maximum principle for `b̃` on the same disk. Requires `ψ ≥ δ` there
/// (after reflecting an everywhere-negative phase).
pub fn check_subharmonic_modified_slope(
    b: &GeometryBundle,
    k: &SlopeConstants,
    radius: f64,
    trials: usize,
    seed: u64,
) -> Result<InequalityReport> {
    k.validate()?;
    let b = canonical(b, k.delta)?;
    let nodes = region(&b, radius)?;
    let low = b
        .grid()
        .disk_indices(radius)
        .map(|i| b.psi.values()[i])
        .fold(f64::INFINITY, f64::min);
    if low < k.delta {
        return Err(LabError::PhaseOutOfRange(format!(
            "phase {low} below delta {} on the disk of radius {radius}",
            k.delta
        )));
    }
    let bt = modified_slope(&b, k);
    let lbt = laplace_beltrami(&bt, &b)?;
    let lb = laplace_beltrami(&b.slope, &b)?;
    let q = laplace_beltrami(&half_square(&b)?, &b)?;
    let mut min_bt = f64::INFINITY;
    let mut min_b = f64::INFINITY;
    let mut min_trace = f64::INFINITY;
    let mut min_first = f64::INFINITY;
    for &i in &nodes {
        let tr = b.metric_inv.at_index(i).trace();
        min_bt = min_bt.min(lbt.values()[i]);
        min_b = min_b.min(lb.values()[i]);
        min_trace = min_trace.min(k.weight * tr);
        min_first = min_first.min(k.weight * (q.values()[i] - tr));
    }
    let wmp = check_weak_max_principle_in(&bt, radius, trials, seed)?;
    let mut r = InequalityReport::new("subharmonic_modified_slope", 0.0, min_bt, SUBHARMONIC_SLACK)
        .with_fitted("A", k.weight)
        .with_fitted("min_laplacian_btilde", min_bt)
        .with_fitted("min_laplacian_b", min_b)
        .with_fitted("min_weight_trace_term", min_trace)
        .with_fitted("min_weight_first_order_term", min_first)
        .with_fitted("wmp_margin", wmp.margin)
        .with_fitted("wmp_slack", wmp.slack)
        .with_fitted("wmp_pass", if wmp.pass { 1.0 } else { 0.0 });
    if !wmp.pass {
        r.pass = false;
        r = r.with_note("modified slope fails the weak maximum principle");
    }
    Ok(r)
}

/// `∫_{B_{r₁}}|∇_g b|² dv_g ≤ (4/c²)∫|∇_g φ|² dv_g + (2/c) Ĉ ∫φ² dv_g` with
/// `dv_g = V dx` and `Ĉ` fitted by [`check_jacobi_pointwise`]. Also checks
/// the discrete integration by parts
/// `∫φ² Δ_g b dv_g = -∫ 2φ ⟨∇_g φ, ∇_g b⟩ dv_g` to `10 h`; both must hold.
pub fn check_jacobi_integral(
    b: &GeometryBundle,
    cutoff: &CutoffProfile,
    k: &SlopeConstants,
) -> Result<InequalityReport> {
    let grid = *b.grid();
    cutoff.field().same_grid(&b.psi)?;
    let h = grid.spacing();
    if cutoff.outer_radius() + 2.0 * h > grid.half_width() {
        return Err(LabError::BadCutoff {
            inner: cutoff.inner_radius(),
            outer: cutoff.outer_radius(),
            half_width: grid.half_width(),
        });
    }
    let pointwise = check_jacobi_pointwise(b, k)?;
    let c_hat = pointwise.lhs;
    let c = k.jacobi_c;
    let len = grid.len();
    let phi = cutoff.field().values();
    let dphi = cutoff.gradient();
    let db = gradient_fd(&b.slope);
    let v = b.volume.values();

    let gb = grad_g_norm2(&b.slope, b)?;
    let lhs_density = gb.zip_map(&b.volume, |a, w| a * w)?;
    let mut phi_grad = Vec::with_capacity(len);
    let mut phi_sq = Vec::with_capacity(len);
    for i in 0..len {
        let gi = b.metric_inv.at_index(i);
        phi_grad.push(gi.quadratic_form(dphi.at_index(i)) * v[i]);
        phi_sq.push(phi[i] * phi[i] * v[i]);
    }
    let phi_grad = ScalarField2::from_values(grid, phi_grad)?;
    let phi_sq = ScalarField2::from_values(grid, phi_sq)?;
    let (r1, r2) = (cutoff.inner_radius(), cutoff.outer_radius());
    let lhs = integrate_disk(&lhs_density, r1)?;
    let energy = integrate_disk(&phi_grad, r2)?;
    let mass = integrate_disk(&phi_sq, r2)?;
    let rhs = 4.0 / (c * c) * energy + 2.0 / c * c_hat * mass;
    let slack = quadrature_slack(&lhs_density, r1)
        + 4.0 / (c * c) * quadrature_slack(&phi_grad, r2)
        + 2.0 / c * c_hat * quadrature_slack(&phi_sq, r2);

    let lb = laplace_beltrami(&b.slope, b)?;
    let h2 = h * h;
    let mut left = 0.0;
    let mut right = 0.0;
    for i in 0..len {
        if phi[i] == 0.0 && dphi.at_index(i) == [0.0, 0.0] {
            continue;
        }
        left += phi[i] * phi[i] * lb.values()[i] * v[i];
        let gi = b.metric_inv.at_index(i);
        let cross = gi.apply(dphi.at_index(i));
        let dbi = db.at_index(i);
        right -= 2.0 * phi[i] * (cross[0] * dbi[0] + cross[1] * dbi[1]) * v[i];
    }
    left *= h2;
    right *= h2;
    let ibp_residual = (left - right).abs();
    let ibp_tol = IBP_C * h;

    let mut r = InequalityReport::new("jacobi_integral", lhs, rhs, slack)
        .with_fitted("C_hat", c_hat)
        .with_fitted("c", c)
        .with_fitted("cutoff_energy", energy)
        .with_fitted("cutoff_mass", mass)
        .with_fitted("ibp_lhs", left)
        .with_fitted("ibp_rhs", right)
        .with_fitted("ibp_residual", ibp_residual)
        .with_fitted("ibp_tolerance", ibp_tol);
    r.excluded_nodes = pointwise.excluded_nodes;
    if ibp_residual > ibp_tol {
        r.pass = false;
        r = r.with_note("discrete integration by parts exceeds its budget");
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::bundle;
    use crate::grid::{build_grid, make_cutoff, Grid2};
    use crate::solver::{manufacture, Family};

    fn fd_bundle(fam: Family, g: &Grid2) -> GeometryBundle {
        manufacture(fam.into_potential(), g, 0.3).unwrap().sampled_bundle().unwrap()
    }

    #[test]
    fn constant_hessian_has_no_defect() {
        let g = build_grid(4.0, 65).unwrap();
        let k = SlopeConstants::default();
        let s3 = 3f64.sqrt();
        for u in [
            sample(|x, y| 0.5 * (x * x + y * y), &g).unwrap(),
            sample(|x, y| 0.5 * (s3 * x * x + y * y / s3), &g).unwrap(),
        ] {
            let b = bundle(&u).unwrap();
            let r = check_jacobi_pointwise(&b, &k).unwrap();
            assert!(r.lhs <= 1e-6, "{r:?}");
            assert!(r.pass);
            assert_eq!(r.excluded_nodes, 0);
        }
    }

    #[test]
    fn isolated_coalescence_is_excluded() {
        // eigenvalues meet on the lines x = ±π/2 and y = ±π/2
        let g = build_grid(4.0, 65).unwrap();
        let b = fd_bundle(Family::Perturbed { eps: 0.1 }, &g);
        let ex = jacobi_excluded(&b, 1e-6);
        let on_line = g.index(g.nodes_per_axis() / 2, g.nodes_per_axis() / 2);
        assert!(!ex[on_line]);
        let r = check_jacobi_pointwise(&b, &SlopeConstants::default()).unwrap();
        assert!(r.pass, "{r:?}");
        assert!(r.lhs > 0.0);
    }

    #[test]
    fn affine_shift_leaves_jacobi_constant() {
        let g = build_grid(4.0, 65).unwrap();
        let u = sample(|x, y| 0.5 * (x * x + y * y) + 0.1 * x.sin() * y.sin(), &g).unwrap();
        let v = sample(|x, y| 0.5 * (x * x + y * y) + 0.1 * x.sin() * y.sin() + 3.0 * x - y + 2.0, &g).unwrap();
        let k = SlopeConstants::default();
        let a = check_jacobi_pointwise(&bundle(&u).unwrap(), &k).unwrap();
        let b = check_jacobi_pointwise(&bundle(&v).unwrap(), &k).unwrap();
        assert!((a.lhs - b.lhs).abs() < 1e-6 * (1.0 + a.lhs), "{} {}", a.lhs, b.lhs);
    }

    #[test]
    fn quadratic_weight_examples() {
        let g = build_grid(4.0, 65).unwrap();
        let u = sample(|x, y| 0.5 * (x * x + y * y), &g).unwrap();
        let b = bundle(&u).unwrap();
        for a in [0.0, 0.5, 2.0] {
            let k = SlopeConstants::default().with_weight(a);
            let r = check_subharmonic_modified_slope(&b, &k, 2.0, 50, 1).unwrap();
            // Δ_g b̃ = A tr(g⁻¹) = A
            assert!((r.rhs - a).abs() < 1e-8, "{}", r.rhs);
            assert!(r.pass);
        }
        let u = sample(|x, y| x * x + y * y, &g).unwrap();
        let b = bundle(&u).unwrap();
        let r = check_subharmonic_modified_slope(&b, &SlopeConstants::default(), 2.0, 50, 1).unwrap();
        assert!(r.rhs.abs() < 1e-8);
        let fit = fit_modified_slope_weight(&b, 2.0).unwrap();
        assert_eq!(fit.a_hat, 0.0);
    }

    #[test]
    fn weight_sweep_is_monotone() {
        let g = build_grid(4.0, 129).unwrap();
        let b = fd_bundle(Family::Perturbed { eps: 0.1 }, &g);
        let fit = fit_modified_slope_weight(&b, 2.0).unwrap();
        assert!(fit.a_hat > 0.0);
        let mut prev = f64::NEG_INFINITY;
        for a in [0.0, 0.5 * fit.a_hat, fit.a_hat, 2.0 * fit.a_hat] {
            let k = SlopeConstants::default().with_weight(a);
            let r = check_subharmonic_modified_slope(&b, &k, 2.0, 50, 1).unwrap();
            assert!(r.rhs >= prev);
            prev = r.rhs;
        }
        let k = SlopeConstants::default().with_weight(fit.a_hat);
        let r = check_subharmonic_modified_slope(&b, &k, 2.0, 100, 1).unwrap();
        assert!(r.pass, "{r:?}");
    }

    #[test]
    fn low_phase_is_rejected() {
        let g = build_grid(4.0, 33).unwrap();
        let b = fd_bundle(Family::Saddle, &g);
        assert!(matches!(
            check_subharmonic_modified_slope(&b, &SlopeConstants::default(), 2.0, 10, 1),
            Err(LabError::PhaseOutOfRange(_))
        ));
    }

    #[test]
    fn negative_phase_is_reflected() {
        let g = build_grid(4.0, 65).unwrap();
        let pos = fd_bundle(Family::Perturbed { eps: 0.1 }, &g);
        let neg = pos.negated().unwrap();
        let k = SlopeConstants::default().with_weight(0.3);
        let a = check_subharmonic_modified_slope(&pos, &k, 2.0, 20, 1).unwrap();
        let b = check_subharmonic_modified_slope(&neg, &k, 2.0, 20, 1).unwrap();
        assert!((a.rhs - b.rhs).abs() < 1e-9);
    }

    #[test]
    fn integral_jacobi() {
        let g = build_grid(4.0, 129).unwrap();
        let cut = make_cutoff(2.0, 3.0, &g).unwrap();
        let k = SlopeConstants::default();
        let quad = fd_bundle(Family::Quadratic { a: 1.0 }, &g);
        let r = check_jacobi_integral(&quad, &cut, &k).unwrap();
        assert!(r.lhs.abs() < 1e-9);
        assert!(r.pass);

        let b = fd_bundle(Family::Perturbed { eps: 0.1 }, &g);
        let r = check_jacobi_integral(&b, &cut, &k).unwrap();
        assert!(r.pass, "{r:?}");
        assert!(r.margin > 0.0);
        assert!(r.fitted("ibp_residual").unwrap() <= 10.0 * g.spacing());

        let tight = make_cutoff(2.0, 4.0, &g).unwrap();
        assert!(matches!(check_jacobi_integral(&b, &tight, &k), Err(LabError::BadCutoff { .. })));
    }
}
