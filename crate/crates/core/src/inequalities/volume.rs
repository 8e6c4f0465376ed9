//! Volume bounds in the two supercritical regimes and the interior Hessian
//! estimate `|D²u(0)| ≤ C exp(C G)`.

use std::f64::consts::PI;

use super::{canonical, quadrature_slack, InequalityReport, Regime, CASE_SPLIT, CASE_SPLIT_ALLOWANCE};
use crate::error::{LabError, Result};
use crate::geometry::bundle;
use crate::geometry::GeometryBundle;
use crate::grid::{hessian_fd, integrate_disk, make_cutoff, sup_norm_disk, ScalarField2};

/// Absolute width at which the bisection for `C*` stops.
pub const HESSIAN_BISECTION_TOL: f64 = 1e-10;

fn phase_on(b: &GeometryBundle, radius: f64) -> (f64, f64) {
    b.grid()
        .disk_indices(radius)
        .map(|k| b.psi.values()[k])
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

/// Volume bounds.
///
/// `Case1` (`δ ≤ ψ ≤ 3π/4` on `B₃`): node-wise `V ≤ Δu / sin δ` with no
/// slack, and `∫_{B₂} V ≤ (M/sin δ) ‖Du‖_{L∞(B₃)}` where `M = ∫|Dφ|` for the
/// standard `(2, 3)` cutoff; this follows from `∫_{B₂}Δu ≤ ∫φΔu = -∫Dφ·Du`.
/// The constant `sin δ ∫_{B₂}V / ‖Du‖` is reported as fitted.
///
/// `Case2` (`ψ > 3π/4` on `B₄`): `∫_{B₃} V ≤ √2 ‖Du‖²_{L∞(B₄)}`. The pass
/// flag is this bound as written. Reported alongside: the gradient-image
/// reading `∫_{B₃}(σ₂ - 1) ≤ π ‖Du‖²_{L∞(B₃)}` (the area of `Du(B₃)` for convex
/// `u`), the same without the factor `π`, and the chain
/// `∫_{B₃}V ≤ max|sec ψ| ∫_{B₃}(σ₂ - 1)`.
pub fn check_volume_bound(b: &GeometryBundle, regime: Regime, delta: f64) -> Result<InequalityReport> {
    let b = canonical(b, delta)?;
    let grid = *b.grid();
    let edge = CASE_SPLIT + CASE_SPLIT_ALLOWANCE;
    let du = b.gradient.norm();
    match regime {
        Regime::Case1 => {
            grid.check_radius(3.0)?;
            let (lo, hi) = phase_on(&b, 3.0);
            if lo < delta || hi > edge {
                return Err(LabError::RegimeMismatch(format!(
                    "case1 needs {delta} <= psi <= 3pi/4 on B3, phase spans [{lo}, {hi}]"
                )));
            }
            let sd = delta.sin();
            let mut excess = f64::NEG_INFINITY;
            for k in grid.disk_indices(3.0) {
                excess = excess.max(b.volume.values()[k] - b.sigma1.values()[k] / sd);
            }
            let vol = integrate_disk(&b.volume, 2.0)?;
            let du_sup = sup_norm_disk(&du, 3.0)?;
            let mass = make_cutoff(2.0, 3.0, &grid)?.gradient_mass();
            let bound = mass / sd * du_sup;
            let mut r = InequalityReport::new("volume_bound_case1", vol, bound, quadrature_slack(&b.volume, 2.0))
                .with_fitted("nodewise_max_excess", excess)
                .with_fitted("sup_du_B3", du_sup)
                .with_fitted("cutoff_gradient_mass", mass)
                .with_fitted("C2_fitted", sd * vol / du_sup);
            if excess > 0.0 {
                r.pass = false;
                r = r.with_note("node-wise V <= laplacian(u)/sin(delta) fails");
            }
            Ok(r)
        }
        Regime::Case2 => {
            grid.check_radius(4.0)?;
            let (lo, hi) = phase_on(&b, 4.0);
            if lo <= edge {
                return Err(LabError::RegimeMismatch(format!(
                    "case2 needs psi > 3pi/4 on B4, phase spans [{lo}, {hi}]"
                )));
            }
            let vol = integrate_disk(&b.volume, 3.0)?;
            let du4 = sup_norm_disk(&du, 4.0)?;
            let du3 = sup_norm_disk(&du, 3.0)?;
            let literal = 2f64.sqrt() * du4 * du4;
            let excess_density = b.sigma2.map(|s| s - 1.0)?;
            let excess = integrate_disk(&excess_density, 3.0)?;
            let sec_max = grid
                .disk_indices(3.0)
                .map(|k| 1.0 / b.psi.values()[k].cos().abs())
                .fold(0.0, f64::max);
            let slack = quadrature_slack(&b.volume, 3.0);
            let excess_slack = quadrature_slack(&excess_density, 3.0);
            let image = PI * du3 * du3;
            let mut r = InequalityReport::new("volume_bound_case2", vol, literal, slack)
                .with_fitted("sup_du_B4", du4)
                .with_fitted("sup_du_B3", du3)
                .with_fitted("integral_sigma2_minus_1", excess)
                .with_fitted("gradient_image_bound", image)
                .with_fitted("gradient_image_margin", image - excess)
                .with_fitted("bare_square_margin", du3 * du3 - excess)
                .with_fitted("sec_chain_bound", sec_max * excess)
                .with_fitted("sec_chain_margin", sec_max * excess - vol);
            r = r.with_note(format!(
                "gradient-image reading {}",
                if image - excess >= -excess_slack { "holds" } else { "fails" }
            ));
            if !r.pass {
                r = r.with_note("bound as written fails");
            }
            Ok(r)
        }
        other => Err(LabError::RegimeMismatch(format!(
            "volume bounds are stated for case1 and case2, got {other}"
        ))),
    }
}

/// Smallest `C ≥ 0` with `L ≤ C exp(C G)`, by bisection on `[0, L]`.
pub fn fit_hessian_constant(l: f64, g: f64) -> f64 {
    if !(l > 0.0) {
        return 0.0;
    }
    let f = |c: f64| c * (c * g).exp() - l;
    let (mut lo, mut hi) = (0.0, l);
    while hi - lo > HESSIAN_BISECTION_TOL {
        let mid = 0.5 * (lo + hi);
        if f(mid) >= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Interior Hessian estimate on `B_R`: `L = |D²u(0)|` (spectral norm of the
/// central-difference Hessian) against `G = sup_{B_R}|Du| / R` in `Case1` or
/// its square in `Case2`. Fits `C*` and passes when `C* ≤ budget`.
pub fn check_hessian_estimate(
    u: &ScalarField2,
    radius: f64,
    regime: Regime,
    delta: f64,
    budget: f64,
) -> Result<InequalityReport> {
    let grid = *u.grid();
    grid.check_radius(radius)?;
    let origin = grid
        .origin()
        .ok_or_else(|| LabError::Precondition("the origin must be a grid node (odd n)".into()))?;
    if !matches!(regime, Regime::Case1 | Regime::Case2) {
        return Err(LabError::RegimeMismatch(format!(
            "the estimate is stated for case1 and case2, got {regime}"
        )));
    }
    let b = bundle(u)?;
    let found = Regime::on_disk(&b.psi, radius, delta)?;
    if found != regime {
        return Err(LabError::RegimeMismatch(format!(
            "requested {regime}, phase on B_{radius} is {found}"
        )));
    }
    let l = hessian_fd(u).at_index(origin).spectral_norm();
    let g1 = sup_norm_disk(&b.gradient.norm(), radius)? / radius;
    let g = if regime == Regime::Case2 { g1 * g1 } else { g1 };
    let c_star = fit_hessian_constant(l, g);
    Ok(InequalityReport::new("hessian_estimate", c_star, budget, 0.0)
        .with_fitted("L", l)
        .with_fitted("G", g)
        .with_fitted("C_star", c_star))
}
