use std::f64::consts::PI;

use approx::assert_relative_eq;
use proptest::prelude::*;

use lmce_core::identities::{check_complex_factorization, check_slope_volume, check_volume_formula};
use lmce_core::inequalities::{check_volume_bound, fit_hessian_constant, HESSIAN_BISECTION_TOL};
use lmce_core::io::{read_field, write_field};
use lmce_core::solver::certify_residual;
use lmce_core::{build_grid, bundle, manufacture, newton_solve, sample, Family, NewtonConfig, Regime};

#[test]
fn solve_save_load_and_check() {
    let g = build_grid(4.0, 65).unwrap();
    let p = manufacture(Family::Perturbed { eps: 0.05 }.into_potential(), &g, 0.3).unwrap();
    let state = newton_solve(&p.psi, &p.boundary, &NewtonConfig::default()).unwrap();
    assert!(state.converged);
    assert!(certify_residual(&state.iterate, &p.psi).unwrap() <= 1e-9);

    let mut buf = Vec::new();
    write_field(&state.iterate, &mut buf).unwrap();
    let u = read_field(buf.as_slice()).unwrap();
    assert_eq!(u, state.iterate);

    let b = bundle(&u).unwrap();
    assert!(check_complex_factorization(&b).pass);
    assert!(check_volume_formula(&b, 0.3).unwrap().pass);
    assert!(check_slope_volume(&b).pass);
    assert_eq!(Regime::of_field(&b.psi, 0.3), Regime::Case1);
}

#[test]
fn reflected_field_keeps_its_regime_and_volume() {
    let g = build_grid(4.0, 129).unwrap();
    let p = manufacture(Family::Quadratic { a: 1.0 }.into_potential(), &g, 0.3).unwrap();
    let b = p.exact_bundle().unwrap();
    let neg = b.negated().unwrap();
    assert_eq!(Regime::of_field(&neg.psi, 0.3), Regime::Case1);
    let r = check_volume_bound(&b, Regime::Case1, 0.3).unwrap();
    let rn = check_volume_bound(&neg, Regime::Case1, 0.3).unwrap();
    assert_relative_eq!(r.lhs, rn.lhs, max_relative = 1e-12);
    assert_relative_eq!(r.lhs, 8.0 * PI, max_relative = 0.02);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Constant-Hessian potentials with positive definite Hessian satisfy the
    /// algebraic identities at every node.
    #[test]
    fn quadratic_forms_satisfy_identities(l1 in 0.05f64..6.0, l2 in 0.05f64..6.0, angle in 0.0f64..PI) {
        let (c, s) = (angle.cos(), angle.sin());
        let (a11, a12, a22) = (l1 * c * c + l2 * s * s, (l1 - l2) * c * s, l1 * s * s + l2 * c * c);
        let g = build_grid(2.0, 17).unwrap();
        let u = sample(|x, y| 0.5 * (a11 * x * x + 2.0 * a12 * x * y + a22 * y * y), &g).unwrap();
        let b = bundle(&u).unwrap();
        prop_assert!(check_complex_factorization(&b).pass);
        prop_assert!(check_volume_formula(&b, 0.01).unwrap().pass);
        prop_assert!(check_slope_volume(&b).pass);
        let expected = ((1.0 + l1 * l1) * (1.0 + l2 * l2)).sqrt();
        prop_assert!((b.volume.max() - expected).abs() <= 1e-8 * expected);
    }

    /// The fitted constant is the least `C ≥ 0` with `L ≤ C e^{C G}`.
    #[test]
    fn hessian_constant_is_least_root(l in 0.0f64..50.0, g in 0.0f64..20.0) {
        let c = fit_hessian_constant(l, g);
        prop_assert!(c >= 0.0);
        prop_assert!(c * (c * g).exp() >= l - 1e-8 * (1.0 + l));
        let below = (c - 10.0 * HESSIAN_BISECTION_TOL).max(0.0);
        if below < c {
            prop_assert!(below * (below * g).exp() < l);
        }
    }
}
