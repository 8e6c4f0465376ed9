//! Numerical checks of the differential and integral inequalities behind the
//! interior Hessian estimate.
//!
//! Every check returns an [`InequalityReport`] with `pass ⇔ margin ≥ -slack`.
//! Constants without explicit values (the Jacobi additive constant, the
//! quadratic weight `A`, the volume constant, the Hessian-estimate constant)
//! are fitted on the data and reported.

mod jacobi;
mod maxprinciple;
mod volume;

use std::borrow::Cow;
use std::f64::consts::{FRAC_PI_4, PI};
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{LabError, Result};
use crate::geometry::GeometryBundle;
use crate::grid::ScalarField2;

pub use jacobi::{
    check_jacobi_integral, check_jacobi_pointwise, check_subharmonic_modified_slope,
    fit_modified_slope_weight, jacobi_excluded, WeightFit, SUBHARMONIC_SLACK,
};
pub use maxprinciple::{check_super_iso, check_weak_max_principle, check_weak_max_principle_in, WMP_SLACK_C};
pub use volume::{check_hessian_estimate, check_volume_bound, fit_hessian_constant, HESSIAN_BISECTION_TOL};

/// Upper end of the first supercritical regime, with the closed-condition
/// allowance used for classification.
pub const CASE_SPLIT: f64 = 3.0 * FRAC_PI_4;
pub const CASE_SPLIT_ALLOWANCE: f64 = 1e-12;

/// Phase regime of a field, canonicalized to positive phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    /// Some phase below `δ` in absolute value, or a sign change.
    Subcritical,
    /// `δ ≤ ψ ≤ 3π/4`.
    Case1,
    /// `ψ > 3π/4`.
    Case2,
    /// Supercritical, but straddling `3π/4`.
    Mixed,
}

impl Regime {
    /// Classifies the phase range `[min, max]`. A range inside `(-π, -δ]` is
    /// classified by its reflection, matching `u ↦ -u`.
    pub fn classify(min: f64, max: f64, delta: f64) -> Self {
        if max <= -delta {
            return Self::classify(-max, -min, delta);
        }
        let edge = CASE_SPLIT + CASE_SPLIT_ALLOWANCE;
        if min < delta {
            Regime::Subcritical
        } else if max <= edge {
            Regime::Case1
        } else if min > edge {
            Regime::Case2
        } else {
            Regime::Mixed
        }
    }

    pub fn of_field(psi: &ScalarField2, delta: f64) -> Self {
        Self::classify(psi.min(), psi.max(), delta)
    }

    /// Regime of the phase restricted to the nodes of `B_r`.
    pub fn on_disk(psi: &ScalarField2, radius: f64, delta: f64) -> Result<Self> {
        psi.grid().check_radius(radius)?;
        let (lo, hi) = phase_range(psi, radius);
        Ok(Self::classify(lo, hi, delta))
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::Subcritical => "subcritical",
            Regime::Case1 => "case1",
            Regime::Case2 => "case2",
            Regime::Mixed => "mixed",
        })
    }
}

impl FromStr for Regime {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "subcritical" => Ok(Regime::Subcritical),
            "case1" | "1" => Ok(Regime::Case1),
            "case2" | "2" => Ok(Regime::Case2),
            "mixed" => Ok(Regime::Mixed),
            other => Err(LabError::Parse(format!("unknown regime {other:?}"))),
        }
    }
}

fn phase_range(psi: &ScalarField2, radius: f64) -> (f64, f64) {
    psi.grid()
        .disk_indices(radius)
        .map(|k| psi.values()[k])
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

#[derive(Debug, Clone, Serialize)]
pub struct InequalityReport {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs - lhs`.
    pub margin: f64,
    /// Allowance for discretization error; `pass ⇔ margin ≥ -slack`.
    pub slack: f64,
    pub pass: bool,
    pub fitted: Vec<(String, f64)>,
    /// Nodes dropped by the eigengap filter.
    pub excluded_nodes: usize,
    pub notes: Vec<String>,
}

impl InequalityReport {
    pub fn new(name: &str, lhs: f64, rhs: f64, slack: f64) -> Self {
        let margin = rhs - lhs;
        Self {
            name: name.to_string(),
            lhs,
            rhs,
            margin,
            slack,
            pass: margin >= -slack,
            fitted: Vec::new(),
            excluded_nodes: 0,
            notes: Vec::new(),
        }
    }

    pub fn with_fitted(mut self, key: &str, value: f64) -> Self {
        self.fitted.push((key.to_string(), value));
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.notes.push(note.into());
        self
    }

    pub fn fitted(&self, key: &str) -> Option<f64> {
        self.fitted.iter().find(|(k, _)| k == key).map(|(_, v)| *v)
    }
}

/// Bundle with nonnegative phase: a bundle whose phase is everywhere
/// `≤ -δ` is replaced by the bundle of `-u`.
pub(crate) fn canonical(b: &GeometryBundle, delta: f64) -> Result<Cow<'_, GeometryBundle>> {
    if b.psi.max() <= -delta {
        Ok(Cow::Owned(b.negated()?))
    } else {
        Ok(Cow::Borrowed(b))
    }
}

/// Slack for node-indicator quadrature over `B_r`: `3 h · 2πr · sup|f|`
/// with the sup over the annulus `r - 2h ≤ |x| ≤ r + 2h`.
pub fn quadrature_slack(integrand: &ScalarField2, radius: f64) -> f64 {
    let grid = integrand.grid();
    let h = grid.spacing();
    let (lo, hi) = ((radius - 2.0 * h).max(0.0), radius + 2.0 * h);
    let sup = (0..grid.len())
        .filter(|&k| {
            let (x, y) = grid.point_of(k);
            let r = x.hypot(y);
            r >= lo && r <= hi
        })
        .fold(0.0f64, |m, k| m.max(integrand.values()[k].abs()));
    3.0 * h * 2.0 * PI * radius * sup
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, sample};
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn classification() {
        let d = 0.3;
        assert_eq!(Regime::classify(FRAC_PI_2, FRAC_PI_2, d), Regime::Case1);
        assert_eq!(Regime::classify(d, CASE_SPLIT, d), Regime::Case1);
        assert_eq!(Regime::classify(2.0 * 5f64.atan(), 2.8, d), Regime::Case2);
        assert_eq!(Regime::classify(2.0, 2.5, d), Regime::Mixed);
        assert_eq!(Regime::classify(0.0, 0.0, d), Regime::Subcritical);
        assert_eq!(Regime::classify(-0.5, 0.5, d), Regime::Subcritical);
        assert_eq!(Regime::classify(-FRAC_PI_2, -FRAC_PI_2, d), Regime::Case1);
        assert_eq!(Regime::classify(-2.9, -2.5, d), Regime::Case2);
        for r in [Regime::Subcritical, Regime::Case1, Regime::Case2, Regime::Mixed] {
            assert_eq!(r.to_string().parse::<Regime>().unwrap(), r);
        }
    }

    #[test]
    fn disk_regime_ignores_outside() {
        let g = build_grid(4.0, 33).unwrap();
        let psi = sample(|x, _| if x > 3.5 { 0.0 } else { 1.0 }, &g).unwrap();
        assert_eq!(Regime::of_field(&psi, 0.3), Regime::Subcritical);
        assert_eq!(Regime::on_disk(&psi, 3.0, 0.3).unwrap(), Regime::Case1);
    }

    #[test]
    fn report_pass_rule() {
        let r = InequalityReport::new("t", 2.0, 1.0, 0.5);
        assert!(!r.pass);
        let r = InequalityReport::new("t", 1.4, 1.0, 0.5);
        assert!(r.pass);
        assert_eq!(r.margin, 1.0 - 1.4);
    }
}
