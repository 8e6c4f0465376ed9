//! Analytic potentials with closed-form derivatives.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{LabError, Result};
use crate::geometry::Sym2;

/// A smooth function of two variables with exact first and second derivatives.
pub trait Potential: Send + Sync + fmt::Debug {
    fn value(&self, x: f64, y: f64) -> f64;
    fn gradient(&self, x: f64, y: f64) -> [f64; 2];
    fn hessian(&self, x: f64, y: f64) -> Sym2;
    fn label(&self) -> String;
}

/// Built-in manufactured families.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Family {
    /// `u = a|x|²/2`.
    Quadratic { a: f64 },
    /// `u = (tan θ₁ x₁² + tan θ₂ x₂²)/2`, phase `θ₁ + θ₂`.
    Anisotropic { theta1: f64, theta2: f64 },
    /// `u = |x|²/2 + ε sin x₁ sin x₂`.
    Perturbed { eps: f64 },
    /// `u = x₁x₂`, phase zero.
    Saddle,
}

impl Family {
    pub fn into_potential(self) -> Arc<dyn Potential> {
        Arc::new(self)
    }

    /// Whether the Hessian is the same at every point.
    pub fn has_constant_hessian(&self) -> bool {
        !matches!(self, Family::Perturbed { .. })
    }
}

impl Potential for Family {
    fn value(&self, x: f64, y: f64) -> f64 {
        match *self {
            Family::Quadratic { a } => 0.5 * a * (x * x + y * y),
            Family::Anisotropic { theta1, theta2 } => {
                0.5 * (theta1.tan() * x * x + theta2.tan() * y * y)
            }
            Family::Perturbed { eps } => 0.5 * (x * x + y * y) + eps * x.sin() * y.sin(),
            Family::Saddle => x * y,
        }
    }

    fn gradient(&self, x: f64, y: f64) -> [f64; 2] {
        match *self {
            Family::Quadratic { a } => [a * x, a * y],
            Family::Anisotropic { theta1, theta2 } => [theta1.tan() * x, theta2.tan() * y],
            Family::Perturbed { eps } => [
                x + eps * x.cos() * y.sin(),
                y + eps * x.sin() * y.cos(),
            ],
            Family::Saddle => [y, x],
        }
    }

    fn hessian(&self, x: f64, y: f64) -> Sym2 {
        match *self {
            Family::Quadratic { a } => Sym2::new(a, 0.0, a),
            Family::Anisotropic { theta1, theta2 } => Sym2::new(theta1.tan(), 0.0, theta2.tan()),
            Family::Perturbed { eps } => {
                let d = 1.0 - eps * x.sin() * y.sin();
                Sym2::new(d, eps * x.cos() * y.cos(), d)
            }
            Family::Saddle => Sym2::new(0.0, 1.0, 0.0),
        }
    }

    fn label(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::Quadratic { a } => write!(f, "quadratic({a})"),
            Family::Anisotropic { theta1, theta2 } => write!(f, "anisotropic({theta1},{theta2})"),
            Family::Perturbed { eps } => write!(f, "perturbed({eps})"),
            Family::Saddle => write!(f, "saddle"),
        }
    }
}

/// Accepts `quadratic(1)`, `quadratic a=1`, `anisotropic(1.0, 0.3)`,
/// `perturbed(eps=0.1)` and `saddle`.
impl FromStr for Family {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let split = s
            .find(|c: char| c == '(' || c.is_whitespace())
            .unwrap_or(s.len());
        let name = s[..split].to_ascii_lowercase();
        let rest = s[split..].trim().trim_start_matches('(').trim_end_matches(')');
        let args: Vec<f64> = rest
            .split([',', ' '])
            .filter(|t| !t.trim().is_empty())
            .map(|t| {
                let t = t.rsplit('=').next().unwrap_or(t).trim();
                t.parse::<f64>()
                    .map_err(|_| LabError::Parse(format!("bad number {t:?} in {s:?}")))
            })
            .collect::<Result<_>>()?;
        let want = |k: usize| -> Result<()> {
            if args.len() == k {
                Ok(())
            } else {
                Err(LabError::Parse(format!(
                    "{name} takes {k} parameter(s), got {} in {s:?}",
                    args.len()
                )))
            }
        };
        let fam = match name.as_str() {
            "quadratic" => {
                want(1)?;
                Family::Quadratic { a: args[0] }
            }
            "anisotropic" => {
                want(2)?;
                Family::Anisotropic {
                    theta1: args[0],
                    theta2: args[1],
                }
            }
            "perturbed" => {
                want(1)?;
                Family::Perturbed { eps: args[0] }
            }
            "saddle" => {
                want(0)?;
                Family::Saddle
            }
            _ => return Err(LabError::Parse(format!("unknown family {s:?}"))),
        };
        if args.iter().any(|a| !a.is_finite()) {
            return Err(LabError::Parse(format!("non-finite parameter in {s:?}")));
        }
        Ok(fam)
    }
}

/// `v(x) = u(s x) / s²`: same Hessian at corresponding points, gradient
/// divided by `s`.
#[derive(Debug, Clone)]
pub struct Rescaled {
    pub inner: Arc<dyn Potential>,
    pub scale: f64,
}

impl Potential for Rescaled {
    fn value(&self, x: f64, y: f64) -> f64 {
        let s = self.scale;
        self.inner.value(s * x, s * y) / (s * s)
    }

    fn gradient(&self, x: f64, y: f64) -> [f64; 2] {
        let s = self.scale;
        let [a, b] = self.inner.gradient(s * x, s * y);
        [a / s, b / s]
    }

    fn hessian(&self, x: f64, y: f64) -> Sym2 {
        let s = self.scale;
        self.inner.hessian(s * x, s * y)
    }

    fn label(&self) -> String {
        format!("rescaled({}, {})", self.inner.label(), self.scale)
    }
}

/// `u + ⟨p, x⟩ + c`.
#[derive(Debug, Clone)]
pub struct AffineShifted {
    pub inner: Arc<dyn Potential>,
    pub slope: [f64; 2],
    pub offset: f64,
}

impl Potential for AffineShifted {
    fn value(&self, x: f64, y: f64) -> f64 {
        self.inner.value(x, y) + self.slope[0] * x + self.slope[1] * y + self.offset
    }

    fn gradient(&self, x: f64, y: f64) -> [f64; 2] {
        let [a, b] = self.inner.gradient(x, y);
        [a + self.slope[0], b + self.slope[1]]
    }

    fn hessian(&self, x: f64, y: f64) -> Sym2 {
        self.inner.hessian(x, y)
    }

    fn label(&self) -> String {
        format!("{} + affine", self.inner.label())
    }
}

/// `-u`, which maps phase `ψ` to `-ψ`.
#[derive(Debug, Clone)]
pub struct Negated(pub Arc<dyn Potential>);

impl Potential for Negated {
    fn value(&self, x: f64, y: f64) -> f64 {
        -self.0.value(x, y)
    }

    fn gradient(&self, x: f64, y: f64) -> [f64; 2] {
        let [a, b] = self.0.gradient(x, y);
        [-a, -b]
    }

    fn hessian(&self, x: f64, y: f64) -> Sym2 {
        let s = self.0.hessian(x, y);
        Sym2::new(-s.m11, -s.m12, -s.m22)
    }

    fn label(&self) -> String {
        format!("-({})", self.0.label())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fd_check(p: &dyn Potential, x: f64, y: f64) {
        let e = 1e-5;
        let g = p.gradient(x, y);
        let d1 = (p.value(x + e, y) - p.value(x - e, y)) / (2.0 * e);
        let d2 = (p.value(x, y + e) - p.value(x, y - e)) / (2.0 * e);
        assert!((g[0] - d1).abs() < 1e-7 && (g[1] - d2).abs() < 1e-7);
        let h = p.hessian(x, y);
        let h11 = (p.gradient(x + e, y)[0] - p.gradient(x - e, y)[0]) / (2.0 * e);
        let h12 = (p.gradient(x, y + e)[0] - p.gradient(x, y - e)[0]) / (2.0 * e);
        let h21 = (p.gradient(x + e, y)[1] - p.gradient(x - e, y)[1]) / (2.0 * e);
        let h22 = (p.gradient(x, y + e)[1] - p.gradient(x, y - e)[1]) / (2.0 * e);
        assert!((h.m11 - h11).abs() < 1e-7);
        assert!((h.m12 - h12).abs() < 1e-7 && (h.m12 - h21).abs() < 1e-7);
        assert!((h.m22 - h22).abs() < 1e-7);
    }

    #[test]
    fn parse_families() {
        assert_eq!("quadratic(1)".parse::<Family>().unwrap(), Family::Quadratic { a: 1.0 });
        assert_eq!("quadratic a=2".parse::<Family>().unwrap(), Family::Quadratic { a: 2.0 });
        assert_eq!(
            "anisotropic(1.0, 0.3)".parse::<Family>().unwrap(),
            Family::Anisotropic { theta1: 1.0, theta2: 0.3 }
        );
        assert_eq!(
            "perturbed(eps=0.1)".parse::<Family>().unwrap(),
            Family::Perturbed { eps: 0.1 }
        );
        assert_eq!("saddle".parse::<Family>().unwrap(), Family::Saddle);
        for bad in ["cubic(1)", "quadratic", "perturbed(x)", "anisotropic(1)"] {
            assert!(bad.parse::<Family>().is_err(), "{bad}");
        }
        for f in [Family::Quadratic { a: 2.5 }, Family::Perturbed { eps: 0.05 }] {
            assert_eq!(f.to_string().parse::<Family>().unwrap(), f);
        }
    }

    proptest! {
        #[test]
        fn derivatives_match_differences(x in -3.0..3.0f64, y in -3.0..3.0f64) {
            let fams: Vec<Arc<dyn Potential>> = vec![
                Family::Quadratic { a: 3.0 }.into_potential(),
                Family::Anisotropic { theta1: 1.0, theta2: 0.4 }.into_potential(),
                Family::Perturbed { eps: 0.1 }.into_potential(),
                Family::Saddle.into_potential(),
            ];
            for f in fams {
                fd_check(f.as_ref(), x, y);
                fd_check(&Rescaled { inner: f.clone(), scale: 0.5 }, x, y);
                fd_check(&AffineShifted { inner: f.clone(), slope: [0.3, -2.0], offset: 1.0 }, x, y);
                fd_check(&Negated(f.clone()), x, y);
            }
        }
    }
}
