//! Radial cutoff `φ` with `φ = 1` on `B_{r₁}` and `φ = 0` outside `B_{r₂}`.
//!
//! The transition is the quintic smoothstep in `t = (|x| - r₁)/(r₂ - r₁)`,
//! `φ = 1 - (10t³ - 15t⁴ + 6t⁵)`, which is C² in the radius. Its slope
//! `30t²(1-t)²/(r₂-r₁)` peaks at `t = 1/2`, so `|Dφ| ≤ 15/(8(r₂-r₁))`.

use std::f64::consts::PI;

use super::{Grid2, ScalarField2, Vec2Field};
use crate::error::{LabError, Result};

#[derive(Debug, Clone)]
pub struct CutoffProfile {
    inner: f64,
    outer: f64,
    field: ScalarField2,
    gradient: Vec2Field,
    gradient_bound: f64,
}

impl CutoffProfile {
    pub fn inner_radius(&self) -> f64 {
        self.inner
    }

    pub fn outer_radius(&self) -> f64 {
        self.outer
    }

    pub fn field(&self) -> &ScalarField2 {
        &self.field
    }

    /// Exact `Dφ` at the nodes.
    pub fn gradient(&self) -> &Vec2Field {
        &self.gradient
    }

    /// Certified bound on `max |Dφ|`.
    pub fn gradient_bound(&self) -> f64 {
        self.gradient_bound
    }

    /// Radial profile value at radius `s`.
    pub fn profile(&self, s: f64) -> f64 {
        radial_value(self.inner, self.outer, s)
    }

    /// Radial derivative `dφ/ds` at radius `s`.
    pub fn profile_slope(&self, s: f64) -> f64 {
        radial_slope(self.inner, self.outer, s)
    }

    /// Closed form of `∫ |Dφ|² dx` over the plane.
    ///
    /// With `w = r₂ - r₁` the integral is `2π ∫₀¹ 900 t⁴(1-t)⁴ (r₁ + w t) / w dt`;
    /// the Beta integrals `B(5,5) = 1/630` and `B(6,5) = 1/1260` give
    /// `(2π/7)(10 r₁/w + 5)`.
    pub fn dirichlet_energy(&self) -> f64 {
        let w = self.outer - self.inner;
        2.0 * PI / 7.0 * (10.0 * self.inner / w + 5.0)
    }

    /// Closed form of `∫ |Dφ| dx`. The radial slope integrates against
    /// `s ds` to `r₁ + w/2` (Beta integrals `B(3,3)` and `B(4,3)`), so the
    /// mass is `2π(r₁ + r₂)/2`.
    pub fn gradient_mass(&self) -> f64 {
        PI * (self.inner + self.outer)
    }
}

fn radial_value(inner: f64, outer: f64, s: f64) -> f64 {
    if s <= inner {
        1.0
    } else if s >= outer {
        0.0
    } else {
        let t = (s - inner) / (outer - inner);
        1.0 - t * t * t * (10.0 - 15.0 * t + 6.0 * t * t)
    }
}

fn radial_slope(inner: f64, outer: f64, s: f64) -> f64 {
    if s <= inner || s >= outer {
        0.0
    } else {
        let w = outer - inner;
        let t = (s - inner) / w;
        -30.0 * t * t * (1.0 - t) * (1.0 - t) / w
    }
}

/// Builds the cutoff on `grid`. Requires `0 < r₁ < r₂ ≤ L`.
pub fn make_cutoff(inner: f64, outer: f64, grid: &Grid2) -> Result<CutoffProfile> {
    if !(inner > 0.0 && inner < outer && outer <= grid.half_width()) {
        return Err(LabError::BadCutoff {
            inner,
            outer,
            half_width: grid.half_width(),
        });
    }
    let mut phi = Vec::with_capacity(grid.len());
    let mut d1 = Vec::with_capacity(grid.len());
    let mut d2 = Vec::with_capacity(grid.len());
    for k in 0..grid.len() {
        let (x, y) = grid.point_of(k);
        let s = x.hypot(y);
        phi.push(radial_value(inner, outer, s));
        let slope = radial_slope(inner, outer, s);
        if slope == 0.0 {
            d1.push(0.0);
            d2.push(0.0);
        } else {
            d1.push(slope * x / s);
            d2.push(slope * y / s);
        }
    }
    Ok(CutoffProfile {
        inner,
        outer,
        field: ScalarField2::from_values(*grid, phi)?,
        gradient: Vec2Field::new(
            ScalarField2::from_values(*grid, d1)?,
            ScalarField2::from_values(*grid, d2)?,
        )?,
        gradient_bound: 15.0 / (8.0 * (outer - inner)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, integrate_disk};

    #[test]
    fn standard_profile_matches_normalization() {
        let g = build_grid(4.0, 257).unwrap();
        let c = make_cutoff(2.0, 3.0, &g).unwrap();
        assert_eq!(c.profile(2.0), 1.0);
        assert_eq!(c.profile(3.0), 0.0);
        assert!(c.gradient_bound() < 2.0);
        assert!(c.gradient_bound() <= 2.0 / 1.0 * 1.5);
        assert_eq!(c.field().values()[g.origin().unwrap()], 1.0);
        let max_grad = c.gradient().norm().max();
        assert!(max_grad <= c.gradient_bound());
        assert!(max_grad < 2.0);
    }

    #[test]
    fn nodewise_invariants() {
        let g = build_grid(4.0, 129).unwrap();
        let c = make_cutoff(1.5, 3.5, &g).unwrap();
        for k in 0..g.len() {
            let (x, y) = g.point_of(k);
            let s = x.hypot(y);
            let phi = c.field().values()[k];
            assert!((0.0..=1.0).contains(&phi));
            if s <= 1.5 {
                assert_eq!(phi, 1.0);
            }
            if s >= 3.5 {
                assert_eq!(phi, 0.0);
            }
        }
        assert!(c.gradient().norm().max() <= c.gradient_bound());
    }

    #[test]
    fn rejects_bad_radii() {
        let g = build_grid(4.0, 33).unwrap();
        for (a, b) in [(0.0, 1.0), (2.0, 2.0), (3.0, 2.0), (2.0, 4.5)] {
            assert!(matches!(
                make_cutoff(a, b, &g),
                Err(LabError::BadCutoff { .. })
            ));
        }
    }

    /// Midpoint rule on `2π ∫ φ'(s)² s ds` with 10⁶ samples.
    fn radial_energy_oracle(inner: f64, outer: f64) -> f64 {
        let samples = 1_000_000;
        let ds = (outer - inner) / samples as f64;
        (0..samples)
            .map(|m| {
                let s = inner + (m as f64 + 0.5) * ds;
                let slope = radial_slope(inner, outer, s);
                slope * slope * s
            })
            .sum::<f64>()
            * ds
            * 2.0
            * PI
    }

    #[test]
    fn dirichlet_energy_closed_form() {
        let g = build_grid(4.0, 257).unwrap();
        for (a, b) in [(2.0, 3.0), (1.0, 3.5), (0.5, 1.0)] {
            let c = make_cutoff(a, b, &g).unwrap();
            let oracle = radial_energy_oracle(a, b);
            assert!(
                (c.dirichlet_energy() - oracle).abs() < 1e-8 * oracle,
                "{} vs {oracle}",
                c.dirichlet_energy()
            );
        }
        for (a, b) in [(2.0, 3.0), (1.0, 3.5)] {
            let c = make_cutoff(a, b, &g).unwrap();
            let samples = 1_000_000;
            let ds = (b - a) / samples as f64;
            let oracle = (0..samples)
                .map(|m| {
                    let s = a + (m as f64 + 0.5) * ds;
                    radial_slope(a, b, s).abs() * s
                })
                .sum::<f64>()
                * ds
                * 2.0
                * PI;
            assert!((c.gradient_mass() - oracle).abs() < 1e-8 * oracle);
        }
        let c = make_cutoff(2.0, 3.0, &g).unwrap();
        assert!((c.dirichlet_energy() - 50.0 * PI / 7.0).abs() < 1e-12);
        let grad2 = c
            .gradient()
            .x1
            .zip_map(&c.gradient().x2, |a, b| a * a + b * b)
            .unwrap();
        let quad = integrate_disk(&grad2, 3.0).unwrap();
        assert!((quad - c.dirichlet_energy()).abs() < 10.0 * g.spacing());
    }
}
