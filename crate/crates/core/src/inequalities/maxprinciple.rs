//! Weak maximum principle on random subdomains and the super-isoperimetric
//! inequality `‖f‖_{L∞(B₁)} ≤ ∫_{B₂}|Df| + ∫_{B₂} f`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{quadrature_slack, InequalityReport};
use crate::error::{LabError, Result};
use crate::grid::{gradient_fd, integrate_disk, sup_norm_disk, Grid2, ScalarField2};

/// `C` in the slack `C h Lip(f)` of the maximum-principle comparison.
pub const WMP_SLACK_C: f64 = 2.0;

/// Subdomains narrower than this many grid spacings are skipped.
const MIN_SUBDOMAIN_WIDTH: f64 = 4.0;

#[derive(Debug, Clone, Copy)]
enum Subdomain {
    Disk { cx: f64, cy: f64, r: f64 },
    Rect { x0: f64, x1: f64, y0: f64, y1: f64 },
}

impl Subdomain {
    fn contains(&self, x: f64, y: f64) -> bool {
        match *self {
            Subdomain::Disk { cx, cy, r } => (x - cx).powi(2) + (y - cy).powi(2) <= r * r,
            Subdomain::Rect { x0, x1, y0, y1 } => x >= x0 && x <= x1 && y >= y0 && y <= y1,
        }
    }

    fn width(&self) -> f64 {
        match *self {
            Subdomain::Disk { r, .. } => 2.0 * r,
            Subdomain::Rect { x0, x1, y0, y1 } => (x1 - x0).min(y1 - y0),
        }
    }

    fn describe(&self) -> String {
        match *self {
            Subdomain::Disk { cx, cy, r } => format!("disk centre ({cx:.4}, {cy:.4}) radius {r:.4}"),
            Subdomain::Rect { x0, x1, y0, y1 } => {
                format!("rectangle [{x0:.4}, {x1:.4}] x [{y0:.4}, {y1:.4}]")
            }
        }
    }

    /// Random disk or axis-aligned rectangle inside `B_ρ`.
    fn random(rng: &mut ChaCha8Rng, rho: f64) -> Self {
        if rng.gen_bool(0.5) {
            let r = rng.gen_range(0.0..rho);
            let reach = rho - r;
            let (t, s) = (rng.gen_range(0.0..std::f64::consts::TAU), rng.gen_range(0.0f64..1.0));
            let d = reach * s.sqrt();
            Subdomain::Disk {
                cx: d * t.cos(),
                cy: d * t.sin(),
                r,
            }
        } else {
            loop {
                let (a, b) = (rng.gen_range(-rho..rho), rng.gen_range(-rho..rho));
                let (c, d) = (rng.gen_range(-rho..rho), rng.gen_range(-rho..rho));
                let (x0, x1) = (a.min(b), a.max(b));
                let (y0, y1) = (c.min(d), c.max(d));
                let corner = x0.abs().max(x1.abs()).hypot(y0.abs().max(y1.abs()));
                if corner <= rho {
                    break Subdomain::Rect { x0, x1, y0, y1 };
                }
            }
        }
    }
}

struct TrialOutcome {
    interior_max: f64,
    band_max: f64,
}

/// Max over interior nodes and over the band of nodes with a 4-neighbour
/// outside the subdomain. `None` when either set is empty.
fn trial(f: &ScalarField2, grid: &Grid2, dom: &Subdomain) -> Option<TrialOutcome> {
    let n = grid.nodes_per_axis();
    let inside = |i: usize, j: usize| {
        let (x, y) = grid.point(i, j);
        dom.contains(x, y)
    };
    let mut interior_max = f64::NEG_INFINITY;
    let mut band_max = f64::NEG_INFINITY;
    for j in 0..n {
        for i in 0..n {
            if !inside(i, j) {
                continue;
            }
            let v = f.at(i, j);
            let edge = i == 0
                || j == 0
                || i == n - 1
                || j == n - 1
                || !inside(i - 1, j)
                || !inside(i + 1, j)
                || !inside(i, j - 1)
                || !inside(i, j + 1);
            if edge {
                band_max = band_max.max(v);
            } else {
                interior_max = interior_max.max(v);
            }
        }
    }
    (interior_max.is_finite() && band_max.is_finite()).then_some(TrialOutcome {
        interior_max,
        band_max,
    })
}

/// Weak maximum principle on `trials` random subdomains of `B₂`.
pub fn check_weak_max_principle(f: &ScalarField2, trials: usize, seed: u64) -> Result<InequalityReport> {
    check_weak_max_principle_in(f, 2.0, trials, seed)
}

/// Weak maximum principle on random disks and rectangles inside `B_ρ`:
/// each must have `max_interior f ≤ max_band f + 2 h Lip(f)`, with `Lip(f)`
/// the largest difference gradient on `B_ρ`. The report carries the worst
/// subdomain.
pub fn check_weak_max_principle_in(
    f: &ScalarField2,
    radius: f64,
    trials: usize,
    seed: u64,
) -> Result<InequalityReport> {
    let grid = *f.grid();
    grid.check_radius(radius)?;
    let h = grid.spacing();
    let lip = sup_norm_disk(&gradient_fd(f).norm(), radius)?;
    let slack = WMP_SLACK_C * h * lip;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: Option<(f64, TrialOutcome, Subdomain)> = None;
    let mut skipped = 0usize;
    let mut failures = 0usize;
    for _ in 0..trials {
        let dom = Subdomain::random(&mut rng, radius);
        if dom.width() < MIN_SUBDOMAIN_WIDTH * h {
            skipped += 1;
            continue;
        }
        let Some(out) = trial(f, &grid, &dom) else {
            skipped += 1;
            continue;
        };
        let margin = out.band_max - out.interior_max;
        if margin < -slack {
            failures += 1;
        }
        if worst.as_ref().is_none_or(|(m, _, _)| margin < *m) {
            worst = Some((margin, out, dom));
        }
    }
    let evaluated = trials - skipped;
    let mut report = match worst {
        Some((_, out, dom)) => InequalityReport::new("weak_max_principle", out.interior_max, out.band_max, slack)
            .with_note(format!("worst subdomain: {}", dom.describe())),
        None => {
            let mut r = InequalityReport::new("weak_max_principle", 0.0, 0.0, slack);
            r.pass = false;
            r.with_note("no non-degenerate subdomain was sampled")
        }
    };
    report = report
        .with_fitted("lipschitz", lip)
        .with_fitted("subdomains", evaluated as f64)
        .with_fitted("degenerate_skipped", skipped as f64)
        .with_fitted("failures", failures as f64);
    Ok(report)
}

/// Super-isoperimetric inequality on `B₁ ⊂ B₂`. Requires `f ≥ 0` on `B₂` and
/// a passing weak-maximum-principle check (run with `trials` and `seed`).
pub fn check_super_iso(f: &ScalarField2, trials: usize, seed: u64) -> Result<InequalityReport> {
    let grid = f.grid();
    grid.check_radius(2.0)?;
    let wmp = check_weak_max_principle(f, trials, seed)?;
    if !wmp.pass {
        return Err(LabError::Precondition(format!(
            "weak maximum principle fails: interior max {} exceeds boundary max {} by more than {}",
            wmp.lhs, wmp.rhs, wmp.slack
        )));
    }
    let min = grid
        .disk_indices(2.0)
        .map(|k| f.values()[k])
        .fold(f64::INFINITY, f64::min);
    if min < 0.0 {
        return Err(LabError::Precondition(format!(
            "function must be nonnegative on B2, minimum is {min}"
        )));
    }
    let grad = gradient_fd(f).norm();
    let lhs = sup_norm_disk(f, 1.0)?;
    let grad_int = integrate_disk(&grad, 2.0)?;
    let f_int = integrate_disk(f, 2.0)?;
    let slack = quadrature_slack(&grad, 2.0) + quadrature_slack(f, 2.0);
    Ok(InequalityReport::new("super_isoperimetric", lhs, grad_int + f_int, slack)
        .with_fitted("integral_grad", grad_int)
        .with_fitted("integral_f", f_int)
        .with_fitted("wmp_margin", wmp.margin))
}
