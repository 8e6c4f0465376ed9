use std::time::Instant;

use serde::Serialize;

use crate::error::{LabError, Result};
use crate::grid::{build_grid, gradient_fd, hessian_fd};

use super::{newton_solve, ManufacturedProblem, NewtonConfig};

/// Errors below this are treated as round-off and get no observed order.
pub const ROUNDOFF_FLOOR: f64 = 1e-11;

#[derive(Debug, Clone, Serialize)]
pub struct LevelResult {
    pub n: usize,
    pub h: f64,
    pub iterations: usize,
    pub final_residual: f64,
    pub final_ratio: Option<f64>,
    pub error_u: f64,
    pub error_du: f64,
    pub error_d2u: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceStudy {
    pub levels: Vec<LevelResult>,
    /// `log₂(e_h / e_{h/2})` for consecutive levels; `None` at round-off.
    pub order_u: Vec<Option<f64>>,
    pub order_du: Vec<Option<f64>>,
    pub order_d2u: Vec<Option<f64>>,
}

fn orders(errors: &[f64]) -> Vec<Option<f64>> {
    errors
        .windows(2)
        .map(|w| (w[0] > ROUNDOFF_FLOOR && w[1] > ROUNDOFF_FLOOR).then(|| (w[0] / w[1]).log2()))
        .collect()
}

/// Solves the problem's potential on each node count of `ladder` (same half
/// width) and measures sup-norm errors of `u`, `Du` and `D²u` against the
/// analytic values.
pub fn convergence_study(
    problem: &ManufacturedProblem,
    ladder: &[usize],
    config: &NewtonConfig,
) -> Result<ConvergenceStudy> {
    if ladder.len() < 3 {
        return Err(LabError::Precondition(format!(
            "a convergence study needs at least 3 levels, got {}",
            ladder.len()
        )));
    }
    for w in ladder.windows(2) {
        if w[1] != 2 * w[0] - 1 {
            return Err(LabError::Precondition(format!(
                "levels must halve the spacing: {} then {}",
                w[0], w[1]
            )));
        }
    }
    let half_width = problem.grid().half_width();
    let mut levels = Vec::with_capacity(ladder.len());
    for &n in ladder {
        let start = Instant::now();
        let grid = build_grid(half_width, n)?;
        let p = problem.on_grid(&grid)?;
        let state = newton_solve(&p.psi, &p.boundary, config)?;
        if !state.converged {
            return Err(LabError::NotConverged { n });
        }
        let u = &state.iterate;
        let err_u = u
            .values()
            .iter()
            .zip(p.u_exact.values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let du = gradient_fd(u);
        let d2u = hessian_fd(u);
        let mut err_du = 0.0f64;
        let mut err_d2u = 0.0f64;
        for k in 0..grid.len() {
            let g = du.at_index(k);
            let ge = p.gradient_exact.at_index(k);
            err_du = err_du.max((g[0] - ge[0]).abs()).max((g[1] - ge[1]).abs());
            let s = d2u.at_index(k);
            let se = p.hessian_exact.at_index(k);
            err_d2u = err_d2u
                .max((s.m11 - se.m11).abs())
                .max((s.m12 - se.m12).abs())
                .max((s.m22 - se.m22).abs());
        }
        levels.push(LevelResult {
            n,
            h: grid.spacing(),
            iterations: state.iterations(),
            final_residual: state.final_residual(),
            final_ratio: state.final_ratio(),
            error_u: err_u,
            error_du: err_du,
            error_d2u: err_d2u,
            seconds: start.elapsed().as_secs_f64(),
        });
    }
    let col = |f: fn(&LevelResult) -> f64| orders(&levels.iter().map(f).collect::<Vec<_>>());
    Ok(ConvergenceStudy {
        order_u: col(|l| l.error_u),
        order_du: col(|l| l.error_du),
        order_d2u: col(|l| l.error_d2u),
        levels,
    })
}
