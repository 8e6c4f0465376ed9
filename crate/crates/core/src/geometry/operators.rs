//! Metric gradient norm, Laplace–Beltrami operator and mean curvature on the
//! graph metric of a [`GeometryBundle`].

use super::GeometryBundle;
use crate::error::Result;
use crate::grid::{gradient_fd, ScalarField2};

/// `|∇_g f|² = gⁱʲ fᵢ fⱼ`.
pub fn grad_g_norm2(f: &ScalarField2, b: &GeometryBundle) -> Result<ScalarField2> {
    f.same_grid(&b.psi)?;
    let df = gradient_fd(f);
    let values = (0..f.grid().len())
        .map(|k| b.metric_inv.at_index(k).quadratic_form(df.at_index(k)))
        .collect();
    Ok(ScalarField2::from_trusted(*f.grid(), values))
}

/// `Δ_g f = (1/√det g) ∂ᵢ(√det g gⁱʲ ∂ⱼ f)`.
///
/// Interior nodes use the divergence form with fluxes at half nodes: the
/// coefficient `aⁱʲ = √det g gⁱʲ` is averaged onto the cell face and the
/// tangential derivative in the cross terms is the four-point face average.
/// On the outermost ring of nodes the expanded form
/// `gⁱʲ fᵢⱼ + (1/√det g) ∂ᵢ aⁱʲ fⱼ` is used with one-sided differences.
pub fn laplace_beltrami(f: &ScalarField2, b: &GeometryBundle) -> Result<ScalarField2> {
    f.same_grid(&b.psi)?;
    let grid = *f.grid();
    let n = grid.nodes_per_axis();
    let h = grid.spacing();
    let len = grid.len();

    let sq = b.sqrt_det_g.values();
    let gi = &b.metric_inv;
    let a11: Vec<f64> = (0..len).map(|k| sq[k] * gi.m11.values()[k]).collect();
    let a12: Vec<f64> = (0..len).map(|k| sq[k] * gi.m12.values()[k]).collect();
    let a22: Vec<f64> = (0..len).map(|k| sq[k] * gi.m22.values()[k]).collect();
    let fv = f.values();

    let mut out = vec![0.0; len];
    let s = n;
    let invh2 = 1.0 / (h * h);
    let inv4h2 = 0.25 * invh2;
    for j in 1..n - 1 {
        for i in 1..n - 1 {
            let k = grid.index(i, j);
            let ae = 0.5 * (a11[k] + a11[k + 1]);
            let aw = 0.5 * (a11[k] + a11[k - 1]);
            let an = 0.5 * (a22[k] + a22[k + s]);
            let asth = 0.5 * (a22[k] + a22[k - s]);
            let t11 = ae * (fv[k + 1] - fv[k]) - aw * (fv[k] - fv[k - 1]);
            let t22 = an * (fv[k + s] - fv[k]) - asth * (fv[k] - fv[k - s]);

            let ce = 0.5 * (a12[k] + a12[k + 1]);
            let cw = 0.5 * (a12[k] + a12[k - 1]);
            let cn = 0.5 * (a12[k] + a12[k + s]);
            let cs = 0.5 * (a12[k] + a12[k - s]);
            let fe = ce * (fv[k + s] + fv[k + 1 + s] - fv[k - s] - fv[k + 1 - s]);
            let fw = cw * (fv[k - 1 + s] + fv[k + s] - fv[k - 1 - s] - fv[k - s]);
            let gn = cn * (fv[k + 1] + fv[k + 1 + s] - fv[k - 1] - fv[k - 1 + s]);
            let gs = cs * (fv[k + 1 - s] + fv[k + 1] - fv[k - 1 - s] - fv[k - 1]);

            out[k] = ((t11 + t22) * invh2 + (fe - fw + gn - gs) * inv4h2) / sq[k];
        }
    }

    // outermost ring
    let to_field = |v: Vec<f64>| ScalarField2::from_trusted(grid, v);
    let da11 = gradient_fd(&to_field(a11));
    let da12 = gradient_fd(&to_field(a12));
    let da22 = gradient_fd(&to_field(a22));
    let df = gradient_fd(f);
    let d2f = crate::grid::hessian_fd(f);
    for k in 0..len {
        let (i, j) = grid.node(k);
        if grid.is_interior(i, j, 1) {
            continue;
        }
        let second = gi.m11.values()[k] * d2f.m11.values()[k]
            + 2.0 * gi.m12.values()[k] * d2f.m12.values()[k]
            + gi.m22.values()[k] * d2f.m22.values()[k];
        let div1 = da11.x1.values()[k] + da12.x2.values()[k];
        let div2 = da12.x1.values()[k] + da22.x2.values()[k];
        out[k] = second + (div1 * df.x1.values()[k] + div2 * df.x2.values()[k]) / sq[k];
    }
    ScalarField2::from_values(grid, out)
}

/// Mean curvature vector `H = J ∇_g ψ` of the graph, as an ambient field in
/// `ℝ² × ℝ²`, together with `|H|`.
#[derive(Debug, Clone)]
pub struct MeanCurvature {
    /// `(H_{x1}, H_{x2}, H_{y1}, H_{y2})`.
    pub ambient: [ScalarField2; 4],
    pub norm: ScalarField2,
}

/// The tangential lift of `w = g⁻¹ Dψ` is `(w, D²u w)`; `J(a, b) = (-b, a)`.
pub fn mean_curvature(b: &GeometryBundle, psi: &ScalarField2) -> Result<MeanCurvature> {
    psi.same_grid(&b.psi)?;
    let grid = *psi.grid();
    let dpsi = gradient_fd(psi);
    let len = grid.len();
    let mut comps: [Vec<f64>; 4] = Default::default();
    let mut norm = Vec::with_capacity(len);
    for k in 0..len {
        let w = b.metric_inv.at_index(k).apply(dpsi.at_index(k));
        let sw = b.hessian.at_index(k).apply(w);
        comps[0].push(-sw[0]);
        comps[1].push(-sw[1]);
        comps[2].push(w[0]);
        comps[3].push(w[1]);
        norm.push((sw[0] * sw[0] + sw[1] * sw[1] + w[0] * w[0] + w[1] * w[1]).sqrt());
    }
    let [c0, c1, c2, c3] = comps;
    Ok(MeanCurvature {
        ambient: [
            ScalarField2::from_values(grid, c0)?,
            ScalarField2::from_values(grid, c1)?,
            ScalarField2::from_values(grid, c2)?,
            ScalarField2::from_values(grid, c3)?,
        ],
        norm: ScalarField2::from_values(grid, norm)?,
    })
}
