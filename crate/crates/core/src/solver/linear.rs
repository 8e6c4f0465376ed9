//! Sparse linear solves for the Newton corrections.
//!
//! Small systems go through a banded LU with partial pivoting. Larger ones use
//! BiCGSTAB right-preconditioned with ILU(0).

use serde::Serialize;

use crate::error::{LabError, Result};

/// Compressed sparse rows with sorted column indices in every row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    pub fn identity(dim: usize) -> Self {
        Self {
            dim,
            row_ptr: (0..=dim).collect(),
            cols: (0..dim).collect(),
            vals: vec![1.0; dim],
        }
    }

    /// Builds a square matrix from rows of `(column, value)` entries.
    /// Entries within a row are sorted and duplicates summed.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        let dim = rows.len();
        let mut row_ptr = Vec::with_capacity(dim + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|e| e.0);
            for (c, v) in row {
                if c >= dim {
                    return Err(LabError::Precondition(format!(
                        "column {c} out of range for dimension {dim}"
                    )));
                }
                if !v.is_finite() {
                    return Err(LabError::NonFiniteMatrix);
                }
                if cols.len() > *row_ptr.last().unwrap() && *cols.last().unwrap() == c {
                    *vals.last_mut().unwrap() += v;
                } else {
                    cols.push(c);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        Ok(Self {
            dim,
            row_ptr,
            cols,
            vals,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    fn row(&self, i: usize) -> std::ops::Range<usize> {
        self.row_ptr[i]..self.row_ptr[i + 1]
    }

    /// `y = A x`.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate().take(self.dim) {
            *yi = self
                .row(i)
                .map(|p| self.vals[p] * x[self.cols[p]])
                .sum();
        }
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim];
        self.apply(x, &mut y);
        y
    }

    /// Lower and upper bandwidths.
    pub fn bandwidths(&self) -> (usize, usize) {
        let mut kl = 0;
        let mut ku = 0;
        for i in 0..self.dim {
            for p in self.row(i) {
                let c = self.cols[p];
                if c < i {
                    kl = kl.max(i - c);
                } else {
                    ku = ku.max(c - i);
                }
            }
        }
        (kl, ku)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LinearMethod {
    /// Banded LU up to `direct_max_dim` unknowns, Krylov above.
    Auto,
    BandedLu,
    BiCgStab,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct LinearSolveConfig {
    /// Relative residual target `‖b - Ax‖ ≤ tol ‖b‖`.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub direct_max_dim: usize,
    pub method: LinearMethod,
}

impl Default for LinearSolveConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-12,
            max_iterations: 20_000,
            direct_max_dim: 4096,
            method: LinearMethod::Auto,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LinearSolveOutcome {
    pub solution: Vec<f64>,
    pub iterations: usize,
    pub relative_residual: f64,
    pub method: LinearMethod,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn relative_residual(a: &CsrMatrix, x: &[f64], b: &[f64]) -> f64 {
    let ax = a.mul(x);
    let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let nb = norm(b);
    if nb == 0.0 {
        norm(&r)
    } else {
        norm(&r) / nb
    }
}

/// Relative residual accepted when the requested tolerance is below what
/// round-off allows on a given system.
pub const ROUNDOFF_ACCEPT: f64 = 1e-10;

/// Solves `A x = b` to the configured relative residual, or to
/// [`ROUNDOFF_ACCEPT`] when the iteration stalls above it.
pub fn linear_solve(a: &CsrMatrix, rhs: &[f64], config: &LinearSolveConfig) -> Result<LinearSolveOutcome> {
    if rhs.len() != a.dim() {
        return Err(LabError::WrongLength {
            expected: a.dim(),
            got: rhs.len(),
        });
    }
    if norm(rhs) == 0.0 {
        return Ok(LinearSolveOutcome {
            solution: vec![0.0; a.dim()],
            iterations: 0,
            relative_residual: 0.0,
            method: LinearMethod::BandedLu,
        });
    }
    let method = match config.method {
        LinearMethod::Auto if a.dim() <= config.direct_max_dim => LinearMethod::BandedLu,
        LinearMethod::Auto => LinearMethod::BiCgStab,
        m => m,
    };
    match method {
        LinearMethod::BandedLu => {
            let lu = BandedLu::factor(a)?;
            let solution = lu.solve(rhs);
            let rel = relative_residual(a, &solution, rhs);
            if rel > config.tolerance && rel > ROUNDOFF_ACCEPT {
                return Err(LabError::LinearSolve {
                    method: "banded LU",
                    iterations: 0,
                    reason: format!("relative residual {rel:.3e} after factorization"),
                });
            }
            Ok(LinearSolveOutcome {
                solution,
                iterations: 0,
                relative_residual: rel,
                method,
            })
        }
        _ => {
            let ilu = Ilu0::factor(a)?;
            bicgstab(a, &ilu, rhs, config)
        }
    }
}

/// LU with partial pivoting in LAPACK band storage: `A(i, j)` lives at
/// `ab[(kl + ku + i - j) + j * ld]`, with `kl` extra rows for pivot fill-in.
struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    ld: usize,
    ab: Vec<f64>,
    pivots: Vec<usize>,
}

impl BandedLu {
    fn factor(a: &CsrMatrix) -> Result<Self> {
        let n = a.dim();
        let (kl, ku) = a.bandwidths();
        let ld = 2 * kl + ku + 1;
        let mut lu = Self {
            n,
            kl,
            ku,
            ld,
            ab: vec![0.0; ld * n],
            pivots: vec![0; n],
        };
        for i in 0..n {
            for p in a.row(i) {
                let j = a.cols[p];
                *lu.at(i, j) = a.vals[p];
            }
        }
        let upper = kl + ku;
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let mut piv = k;
            let mut best = lu.get(k, k).abs();
            for i in k + 1..=last {
                let v = lu.get(i, k).abs();
                if v > best {
                    best = v;
                    piv = i;
                }
            }
            if best == 0.0 {
                return Err(LabError::LinearSolve {
                    method: "banded LU",
                    iterations: k,
                    reason: "singular matrix".into(),
                });
            }
            lu.pivots[k] = piv;
            let jmax = (k + upper).min(n - 1);
            if piv != k {
                for j in k..=jmax {
                    let t = lu.get(k, j);
                    *lu.at(k, j) = lu.get(piv, j);
                    *lu.at(piv, j) = t;
                }
            }
            let pivot = lu.get(k, k);
            for i in k + 1..=last {
                let l = lu.get(i, k) / pivot;
                *lu.at(i, k) = l;
                if l != 0.0 {
                    for j in k + 1..=jmax {
                        let ukj = lu.get(k, j);
                        *lu.at(i, j) -= l * ukj;
                    }
                }
            }
        }
        Ok(lu)
    }

    #[inline]
    fn at(&mut self, i: usize, j: usize) -> &mut f64 {
        &mut self.ab[(self.kl + self.ku + i - j) + j * self.ld]
    }

    #[inline]
    fn get(&self, i: usize, j: usize) -> f64 {
        self.ab[(self.kl + self.ku + i - j) + j * self.ld]
    }

    fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x = rhs.to_vec();
        for k in 0..n {
            x.swap(k, self.pivots[k]);
            let xk = x[k];
            for i in k + 1..=(k + self.kl).min(n - 1) {
                x[i] -= self.get(i, k) * xk;
            }
        }
        let upper = self.kl + self.ku;
        for k in (0..n).rev() {
            let mut s = x[k];
            for j in k + 1..=(k + upper).min(n - 1) {
                s -= self.get(k, j) * x[j];
            }
            x[k] = s / self.get(k, k);
        }
        x
    }
}

/// Incomplete LU with the sparsity of `A`; unit lower factor implicit.
struct Ilu0 {
    m: CsrMatrix,
    diag: Vec<usize>,
}

impl Ilu0 {
    fn factor(a: &CsrMatrix) -> Result<Self> {
        let mut m = a.clone();
        let n = m.dim;
        let mut diag = vec![usize::MAX; n];
        for (i, d) in diag.iter_mut().enumerate() {
            if let Some(p) = m.row(i).find(|&p| m.cols[p] == i) {
                *d = p;
            } else {
                return Err(LabError::LinearSolve {
                    method: "ILU(0)",
                    iterations: 0,
                    reason: format!("missing diagonal in row {i}"),
                });
            }
        }
        let mut slot = vec![usize::MAX; n];
        for i in 0..n {
            for p in m.row(i) {
                slot[m.cols[p]] = p;
            }
            for p in m.row_ptr[i]..diag[i] {
                let k = m.cols[p];
                let pivot = m.vals[diag[k]];
                if pivot == 0.0 {
                    return Err(LabError::LinearSolve {
                        method: "ILU(0)",
                        iterations: 0,
                        reason: format!("zero pivot in row {k}"),
                    });
                }
                let l = m.vals[p] / pivot;
                m.vals[p] = l;
                for q in diag[k] + 1..m.row_ptr[k + 1] {
                    let s = slot[m.cols[q]];
                    if s != usize::MAX {
                        m.vals[s] -= l * m.vals[q];
                    }
                }
            }
            for p in m.row(i) {
                slot[m.cols[p]] = usize::MAX;
            }
        }
        Ok(Self { m, diag })
    }

    /// `z = (LU)⁻¹ r`.
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        let m = &self.m;
        for i in 0..m.dim {
            let mut s = r[i];
            for p in m.row_ptr[i]..self.diag[i] {
                s -= m.vals[p] * z[m.cols[p]];
            }
            z[i] = s;
        }
        for i in (0..m.dim).rev() {
            let mut s = z[i];
            for p in self.diag[i] + 1..m.row_ptr[i + 1] {
                s -= m.vals[p] * z[m.cols[p]];
            }
            z[i] = s / m.vals[self.diag[i]];
        }
    }
}

fn bicgstab(a: &CsrMatrix, pre: &Ilu0, b: &[f64], config: &LinearSolveConfig) -> Result<LinearSolveOutcome> {
    let n = a.dim();
    let nb = norm(b);
    let target = config.tolerance * nb;
    let mut x = vec![0.0; n];
    let mut iterations = 0;
    let mut last_rel = f64::INFINITY;
    // restart a few times if the recursively updated residual drifts away
    // from the true one
    for _restart in 0..5 {
        let ax = a.mul(&x);
        let mut r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        if norm(&r) <= target {
            break;
        }
        let r_hat = r.clone();
        let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
        let mut v = vec![0.0; n];
        let mut p = vec![0.0; n];
        let mut p_hat = vec![0.0; n];
        let mut s_hat = vec![0.0; n];
        let mut s = vec![0.0; n];
        let mut t = vec![0.0; n];
        loop {
            if iterations >= config.max_iterations {
                return Err(LabError::LinearSolve {
                    method: "BiCGSTAB",
                    iterations,
                    reason: format!(
                        "stagnated at relative residual {:.3e}",
                        norm(&r) / nb
                    ),
                });
            }
            iterations += 1;
            let rho_new = dot(&r_hat, &r);
            if rho_new.abs() < 1e-300 || omega == 0.0 {
                break;
            }
            let beta = (rho_new / rho) * (alpha / omega);
            rho = rho_new;
            for i in 0..n {
                p[i] = r[i] + beta * (p[i] - omega * v[i]);
            }
            pre.apply(&p, &mut p_hat);
            a.apply(&p_hat, &mut v);
            let denom = dot(&r_hat, &v);
            if denom == 0.0 {
                break;
            }
            alpha = rho / denom;
            for i in 0..n {
                s[i] = r[i] - alpha * v[i];
            }
            if norm(&s) <= target {
                for i in 0..n {
                    x[i] += alpha * p_hat[i];
                }
                break;
            }
            pre.apply(&s, &mut s_hat);
            a.apply(&s_hat, &mut t);
            let tt = dot(&t, &t);
            omega = if tt == 0.0 { 0.0 } else { dot(&t, &s) / tt };
            for i in 0..n {
                x[i] += alpha * p_hat[i] + omega * s_hat[i];
                r[i] = s[i] - omega * t[i];
            }
            if norm(&r) <= target {
                break;
            }
        }
        let rel = relative_residual(a, &x, b);
        // a restart that does not halve the true residual has hit round-off
        if rel <= config.tolerance || rel > 0.5 * last_rel {
            break;
        }
        last_rel = rel;
    }
    let rel = relative_residual(a, &x, b);
    if rel > config.tolerance && rel > ROUNDOFF_ACCEPT {
        return Err(LabError::LinearSolve {
            method: "BiCGSTAB",
            iterations,
            reason: format!("breakdown at relative residual {rel:.3e}"),
        });
    }
    Ok(LinearSolveOutcome {
        solution: x,
        iterations,
        relative_residual: rel,
        method: LinearMethod::BiCgStab,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// 5-point Laplacian on an m×m interior grid with spacing h, Dirichlet
    /// data folded into the right-hand side.
    fn laplacian(m: usize, h: f64) -> CsrMatrix {
        let idx = |i: usize, j: usize| j * m + i;
        let mut rows = Vec::new();
        for j in 0..m {
            for i in 0..m {
                let mut row = vec![(idx(i, j), -4.0 / (h * h))];
                if i > 0 {
                    row.push((idx(i - 1, j), 1.0 / (h * h)));
                }
                if i + 1 < m {
                    row.push((idx(i + 1, j), 1.0 / (h * h)));
                }
                if j > 0 {
                    row.push((idx(i, j - 1), 1.0 / (h * h)));
                }
                if j + 1 < m {
                    row.push((idx(i, j + 1), 1.0 / (h * h)));
                }
                rows.push(row);
            }
        }
        CsrMatrix::from_rows(rows).unwrap()
    }

    fn quadratic_problem(m: usize) -> (CsrMatrix, Vec<f64>, Vec<f64>) {
        // u = x² + 2y² on [0, 1]², Δu = 6
        let h = 1.0 / (m + 1) as f64;
        let u = |i: isize, j: isize| {
            let (x, y) = (i as f64 * h, j as f64 * h);
            x * x + 2.0 * y * y
        };
        let mut rhs = Vec::new();
        let mut exact = Vec::new();
        for j in 1..=m as isize {
            for i in 1..=m as isize {
                let mut r = 6.0;
                for (di, dj) in [(-1, 0), (1, 0), (0, -1), (0, 1)] {
                    let (a, b) = (i + di, j + dj);
                    if a == 0 || b == 0 || a == m as isize + 1 || b == m as isize + 1 {
                        r -= u(a, b) / (h * h);
                    }
                }
                rhs.push(r);
                exact.push(u(i, j));
            }
        }
        (laplacian(m, h), rhs, exact)
    }

    #[test]
    fn identity_returns_rhs() {
        let a = CsrMatrix::identity(7);
        let r: Vec<f64> = (0..7).map(|i| i as f64 - 2.5).collect();
        for method in [LinearMethod::BandedLu, LinearMethod::BiCgStab] {
            let cfg = LinearSolveConfig {
                method,
                ..Default::default()
            };
            let out = linear_solve(&a, &r, &cfg).unwrap();
            assert_eq!(out.solution, r);
        }
    }

    #[test]
    fn laplacian_recovers_quadratic() {
        let (a, rhs, exact) = quadratic_problem(30);
        for method in [LinearMethod::BandedLu, LinearMethod::BiCgStab] {
            let cfg = LinearSolveConfig {
                method,
                ..Default::default()
            };
            let out = linear_solve(&a, &rhs, &cfg).unwrap();
            assert!(out.relative_residual <= 1e-12);
            let err = out
                .solution
                .iter()
                .zip(&exact)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(err < 1e-9, "{method:?}: {err}");
        }
    }

    #[test]
    fn banded_lu_pivots() {
        // zero leading diagonal forces a row swap
        let a = CsrMatrix::from_rows(vec![
            vec![(0, 0.0), (1, 2.0)],
            vec![(0, 3.0), (1, 1.0), (2, 1.0)],
            vec![(1, 1.0), (2, 4.0)],
        ])
        .unwrap();
        let x = vec![1.0, -2.0, 0.5];
        let b = a.mul(&x);
        let cfg = LinearSolveConfig {
            method: LinearMethod::BandedLu,
            ..Default::default()
        };
        let out = linear_solve(&a, &b, &cfg).unwrap();
        for (u, v) in out.solution.iter().zip(&x) {
            assert!((u - v).abs() < 1e-14);
        }
    }

    #[test]
    fn nonsymmetric_krylov_matches_direct() {
        let m = 40;
        let idx = |i: usize, j: usize| j * m + i;
        let mut rows = Vec::new();
        for j in 0..m {
            for i in 0..m {
                let w = 1.0 + 0.3 * ((i * 7 + j * 3) % 5) as f64;
                let mut row = vec![(idx(i, j), -4.0 * w)];
                for (di, dj, c) in [(-1i32, 0i32, 1.2), (1, 0, 0.8), (0, -1, 1.1), (0, 1, 0.9)] {
                    let (a, b) = (i as i32 + di, j as i32 + dj);
                    if a >= 0 && b >= 0 && (a as usize) < m && (b as usize) < m {
                        row.push((idx(a as usize, b as usize), c * w));
                    }
                }
                rows.push(row);
            }
        }
        let a = CsrMatrix::from_rows(rows).unwrap();
        let b: Vec<f64> = (0..m * m).map(|k| ((k * 13) % 17) as f64 - 8.0).collect();
        let direct = linear_solve(&a, &b, &LinearSolveConfig { method: LinearMethod::BandedLu, ..Default::default() })
            .unwrap();
        let krylov = linear_solve(&a, &b, &LinearSolveConfig { method: LinearMethod::BiCgStab, ..Default::default() })
            .unwrap();
        assert!(krylov.iterations > 0);
        let diff = direct
            .solution
            .iter()
            .zip(&krylov.solution)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(diff < 1e-9, "{diff}");
    }

    #[test]
    fn length_mismatch_is_rejected() {
        let a = CsrMatrix::identity(3);
        assert!(matches!(
            linear_solve(&a, &[1.0, 2.0], &LinearSolveConfig::default()),
            Err(LabError::WrongLength { .. })
        ));
    }
}
