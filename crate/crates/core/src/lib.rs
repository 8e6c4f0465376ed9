//! Numerical laboratory for the two-dimensional Lagrangian mean curvature
//! equation `arctan λ₁ + arctan λ₂ = ψ(x)`.
//!
//! The crate is organised bottom-up:
//!
//! * [`grid`]: uniform-grid scalar fields, finite differences, disk quadrature
//!   and smooth radial cutoffs.
//! * [`geometry`]: node-wise geometry of the gradient graph `(x, Du(x))`:
//!   Hessian eigenvalues, phase, induced metric, volume element, metric
//!   gradient and Laplace–Beltrami operator, mean curvature, slope functions.
//! * [`identities`]: exact algebraic identities checked on sampled fields.
//! * [`inequalities`]: numerical checks of the maximum principle, the
//!   super-isoperimetric inequality, Jacobi inequalities, volume bounds and the
//!   interior Hessian estimate.
//! * [`solver`]: manufactured solutions and a damped Newton Dirichlet solver.
//! * [`io`]: field interchange files and graymap heatmaps.

pub mod error;
pub mod geometry;
pub mod grid;
pub mod identities;
pub mod inequalities;
pub mod io;
pub mod solver;

pub use error::{LabError, Result};
pub use geometry::{bundle, eigen_sym2, GeometryBundle, SlopeConstants, Sym2};
pub use grid::{
    build_grid, gradient_fd, hessian_fd, integrate_disk, make_cutoff, sample, sup_norm_disk,
    CutoffProfile, Grid2, ScalarField2, SymMat2Field, Vec2Field,
};
pub use identities::{IdentityReport, ToleranceClass};
pub use inequalities::{InequalityReport, Regime};
pub use solver::{
    convergence_study, linear_solve, manufacture, newton_solve, Family, ManufacturedProblem,
    NewtonConfig, Potential, SolveState,
};
