//! Manufactured solutions and the Dirichlet solver.

mod convergence;
pub mod linear;
mod manufactured;
mod newton;
mod potential;

pub use convergence::{convergence_study, ConvergenceStudy, LevelResult, ROUNDOFF_FLOOR};
pub use linear::{linear_solve, CsrMatrix, LinearMethod, LinearSolveConfig, LinearSolveOutcome};
pub use manufactured::{manufacture, BoundaryTrace, ManufacturedProblem};
pub use newton::{certify_residual, initial_iterate, newton_solve, newton_solve_from, NewtonConfig, SolveState};
pub use potential::{AffineShifted, Family, Negated, Potential, Rescaled};
