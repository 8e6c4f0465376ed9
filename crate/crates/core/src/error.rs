use thiserror::Error;

pub type Result<T, E = LabError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("grid needs at least {min} nodes per axis, got {got}")]
    TooFewNodes { min: usize, got: usize },

    #[error("grid half width must be positive and finite, got {0}")]
    BadHalfWidth(f64),

    #[error("non-finite value {value} at node ({i}, {j})")]
    NonFinite { i: usize, j: usize, value: f64 },

    #[error("field has {got} values, grid expects {expected}")]
    WrongLength { expected: usize, got: usize },

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("radius {radius} exceeds grid half width {half_width}")]
    RadiusOutsideGrid { radius: f64, half_width: f64 },

    #[error("invalid cutoff radii: need 0 < r1 < r2 <= L, got r1={inner}, r2={outer}, L={half_width}")]
    BadCutoff { inner: f64, outer: f64, half_width: f64 },

    #[error("non-finite matrix entry")]
    NonFiniteMatrix,

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("phase outside the admissible range: {0}")]
    PhaseOutOfRange(String),

    #[error("regime mismatch: {0}")]
    RegimeMismatch(String),

    #[error("every candidate node was excluded ({excluded} by the eigengap filter)")]
    AllNodesExcluded { excluded: usize },

    #[error("linearization lost ellipticity at node ({i}, {j})")]
    LostEllipticity { i: usize, j: usize },

    #[error("linear solver {method} failed after {iterations} iterations: {reason}")]
    LinearSolve {
        method: &'static str,
        iterations: usize,
        reason: String,
    },

    #[error("Newton solve did not converge on level n={n}")]
    NotConverged { n: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
