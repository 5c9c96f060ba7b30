use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: expected cells {expected:?}, found {found:?}")]
    GridMismatch {
        expected: Vec<usize>,
        found: Vec<usize>,
    },

    #[error("field has {found} values but grid has {expected} cells")]
    LengthMismatch { expected: usize, found: usize },

    #[error("non-finite value at cell {index}")]
    NonFinite { index: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid constraints: kappa={kappa}, m0={m0} (need 0 < m0 < kappa)")]
    InvalidConstraints { kappa: f64, m0: f64 },

    #[error("resource field not admissible: {0}")]
    NotAdmissible(String),

    #[error("singular shifted operator (pivot {pivot:e} at row {row})")]
    SingularSystem { row: usize, pivot: f64 },

    #[error("linear solve residual {residual:e} exceeds tolerance {tolerance:e}")]
    InaccurateSolve { residual: f64, tolerance: f64 },

    #[error("Newton did not converge in {iterations} iterations (residual history {history:?})")]
    NewtonNotConverged { iterations: usize, history: Vec<f64> },

    #[error("Newton lost positivity at minimal damping after {iterations} iterations")]
    PositivityLoss { iterations: usize },

    #[error("time step {dt} exceeds reaction stability bound {bound}")]
    TimeStepTooLarge { dt: f64, bound: f64 },

    #[error("negative density {value:e} at cell {index} after step {step}")]
    NegativeDensity { step: usize, index: usize, value: f64 },

    #[error("dimension {found} not supported here (expected {expected})")]
    Dimension { expected: usize, found: usize },

    #[error("serialization: {0}")]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
