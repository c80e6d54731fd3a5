use thiserror::Error;

/// Errors surfaced by the estimation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// Input matrix is not Hermitian within the accepted tolerance.
    #[error("matrix is not Hermitian: max asymmetry {max_asymmetry:.3e} exceeds {tol:.3e} (relative)")]
    NotHermitian { max_asymmetry: f64, tol: f64 },

    /// A quantity that must be positive semidefinite failed the check.
    #[error("PSD violation: {0}")]
    PsdViolation(String),

    /// Argument outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Dimension mismatch between operands.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// Rank-enforcing reflection sampling ran out of retries.
    #[error("design matrix rank deficient: attained rank {attained} < target {target} after retry budget")]
    RankDeficient { attained: usize, target: usize },

    /// Eigen iteration did not converge within the iteration budget.
    #[error("eigen iteration did not converge: residual {residual:.3e} after {iters} iterations")]
    EigenNoConvergence { residual: f64, iters: usize },

    /// Conic subproblem could not be solved to tolerance.
    #[error("conic solve failed ({status}): primal {primal:.3e}, dual {dual:.3e}, gap {gap:.3e}")]
    SolverFailure {
        status: String,
        primal: f64,
        dual: f64,
        gap: f64,
    },

    /// Linear system too ill-conditioned to trust.
    #[error("ill-conditioned system: {0}")]
    IllConditioned(String),

    /// Estimator failed inside an iteration.
    #[error("estimator failed at iteration {iteration}: {source}")]
    Estimation {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    /// Experiment plan rejected before execution.
    #[error("invalid experiment plan: {0}")]
    InvalidPlan(String),

    /// File I/O with path context.
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// Parsing of a serialized artifact failed.
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
