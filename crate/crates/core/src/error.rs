use thiserror::Error;

/// Errors raised by the geometry, cone, gauge and metric operations.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("degenerate plane: q-Gram determinant {0:e} is not certifiably positive")]
    DegeneratePlane(f64),

    #[error("invariant violated: {0}")]
    InvariantViolated(String),

    #[error("mismatched base points")]
    BaseMismatch,

    #[error("empty cone fiber")]
    EmptyConeFiber,

    #[error("vector not in span (residual {0:e})")]
    NotInSpan(f64),

    #[error("gauge unconverged: {coarse} at base sampling vs {fine} at doubled sampling")]
    Unconverged { coarse: f64, fine: f64 },

    #[error("flow left the domain near t = {exit_time}: {reason}")]
    DomainExit { exit_time: f64, reason: String },

    #[error("Chow condition violated at p")]
    ChowViolated,

    #[error("local connection failed: residual {residual:e} after {iterations} iterations")]
    ConnectFailed { residual: f64, iterations: usize },

    #[error("gap {gap:e} exceeds the local reach {reach:e}")]
    GapTooLarge { gap: f64, reach: f64 },

    #[error("no sphere chain of length at most {0}")]
    ChainTooLong(usize),

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
