use thiserror::Error;

/// Errors raised by the numerical routines of this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {found}")]
    Dimension {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("{context}: matrix must be square, got {rows}x{cols}")]
    NotSquare {
        context: &'static str,
        rows: usize,
        cols: usize,
    },

    #[error("{context}: size {n} exceeds the supported maximum {max}")]
    UnsupportedSize {
        context: &'static str,
        n: usize,
        max: usize,
    },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    /// A documented precondition on the inputs does not hold.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("no critical point: A x + b = 0 is inconsistent (residual {residual:.3e})")]
    NoCriticalPoint { residual: f64 },

    #[error("steering infeasible: Kalman rank {rank} < state dimension {n}")]
    SteeringInfeasible { rank: usize, n: usize },

    #[error("ill-conditioned Gramian (condition estimate {condition:.3e})")]
    IllConditionedGramian { condition: f64 },

    #[error("time {t} outside [{t0}, {t1}]")]
    TimeOutOfRange { t: f64, t0: f64, t1: f64 },

    #[error("control schedule exhausted at iteration {iter} (length {len})")]
    ScheduleExhausted { iter: usize, len: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(context: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::Dimension {
            context,
            expected,
            found,
        })
    }
}
