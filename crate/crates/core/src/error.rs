use thiserror::Error;

use crate::pharmonic::SolveReport;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied parameter is out of range or inconsistent.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// A geometric precondition failed (ball outside the domain, mask too
    /// thin, incompatible grids, ...).
    #[error("domain violation: {0}")]
    Domain(String),

    /// The on-disk field format is malformed.
    #[error("field format: {0}")]
    Format(String),

    /// The operation is not defined for this grid dimension or topology.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// An iterative solver ran out of iterations. The partial report is
    /// attached so callers can inspect the trace.
    #[error("solver did not converge after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        report: Box<SolveReport>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
