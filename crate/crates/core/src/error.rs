use thiserror::Error;

use crate::sdpcore::SolverStatus;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("algebraic block D is singular (reciprocal condition {rcond:.3e})")]
    SingularAlgebraicBlock { rcond: f64 },

    #[error("Lyapunov operator is singular: spectrum of J is symmetric about the imaginary axis (reciprocal condition {rcond:.3e})")]
    DegenerateSpectrum { rcond: f64 },

    #[error("integration diverged at t = {time}")]
    IntegrationDiverged { time: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("certificate status is {0:?}, expected Optimal")]
    StatusNotOptimal(SolverStatus),

    #[error("point is not a KKT root: |G|_inf = {residual:.3e} exceeds {gate:.1e}")]
    NotAtOptimum { residual: f64, gate: f64 },

    #[error("sensitivity solve produced non-finite values")]
    DegenerateKkt,

    #[error("SDP solve failed: {0}")]
    Solver(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures of the numerics (as opposed to bad input or I/O).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::SingularAlgebraicBlock { .. }
                | Error::DegenerateSpectrum { .. }
                | Error::IntegrationDiverged { .. }
                | Error::StatusNotOptimal(_)
                | Error::NotAtOptimum { .. }
                | Error::DegenerateKkt
                | Error::Solver(_)
        )
    }
}
