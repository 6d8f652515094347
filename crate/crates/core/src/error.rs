use serde::Serialize;
use thiserror::Error;

/// Errors raised by the numerical pipeline.
#[derive(Debug, Error, Clone, PartialEq, Serialize)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("matrix is singular (smallest singular value {sigma_min:e})")]
    Singular { sigma_min: f64 },

    #[error("implicit solver did not converge after {iterations} iterations (residual {residual:e})")]
    SolverDivergence { iterations: usize, residual: f64 },

    #[error("non-finite state encountered; last good time {last_good_time}")]
    NonFinite { last_good_time: f64 },

    #[error("energy drift {drift:e} exceeds bound {bound:e}")]
    EnergyDrift { drift: f64, bound: f64 },

    #[error("windowed symplectic residual {residual:e} exceeds tolerance {tol:e}")]
    SymplecticDrift { residual: f64, tol: f64 },

    #[error("sampling failed: acceptance rate {rate:e} after {proposals} proposals; use a tighter bounding box")]
    Sampling { rate: f64, proposals: u64 },

    #[error("near-critical point: |grad H| = {grad_norm:e}")]
    NearCritical { grad_norm: f64 },

    #[error("degenerate subspace: expected dimension {expected}, found {found}")]
    Degenerate { expected: usize, found: usize },

    #[error("invalid hyperplane field: invariance residual {residual:e} (tolerance {tol:e})")]
    InvalidHyperplaneField { residual: f64, tol: f64 },

    #[error("level invariance violated: normal leakage {leakage:e} (tolerance {tol:e})")]
    LevelInvariance { leakage: f64, tol: f64 },

    #[error("frame alignment failed: {0}")]
    Alignment(String),

    #[error("system is not optical (min eigenvalue {min_eigenvalue:e})")]
    NonOptical { min_eigenvalue: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
