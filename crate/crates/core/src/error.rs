use thiserror::Error;

use crate::bifurcation::Branch;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("grid of {grid_size} points cannot resolve {n_modes} modes (need M >= 4N)")]
    GridTooCoarse { grid_size: usize, n_modes: usize },

    #[error("sup|u| = {sup:.3e} exceeds the exponential guard {limit}")]
    Range { sup: f64, limit: f64 },

    #[error("lambda = {lambda} lies within {band:.0e} of the bifurcation value lambda_{mode} = {lambda_n}")]
    NearBifurcation {
        lambda: f64,
        mode: usize,
        lambda_n: f64,
        band: f64,
    },

    #[error("zero is not regular: smallest singular value {sigma_min:.3e} against scale {scale:.3e}")]
    NonRegularZero { sigma_min: f64, scale: f64 },

    #[error("zero with sup norm {sup_norm} lies on the boundary of the ball of radius {radius}")]
    BoundaryZero { sup_norm: f64, radius: f64 },

    #[error("homotopy is not admissible at t = {t}: {source}")]
    HomotopyInadmissible {
        t: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("continuation step failed near lambda = {lambda} after {samples} samples")]
    StepFailure {
        lambda: f64,
        samples: usize,
        partial: Box<Branch>,
    },

    #[error("singular linear system")]
    Singular,

    #[error("cross-check failed: {0}")]
    CrossCheck(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Refusals that come from the mathematics (guards, non-regular
    /// zeros, inadmissible homotopies), as opposed to configuration or I/O.
    pub fn is_mathematical_refusal(&self) -> bool {
        matches!(
            self,
            Error::NearBifurcation { .. }
                | Error::NonRegularZero { .. }
                | Error::BoundaryZero { .. }
                | Error::HomotopyInadmissible { .. }
                | Error::StepFailure { .. }
                | Error::Range { .. }
                | Error::InvalidKernel(_)
                | Error::CrossCheck(_)
        )
    }
}
