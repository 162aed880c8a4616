use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("requested {requested} basis functions but the model only resolves {available}")]
    BandLimitExceeded { requested: usize, available: usize },

    #[error("field is not band-limited on this model (reconstruction residual {residual:.3e})")]
    NotBandLimited { residual: f64 },

    #[error("eigenvalue iteration failed to converge at index {index}")]
    ConvergenceFailure { index: usize },

    #[error("mass matrix is not positive definite (pivot {pivot:.3e} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },

    #[error("spectra have mismatched truncations ({left} vs {right})")]
    MismatchedTruncation { left: usize, right: usize },

    #[error("fit window too short: {points} trusted points, need at least {required}")]
    WindowTooShort { points: usize, required: usize },

    #[error("design matrix is ill-conditioned (condition number {0:.3e})")]
    IllConditioned(f64),

    #[error("tail bound exceeds relative tolerance {tolerance:.1e} at every requested time")]
    TailTolerance { tolerance: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("quadrature did not converge: {0}")]
    QuadratureFailure(String),

    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;
