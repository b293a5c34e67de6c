use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("invalid site {site} for geometry with {n_channel} channel sites")]
    InvalidSite { site: String, n_channel: usize },

    #[error("state is not normalized (norm or trace = {0})")]
    NotNormalized(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("problem too large: {0}")]
    TooLarge(String),

    #[error("two-qubit state is not of X form (largest forbidden element {0:.3e})")]
    NonXStructure(f64),

    #[error("state is not Bell diagonal (largest Bell off-diagonal {0:.3e})")]
    NotBellDiagonal(f64),

    #[error("Kraus set is not trace preserving (deviation {0:.3e})")]
    NotTracePreserving(f64),

    #[error("state is not positive semidefinite (min eigenvalue {0:.3e})")]
    NotPositive(f64),

    #[error("{0}")]
    Convergence(String),

    #[error("state is not distillable (singlet weight {0})")]
    Undistillable(f64),

    #[error("no entanglement peak found up to t = {t_max} (max concurrence seen {max_seen:.3e})")]
    NoPeak { t_max: f64, max_seen: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for errors caused by user input rather than numerics.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::InvalidGeometry(_)
                | Error::InvalidParameter(_)
                | Error::InvalidSite { .. }
                | Error::TooLarge(_)
        )
    }
}
