use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("matrix is not Hermitian (max asymmetry {defect:.3e})")]
    NotHermitian { defect: f64 },

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("spectrum has degenerate {what}; the population rate equation requires a nondegenerate spectrum")]
    DegenerateSpectrum { what: &'static str },

    #[error("fixed point of the cycle map is not unique ({count} eigenvalues with modulus within 1e-10 of 1)")]
    NonUniqueSteadyState { count: usize },

    #[error("linear algebra failure: {0}")]
    Numerical(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { field: field.into(), reason: reason.into() }
    }

    /// Short machine-readable tag used in the CLI's error JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidParameter { .. } => "invalid_parameter",
            Error::NotHermitian { .. } => "not_hermitian",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::DegenerateSpectrum { .. } => "degenerate_spectrum",
            Error::NonUniqueSteadyState { .. } => "non_unique_steady_state",
            Error::Numerical(_) => "numerical",
            Error::Config(_) => "config",
            Error::Io { .. } => "io",
        }
    }
}
