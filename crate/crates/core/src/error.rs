use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch for {what}: expected {expected}, got {actual}")]
    Shape {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("unsupported constellation order: {0} bits/symbol (only 2 is supported)")]
    UnsupportedOrder(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("singular frequency bin {index}: |H| = {magnitude:e}")]
    SingularBin { index: usize, magnitude: f64 },

    #[error("singular time sample {index}: |h| = {magnitude:e}")]
    SingularSample { index: usize, magnitude: f64 },

    #[error("iterative detector diverged at iteration {iteration} (norm {norm:e})")]
    Divergence { iteration: usize, norm: f64 },

    #[error("exhaustive search refused: {n} symbols exceeds the limit of {limit}")]
    OracleTooLarge { n: usize, limit: usize },

    #[error("check failed: {0}")]
    CheckFailed(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("trial {trial} (alpha {alpha}, Eb/N0 {ebn0_db} dB): {source}")]
    Trial {
        trial: u64,
        alpha: f64,
        ebn0_db: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable tag for the CLI error line.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Shape { .. } => "shape",
            Error::UnsupportedOrder(_) => "unsupported_order",
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::SingularBin { .. } => "singular_bin",
            Error::SingularSample { .. } => "singular_sample",
            Error::Divergence { .. } => "divergence",
            Error::OracleTooLarge { .. } => "oracle_too_large",
            Error::CheckFailed(_) => "check_failed",
            Error::Config(_) => "config",
            Error::Trial { .. } => "trial",
            Error::Io { .. } => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }

    pub(crate) fn shape(what: &'static str, expected: usize, actual: usize) -> Self {
        Error::Shape {
            what,
            expected,
            actual,
        }
    }
}
