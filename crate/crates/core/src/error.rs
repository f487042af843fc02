use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid trajectory: {0}")]
    InvalidTrajectory(String),

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("invalid noise specification: {0}")]
    InvalidNoise(String),

    #[error("invalid hyperparameters: {0}")]
    InvalidHyperparams(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("kernel matrix is ill-conditioned (condition estimate {condition:.3e}) even with jitter {max_jitter:.1e}")]
    IllConditionedKernel { condition: f64, max_jitter: f64 },

    #[error("residual covariance is degenerate (min eigenvalue {min_eigenvalue:.3e})")]
    DegenerateCovariance { min_eigenvalue: f64 },

    #[error("hyperparameter optimization failed: {0}")]
    OptimizationFailed(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("numerical blowup: drift is not finite at state {state:?}")]
    NumericalBlowup { state: Vec<f64> },

    #[error("too many failed trials: {failed} of {total}")]
    TooManyFailures { failed: usize, total: usize },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("unsupported format version {found} (expected {expected})")]
    FormatVersion { found: u32, expected: u32 },

    #[error("model file is inconsistent: stored lml {stored}, recomputed {recomputed}")]
    ModelChecksum { stored: f64, recomputed: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn dim(expected: usize, actual: usize) -> Self {
        Error::DimensionMismatch { expected, actual }
    }
}
