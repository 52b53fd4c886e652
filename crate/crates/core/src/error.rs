use thiserror::Error;

/// Errors raised by the estimation and detection pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("transition matrix is not stable (spectral radius {spectral_radius:.6} >= 1)")]
    Unstable { spectral_radius: f64 },

    #[error("innovation covariance is not positive definite at time index {index}")]
    Conditioning { index: usize },

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("modal degeneracy: {0}")]
    ModalDegeneracy(String),

    #[error("frequencies {lower:.6} and {upper:.6} are closer than the minimum gap {delta_min:.6}")]
    NearCollision {
        lower: f64,
        upper: f64,
        delta_min: f64,
    },

    #[error("initialization failed: {0}")]
    Initialization(String),

    #[error("estimation failed after {restarts} restarts")]
    EstimationFailed {
        restarts: usize,
        best: Option<Box<crate::estimator::WindowEstimate>>,
    },

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("degenerate baseline: loss standard deviation is zero")]
    DegenerateBaseline,

    #[error("evaluation error: {0}")]
    Evaluation(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
