use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("malformed circuit stream at byte {offset}: {reason}")]
    Format { offset: usize, reason: String },

    #[error("unsupported circuit format version {found} (expected {expected})")]
    UnsupportedVersion { found: u8, expected: u8 },

    #[error("system of {requested} qubits exceeds the statevector cap of {cap}")]
    Capacity { requested: usize, cap: usize },

    #[error("numerical integrity violated: {0}")]
    Numerical(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("collapse loss is singular: {0}")]
    SingularLoss(String),

    #[error("parameter outside its domain: {0}")]
    Domain(String),

    #[error("fit failed after {iterations} iterations (best loss {best_loss:.6e}): {reason}")]
    FitFailure {
        iterations: usize,
        best_loss: f64,
        reason: String,
    },

    #[error("estimation failed: {0}")]
    Estimation(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub(crate) fn param_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Parameter(msg.into()))
}
