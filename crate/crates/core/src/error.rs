use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument is outside the domain of a physical formula.
    #[error("domain error: {0}")]
    Domain(String),

    /// The plant right-hand side produced a non-finite value.
    #[error("integration fault at t = {time} s: {reason}")]
    IntegrationFault {
        time: f64,
        reason: String,
        /// Full plant state (physical states followed by the sensor lag states)
        /// at the start of the failing step.
        snapshot: Vec<f64>,
    },

    /// A matrix that must be inverted is numerically singular.
    #[error("singular matrix in {context} (condition estimate {condition:e})")]
    Singular { context: String, condition: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("QP solver failure: {0}")]
    Solver(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code for the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Json(_) | Error::Dimension(_) => 2,
            _ => 3,
        }
    }
}
