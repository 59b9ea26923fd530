use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("parameter shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("non-finite state produced by {0}")]
    NonFiniteState(&'static str),

    #[error("non-finite target at pair {pair}")]
    NonFiniteTarget { pair: usize },

    #[error("non-finite gradient")]
    NonFiniteGradient,

    #[error("training diverged at iteration {iteration}, pair {pair}")]
    Diverged { iteration: usize, pair: usize },

    #[error("trajectory left finite range at step {step}")]
    TrajectoryBlowUp { step: usize },

    #[error("unknown system identifier `{0}`")]
    UnknownSystem(String),

    #[error("unknown scheme identifier `{0}`")]
    UnknownScheme(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Stable short name used in machine-readable error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "invalid_argument",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::ShapeMismatch(_) => "shape_mismatch",
            Error::NonFiniteState(_) => "non_finite_state",
            Error::NonFiniteTarget { .. } => "non_finite_target",
            Error::NonFiniteGradient => "non_finite_gradient",
            Error::Diverged { .. } => "diverged",
            Error::TrajectoryBlowUp { .. } => "trajectory_blow_up",
            Error::UnknownSystem(_) => "unknown_system",
            Error::UnknownScheme(_) => "unknown_scheme",
            Error::Parse(_) => "parse",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
