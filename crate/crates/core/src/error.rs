use thiserror::Error;

/// Errors produced by the discovery toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported Bessel order {0}: only integer and half-integer orders are implemented")]
    UnsupportedOrder(f64),

    #[error("unsupported smoothness: {0}")]
    UnsupportedSmoothness(String),

    #[error("node generation failed: {0}")]
    GenerationFailure(String),

    #[error("implicit gradient vanishes at node {index} (|grad F| = {norm:e})")]
    SingularGradient { index: usize, norm: f64 },

    #[error("ill-conditioned neighborhood around node {index}")]
    IllConditionedNeighborhood { index: usize },

    #[error("ill-conditioned system: condition estimate {condition_estimate:e}, jitter {jitter:e}")]
    IllConditioned { condition_estimate: f64, jitter: f64 },

    #[error("non-finite result: {0}")]
    NonFinite(String),

    #[error("non-finite feature value at row {row}, channel {channel}")]
    NonFiniteFeature { row: usize, channel: String },

    #[error("oracle scale exceeded: n = {n} > {max}")]
    OracleScaleExceeded { n: usize, max: usize },

    #[error("exact fit: residual vanished; use mu = 0 least squares instead")]
    ExactFit,

    #[error("empty model: {0}")]
    EmptyModel(String),

    #[error("insufficient snapshots: need at least 3 time levels (M >= 2), got M = {0}")]
    InsufficientSnapshots(usize),

    #[error("Newton iteration did not converge in {iterations} steps (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("solution blew up at step {0}")]
    BlowUp(usize),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
