use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value {0}")]
    NonFinite(f64),

    #[error("circular mean undefined: resultant length is zero")]
    UndefinedMean,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate variance estimate {0:e} (is one margin constant?)")]
    DegenerateVariance(f64),

    #[error("singular covariance matrix: {0}")]
    SingularCovariance(String),

    #[error("Poisson tail mass {tail:e} beyond truncation {truncation} exceeds {tolerance:e}")]
    Truncation { truncation: usize, tail: f64, tolerance: f64 },

    #[error("quantile search did not converge for u = {0}")]
    QuantileConvergence(f64),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("config: {0}")]
    Config(String),

    #[error("replicate {replicate}: {source}")]
    Replicate {
        replicate: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// True for failures of the numerics on otherwise valid input.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::DegenerateVariance(_)
            | Error::SingularCovariance(_)
            | Error::QuantileConvergence(_)
            | Error::UndefinedMean => true,
            Error::Replicate { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}
