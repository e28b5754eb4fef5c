use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain spec: {field}: {message}")]
    InvalidSpec { field: String, message: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty or origin-missing domain")]
    EmptyDomain,

    #[error("eigensolver did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("invalid Perron vector: {0}")]
    InvalidPerronVector(String),

    #[error("degenerate domain: {0}")]
    DegenerateDomain(String),

    #[error("tilt exceeds principal eigenvalue budget (s * lambda = {product})")]
    TiltExceedsBudget { product: f64 },

    #[error("singular or ill-conditioned system: {0}")]
    Singular(String),

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("overflow in rescaled iteration at step {step}")]
    Overflow { step: usize },

    #[error("empty bulk for eta = {eta}")]
    EmptyBulk { eta: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn spec(field: &str, message: impl Into<String>) -> Self {
        Error::InvalidSpec {
            field: field.to_string(),
            message: message.into(),
        }
    }

    /// True for failures of a numerical procedure, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonConvergence { .. }
                | Error::TiltExceedsBudget { .. }
                | Error::Singular(_)
                | Error::Overflow { .. }
        )
    }
}
