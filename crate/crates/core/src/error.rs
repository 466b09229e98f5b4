use thiserror::Error;

/// Error type shared by all modules of the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("transition matrix row {row} sums to {sum}, not 1")]
    NotStochastic { row: usize, sum: f64 },

    #[error("chain is reducible; the stationary distribution is not unique")]
    ReducibleChain,

    #[error("regression rate must satisfy 0 < lambda < 1 (got {0})")]
    LambdaOutOfRange(f64),

    #[error("coupling marginals differ by {discrepancy:e} (tolerance {tolerance:e})")]
    UnequalMarginals { discrepancy: f64, tolerance: f64 },

    #[error("degenerate coupling: Var W = {0:e}")]
    DegenerateCoupling(f64),

    #[error("coupling values are not integers; the Poisson path requires integer support")]
    NonIntegerSupport,

    #[error("coupling values must be non-negative integers (found {0})")]
    NegativeSupport(i64),

    #[error("index {index} outside the tabulated range {lo}..={hi}")]
    OutOfRange { index: i64, lo: i64, hi: i64 },

    #[error("bound constant A = {supplied} is below the observed max |W' - W| = {observed}")]
    JumpBoundTooSmall { supplied: f64, observed: f64 },

    #[error("unknown model `{0}`")]
    UnknownModel(String),

    #[error("malformed configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// Stable machine-readable tag, used by the CLI error object and the FFI status codes.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidParameter { .. } => "invalid_parameter",
            Error::NotStochastic { .. } => "not_stochastic",
            Error::ReducibleChain => "reducible_chain",
            Error::LambdaOutOfRange(_) => "lambda_out_of_range",
            Error::UnequalMarginals { .. } => "unequal_marginals",
            Error::DegenerateCoupling(_) => "degenerate_coupling",
            Error::NonIntegerSupport => "non_integer_support",
            Error::NegativeSupport(_) => "negative_support",
            Error::OutOfRange { .. } => "out_of_range",
            Error::JumpBoundTooSmall { .. } => "jump_bound_too_small",
            Error::UnknownModel(_) => "unknown_model",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
