use thiserror::Error;

/// Errors raised anywhere in the simulator.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SptError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid representation: {0}")]
    InvalidRepresentation(String),

    #[error("index {index} out of range for {len} {what}")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        len: usize,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("operator is not a projector (deviation {0:.3e})")]
    NotAProjector(f64),

    #[error("outcome has zero probability ({0:.3e})")]
    ZeroProbabilityOutcome(f64),

    #[error("operator is not unitarizable: smallest singular value {0:.3e}")]
    NotUnitarizable(f64),

    #[error("no localization within the requested window: {0}")]
    LocalizationInfeasible(String),

    #[error("chain too short: {0}")]
    ChainTooShort(String),

    #[error("amplitude budget exceeded: {needed} amplitudes > {budget}")]
    BudgetExceeded { needed: usize, budget: usize },

    #[error("operator supports overlap on sites {0:?}")]
    OverlappingSupports(Vec<usize>),

    #[error("invalid endpoints: {0}")]
    InvalidEndpoints(String),

    #[error("operation not supported by the {backend} backend: {what}")]
    Unsupported { backend: &'static str, what: String },

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("numerical assertion failed: {0}")]
    Assertion(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<SptError>,
    },

    #[error("io error: {0}")]
    Io(String),
}

impl SptError {
    pub fn context(self, context: impl Into<String>) -> Self {
        SptError::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// Innermost error, skipping context wrappers.
    pub fn root(&self) -> &SptError {
        match self {
            SptError::Context { source, .. } => source.root(),
            other => other,
        }
    }
}

impl From<std::io::Error> for SptError {
    fn from(err: std::io::Error) -> Self {
        SptError::Io(err.to_string())
    }
}

pub type Result<T, E = SptError> = std::result::Result<T, E>;
