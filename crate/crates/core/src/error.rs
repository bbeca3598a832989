use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("integrated tail diverges: {0}")]
    NonIntegrableTail(String),

    #[error("tail underflows on the diagnostic grid at x = {x}")]
    InconclusiveRange { x: f64 },

    #[error("NaN input to {0}")]
    NanInput(&'static str),

    #[error("no state exceeds the sign threshold {threshold}")]
    EmptySelection { threshold: f64 },

    #[error("majorant drift is not negative: E zeta(x0) = {mean:.6} (stderr {stderr:.2e})")]
    DriftNotNegative { mean: f64, stderr: f64 },

    #[error("regime hypothesis violated: {0}")]
    RegimeHypothesisViolated(String),

    #[error("unsupported law: {0}")]
    Unsupported(String),

    #[error("horizon {horizon} exceeds the cap {cap}")]
    HorizonOverflow { horizon: u64, cap: u64 },

    #[error("only {hits} paths reached the conditioning event (need {required}); widen x or raise N")]
    TooFewHits { hits: u64, required: u64 },

    #[error("enumeration budget exceeded: {sequences} sequences > {budget}")]
    BudgetExceeded { sequences: f64, budget: f64 },

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("config: {0}")]
    Config(String),

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl Error {
    /// Variant name, for machine-readable reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidModel(_) => "InvalidModel",
            Error::NonIntegrableTail(_) => "NonIntegrableTail",
            Error::InconclusiveRange { .. } => "InconclusiveRange",
            Error::NanInput(_) => "NanInput",
            Error::EmptySelection { .. } => "EmptySelection",
            Error::DriftNotNegative { .. } => "DriftNotNegative",
            Error::RegimeHypothesisViolated(_) => "RegimeHypothesisViolated",
            Error::Unsupported(_) => "Unsupported",
            Error::HorizonOverflow { .. } => "HorizonOverflow",
            Error::TooFewHits { .. } => "TooFewHits",
            Error::BudgetExceeded { .. } => "BudgetExceeded",
            Error::Quadrature(_) => "Quadrature",
            Error::Config(_) => "Config",
            Error::Io(_) => "Io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
