use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("Kronecker power order must be at least 1")]
    DegenerateBasis,

    #[error("matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:e}, tolerance {tolerance:e})")]
    IndefiniteMatrix { min_eigenvalue: f64, tolerance: f64 },

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("noise distribution must be zero-mean (weighted mean norm {0:e})")]
    NonZeroMean(f64),

    #[error("invalid probabilities: {0}")]
    InvalidProbs(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("unsupported CUT order {0} (expected 4, 6 or 8)")]
    UnsupportedOrder(usize),

    #[error("no CUT rule found for dimension {dim} and order {order}")]
    UnsupportedDimension { dim: usize, order: usize },

    #[error("additive noise compounding supports update order <= 2, got {0}")]
    AdditiveOrderUnsupported(usize),

    #[error("singular measurement moment system: {0}")]
    SingularSystem(String),

    #[error("prediction failed: {0}")]
    PredictFailure(String),

    #[error("degenerate measurement geometry: {0}")]
    DegenerateGeometry(String),

    #[error("singular potential: distance to primary {0:e}")]
    SingularPotential(f64),

    #[error("integrator step size underflow at t = {t} (h = {h:e})")]
    StepUnderflow { t: f64, h: f64 },

    #[error("empty input")]
    EmptyInput,

    #[error("need at least {needed} Monte Carlo runs, got {got}")]
    TooFewRuns { needed: usize, got: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("I/O error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl Error {
    /// Configuration problems are the caller's fault; everything else is numerical.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::InvalidParams(_)
                | Error::InvalidProbs(_)
                | Error::NonZeroMean(_)
                | Error::UnsupportedOrder(_)
                | Error::AdditiveOrderUnsupported(_)
        )
    }
}
