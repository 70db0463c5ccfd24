use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid measurement: {0}")]
    InvalidMeasurement(String),

    #[error("invalid channel: {0}")]
    InvalidChannel(String),

    #[error("operator is not Hermitian (max deviation {0:e})")]
    NonHermitian(f64),

    #[error("superoperator side {side} exceeds the dense cap {cap}; use the iterative path")]
    SuperoperatorTooLarge { side: usize, cap: usize },

    #[error("observer `{name}` failed at step {step}: {message}")]
    Observer {
        name: String,
        step: usize,
        message: String,
    },

    #[error("closed-form and quadrature matrix elements differ at ({row}, {col}) by {diff:e}")]
    QuadratureMismatch { row: usize, col: usize, diff: f64 },

    #[error("kernel evolution differs from direct iteration by {0:e}")]
    KernelMismatch(f64),

    #[error("outcome probability {0:e} is below the conditioning floor")]
    ZeroProbability(f64),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("k = {k} is outside the tomography range k <= pi/(4L) = {max}")]
    TomographyRange { k: f64, max: f64 },

    #[error("statistics source is not an alternating +-+- strategy")]
    NotAlternating,

    #[error("not a projector: {0}")]
    NotProjector(String),

    #[error("power iteration stopped after {iterations} iterations with residual {residual:e}")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("state support reaches word length {support}; at most {limit} keeps {steps} steps exact")]
    SupportTooClose {
        support: usize,
        limit: usize,
        steps: usize,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
