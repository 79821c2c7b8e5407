use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    /// A marginal power-law side condition fails; simulation is still allowed.
    #[error("degenerate tail: {0}")]
    DegenerateTail(String),

    #[error("invalid seed graph: {0}")]
    InvalidSeed(String),

    #[error("resource limit: {0}")]
    ResourceLimit(String),

    #[error("empty input")]
    EmptyInput,

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("non-positive sample value {0}")]
    NonPositiveSample(f64),

    /// All log-ratios in the Hill sum vanish (e.g. constant samples).
    #[error("degenerate tail sample: top order statistics are all equal")]
    DegenerateTailSample,

    #[error("quadrature failure: estimated error {error:.3e} exceeds tolerance {tolerance:.3e} after {subdivisions} subdivisions")]
    QuadratureFailure {
        error: f64,
        tolerance: f64,
        subdivisions: usize,
    },

    #[error("domain error: {0}")]
    DomainError(String),

    #[error("insufficient exceedances: {found} points above threshold, need at least {needed}")]
    InsufficientExceedances { found: usize, needed: usize },

    #[error("invalid k = {k}: must exceed alpha_in - 1 = {bound}")]
    InvalidK { k: u32, bound: f64 },

    #[error("support exceeded: {0}")]
    SupportExceeded(String),

    #[error("divergent sum: {0}")]
    DivergentSum(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Errors that come from numerical evaluation rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::QuadratureFailure { .. }
                | Error::DivergentSum(_)
                | Error::SupportExceeded(_)
                | Error::DegenerateTailSample
                | Error::InsufficientExceedances { .. }
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
