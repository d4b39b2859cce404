use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("series too short: {length} time points cannot support {lags} lags")]
    SeriesTooShort { length: usize, lags: usize },

    #[error("component `{name}` is constant and cannot be standardized")]
    ConstantSeries { name: String },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid group chain: {0}")]
    InvalidChain(String),

    #[error("group chains overlap at coordinate {0}")]
    OverlappingChains(usize),

    #[error("zero matrix has no spectral step")]
    ZeroMatrix,

    #[error("row {row} diverged at lambda {lambda}: non-finite objective")]
    Diverged { row: usize, lambda: f64 },

    #[error("degenerate design: every response row is zero")]
    DegenerateDesign,

    #[error("least squares needs k*lag = {params} < T = {obs}")]
    TooFewObservations { params: usize, obs: usize },

    #[error("Gram matrix is singular; use a regularized estimator")]
    Singular,

    #[error("residual covariance is not positive definite")]
    NotPositiveDefinite,

    #[error("coefficients are not stationary (spectral radius {0})")]
    NonStationary(f64),

    #[error("{0}")]
    Scenario(String),

    #[error("spectral radius bisection failed: {0}")]
    Bisection(String),

    #[error("insufficient history: need {needed} observations, have {have}")]
    InsufficientHistory { needed: usize, have: usize },

    #[error("empty {0}")]
    Empty(&'static str),

    #[error("invalid evaluation windows: {0}")]
    Windows(String),

    #[error("unknown method `{0}`")]
    UnknownMethod(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("parse error: {0}")]
    Parse(String),
}
