use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unknown field family `{0}`")]
    UnknownFamily(String),

    #[error("family `{family}` takes {expected} parameters, got {got}")]
    ParamCount {
        family: &'static str,
        expected: &'static str,
        got: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite {what} at r = {r}")]
    NonFinite { what: &'static str, r: f64 },

    #[error("quadrature did not converge on [{a}, {b}]")]
    Quadrature { a: f64, b: f64 },

    #[error("profile violates con0 on probed range: no turning radius for |m| = {m} below r = {ceiling}")]
    NoTurningRadius { m: f64, ceiling: f64 },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid too small: {0}")]
    GridTooSmall(String),

    #[error("eigensolver failed in channel j = {j}: {msg}")]
    Eigen { j: i64, msg: String },

    #[error("grid mismatch in channel j = {j}")]
    GridMismatch { j: i64 },

    #[error("missing eigenpairs for channel j = {j}")]
    MissingChannel { j: i64 },

    #[error("coefficient model is not normalizable: {0}")]
    NonNormalizable(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("exponent fit needs at least {need} time points, got {got}")]
    TooFewTimes { got: usize, need: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
