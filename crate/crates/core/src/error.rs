use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid arrival model: {0}")]
    InvalidModel(String),

    #[error("invalid policy: {0}")]
    InvalidPolicy(String),

    #[error("user index {index} out of range for {users} users")]
    UserOutOfRange { index: usize, users: usize },

    #[error("user {user} overspends: requested {spend} with battery level {level}")]
    Overspend { user: usize, spend: f64, level: f64 },

    #[error("enumeration needs {required} units of work, budget is {budget}")]
    BudgetExceeded { required: f64, budget: u64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("malformed region: {0}")]
    MalformedRegion(String),

    #[error("polymatroid structure violated: {0}")]
    Structural(String),

    #[error("quadrature did not converge: error estimate {estimate:e} exceeds {tolerance:e}")]
    Quadrature { estimate: f64, tolerance: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
