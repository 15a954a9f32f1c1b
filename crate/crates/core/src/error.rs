use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("numeric failure: {0}")]
    NumericFailure(String),

    #[error("scalar Newton iteration did not converge after {iterations} iterations")]
    NonConvergence { iterations: usize },

    #[error("infinite operand: {0}")]
    InfiniteOperand(String),

    #[error("density {rho} outside tabulated range [{lo}, {hi}]")]
    OutOfRange { rho: f64, lo: f64, hi: f64 },

    #[error("characteristic substep displacement {displacement:.3e} exceeds guard {limit:.3e}")]
    CflViolation { displacement: f64, limit: f64 },

    #[error("interface self-intersection at step {step}")]
    SelfIntersection { step: usize },

    #[error("weighted projection did not converge in {iterations} iterations (relative residual {residual:.3e})")]
    IterationLimit { iterations: usize, residual: f64 },

    #[error("inadmissible test function: {0}")]
    InadmissibleTest(String),

    #[error("malformed trajectory: {0}")]
    MalformedTrajectory(String),
}
