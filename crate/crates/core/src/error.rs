use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A non-finite state was produced by the integrator.
    #[error("integration diverged after t = {last_good_time}")]
    IntegrationDiverged { last_good_time: f64 },

    /// Newton did not reach the residual tolerance. Carries the last iterate.
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        theta: Vec<f64>,
        residual: f64,
        iterations: usize,
    },

    /// Newton system is singular beyond the rotational gauge direction.
    #[error("degenerate Newton system at iteration {iteration}")]
    Degenerate { theta: Vec<f64>, iteration: usize },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("precondition violated: {0}")]
    PreconditionViolation(String),

    #[error("internal consistency check failed: {0}")]
    InternalConsistency(String),
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
