use thiserror::Error;

/// Errors raised by the numerical routines of this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("argument {value} outside the domain [0, 1]")]
    Domain { value: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("not a point of the simplex: {0}")]
    NotOnSimplex(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate cost function: {0}")]
    DegenerateCost(String),

    #[error("bisection failed to bracket a root: {0}")]
    Bracket(String),

    #[error("drop probability {value} of agent {agent} is not positive")]
    FloorViolation { agent: usize, value: f64 },

    #[error("linear program failed: {0}")]
    LinearProgram(String),
}

pub type Result<T> = std::result::Result<T, Error>;
