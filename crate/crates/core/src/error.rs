use thiserror::Error;

/// Errors produced by the planning, kinematics and simulation layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("quaternion is not unit norm (|q| = {norm}, tolerance {tol})")]
    NonUnitQuaternion { norm: f64, tol: f64 },

    #[error("dual quaternion violates unit conditions ({reason})")]
    NonUnitDualQuaternion { reason: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("pose path too short: need at least {need} poses, got {got}")]
    PathTooShort { need: usize, got: usize },

    #[error("expected a {expected} path, got a {got} path")]
    PathKindMismatch { expected: String, got: String },

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("planner did not converge within {iterations} iterations (residual error {residual})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("obstacle avoidance failed: {0}")]
    AvoidanceFailure(String),

    #[error("goal pose is unreachable: {0}")]
    UnreachableGoal(String),

    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn parse(context: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            context: context.into(),
            message: message.into(),
        }
    }

    /// Process exit code associated with this error class.
    ///
    /// 2 = non-convergence, 3 = avoidance failure, 4 = config/parse error,
    /// 1 = anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NonConvergence { .. } => 2,
            Error::UnreachableGoal(_) => 2,
            Error::AvoidanceFailure(_) => 3,
            Error::Parse { .. }
            | Error::InvalidInput(_)
            | Error::PathTooShort { .. }
            | Error::Io(_) => 4,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
