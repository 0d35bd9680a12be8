//! Error type shared by the solvers, learners, and environment builders.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum CoreError {
    /// Malformed model, config value, or argument (bad shapes, invalid
    /// distributions, weights on features outside the task basis, ...).
    Config(String),
    /// No policy can satisfy the constraint: the dual hit its cap, demo
    /// rejection exceeded its budget, or an environment has no feasible
    /// corridor.
    Infeasible(String),
    /// A solver failed to converge or produced non-finite numbers.
    Solver(String),
    /// A model references feature names the target environment lacks.
    FeatureMismatch { missing: Vec<String> },
    /// Correlation requested on a constant sequence.
    DegenerateCorrelation,
}

impl fmt::Display for CoreError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CoreError::Config(msg) => write!(f, "invalid configuration: {msg}"),
            CoreError::Infeasible(msg) => write!(f, "infeasible: {msg}"),
            CoreError::Solver(msg) => write!(f, "solver failure: {msg}"),
            CoreError::FeatureMismatch { missing } => {
                write!(f, "unresolvable feature names: {}", missing.join(", "))
            }
            CoreError::DegenerateCorrelation => {
                write!(f, "correlation undefined: zero variance in samples")
            }
        }
    }
}

impl core::error::Error for CoreError {}

pub type Result<T> = core::result::Result<T, CoreError>;
