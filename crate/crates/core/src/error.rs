use thiserror::Error;

use crate::stepper::Trajectory;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error(
        "singular implicit coefficient {coefficient:e} at node {node}; refine the time grid (smaller step)"
    )]
    SingularStep { node: usize, coefficient: f64 },

    #[error("fixed-point iteration stalled after {iterations} iterations (contraction factor {factor:.4}, last increment {increment:e})")]
    FixedPointNonconvergence {
        iterations: usize,
        factor: f64,
        increment: f64,
    },

    #[error("proximal solver did not converge after {iterations} iterations (gradient norm {grad_norm:e})")]
    ProxNonconvergence { iterations: usize, grad_norm: f64 },

    #[error("infeasible state: {0}")]
    Infeasible(String),

    #[error("step {step} failed: {source}")]
    StepFailed {
        step: usize,
        #[source]
        source: Box<Error>,
        partial: Box<Trajectory>,
    },

    #[error("mismatched inputs: {0}")]
    Mismatch(String),

    #[error("i/o: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
