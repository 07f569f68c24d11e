//! Small differentiable-computation substrate: dense matrices, hand-written
//! forward/backward kernels, parameter storage, optimizers, a
//! finite-difference checker and checkpoints.

mod checkpoint;
mod gradcheck;
mod matrix;
pub mod ops;
mod optim;
mod params;

pub use checkpoint::{Checkpoint, RngState};
pub use gradcheck::{gradient_check, relative_error, GradCheckReport, REL_ERROR_FLOOR};
pub use matrix::Matrix;
pub use ops::{
    affine, affine_backward, cross_entropy, cross_entropy_backward, sigmoid, softmax,
    softmax_backward,
};
pub use optim::{optimizer_step, Optimizer, OptimizerConfig, OptimizerKind};
pub use params::{ParamId, Parameter, ParameterStore};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DiffError {
    #[error("{op}: shape mismatch, expected {expected}, found {found}")]
    ShapeMismatch {
        op: &'static str,
        expected: String,
        found: String,
    },
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("loss is not finite: {0}")]
    NonFiniteLoss(f64),
    #[error("duplicate parameter `{0}`")]
    DuplicateParameter(String),
    #[error("missing parameter `{0}`")]
    MissingParameter(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}
