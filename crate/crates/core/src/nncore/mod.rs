//! Minimal dense autodiff and the layers the learners need.

mod checkpoint;
pub mod gradcheck;
pub mod layers;
mod params;
mod tape;
mod tensor;

pub use checkpoint::{Checkpoint, CheckpointHeader, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use gradcheck::{grad_check, GradCheckReport, ParamCheck};
pub use params::{Gradients, ParamId, ParamSpec, ParamStore, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};
pub use tape::{softmax_in_place, Tape, Var};
pub use tensor::Tensor;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("unknown parameter `{0}`")]
    UnknownParam(String),
    #[error("parameter `{0}` registered twice")]
    DuplicateParam(String),
    #[error("loss must be a 1x1 tensor, got {0:?}")]
    NotScalar([usize; 2]),
    #[error("tape already differentiated")]
    TapeConsumed,
    #[error("optimizer step without gradients")]
    MissingGradients,
    #[error("temperature must be positive, got {0}")]
    Temperature(f64),
    #[error("manifest mismatch: {0}")]
    ManifestMismatch(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
