//! Dense `f64` tensors, reverse-mode differentiation, and optimizers.

mod gradcheck;
mod numeric;
mod optim;
mod params;
mod tape;
mod tensor;

pub use gradcheck::{check_gradients, relative_error, GradCheck, REL_ERROR_FLOOR};
pub use numeric::{log_sum_exp, stable_softmax};
pub use optim::Adam;
pub use params::{Gradients, NamedTensor, ParamId, ParamStore};
pub use tape::{Tape, Var};
pub use tensor::Tensor;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiffError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("{0}: empty input")]
    EmptyInput(&'static str),
    #[error("{0}: non-finite input")]
    NonFiniteInput(&'static str),
    #[error("backward needs a scalar loss, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),
    #[error("non-finite value produced by `{op}` (tape node {node})")]
    NonFinite { op: &'static str, node: usize },
    #[error("duplicate parameter name `{0}`")]
    DuplicateParam(String),
    #[error("unknown parameter `{0}`")]
    UnknownParam(String),
}
