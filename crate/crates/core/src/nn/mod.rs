//! Numeric substrate: tensors, a tape-based reverse-mode graph, and the
//! finite-difference checker used to validate it.

mod functional;
mod gradcheck;
mod graph;
pub(crate) mod kernels;
mod tensor;

pub use functional::{cross_entropy, layer_norm, log_softmax, softmax};
pub use gradcheck::{grad_check, GradCheckReport};
pub use graph::{Gradients, Graph, Var};
pub use tensor::Tensor;

/// Layer-norm epsilon used throughout the encoder.
pub const LAYER_NORM_EPS: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NnError {
    #[error("empty input")]
    Empty,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("finite-difference step {0} outside [1e-7, 1e-3]")]
    BadStep(f64),
}
