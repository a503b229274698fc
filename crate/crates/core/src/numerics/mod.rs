//! Tensors, reverse-mode differentiation, gradient checking, Adam and
//! checkpoint I/O.

pub mod checkpoint;
pub mod gradcheck;
mod graph;
pub mod optim;
mod params;
mod tensor;

pub use gradcheck::{gradient_check, gradient_check_params, GradCheckReport};
pub use graph::{Gradients, Graph, Var};
pub use optim::{AdamConfig, AdamState};
pub use params::{Init, ParamId, ParamStore, Parameter};
pub use tensor::Tensor;

/// Clamp applied wherever probabilities feed a logarithm.
pub const LOG_EPS: f64 = 1e-8;
