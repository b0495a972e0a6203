//! Dense `f64` numerics with hand-written gradients: tensors, named
//! parameters, an LSTM cell, Adam, and a finite-difference checker.

mod gradcheck;
pub mod lstm;
pub mod ops;
mod optim;
mod params;
mod tensor;

pub use gradcheck::{gradient_check, GradCheckReport};
pub use lstm::{LstmCell, LstmStep, LstmStepGrad};
pub use ops::softmax_cross_entropy;
pub use optim::{Adam, AdamConfig};
pub use params::{Grads, NamedTensor, ParamId, ParamStore, Parameter};
pub use tensor::Tensor;
