//! Dense `f64` kernels, a reverse-mode tape, Adam, and a finite-difference
//! gradient checker.

mod adam;
mod gradcheck;
mod ops;
mod params;
pub mod rng;
mod tape;
mod tensor;

pub use adam::{AdamConfig, AdamState};
pub use gradcheck::{
    check_gradients, check_gradients_termwise, GradCheckReport, ParamCheck, GRADIENT_FLOOR,
};
pub use ops::{conv1d_single_filter, gelu, gelu_derivative, segmented_softmax, sigmoid};
pub use params::{Gradients, ParamId, ParamStore};
pub use tape::{bce_terms, bce_value, Tape, Var, BCE_CLAMP};
pub use tensor::Tensor;
