//! Dense tensors, the kernels the model needs, a reverse-mode tape and Adam.

mod adam;
pub mod flops;
pub mod gradcheck;
pub mod kernels;
mod tape;
mod tensor;

pub use adam::{AdamConfig, AdamState};
pub use kernels::Padding;
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;
