//! GraphMamba hyperspectral patch classifier.
//!
//! Patches of a hyperspectral cube are tokenized by a spatial (3×3) and a
//! spectral (1×1) convolution stream. The highest-scoring tokens form a
//! dot-product graph, spatial tokens attend to spectral tokens, and the fused
//! sequence is summarized by a GRU before a linear classifier.
//!
//! All numeric code is generic over [`Scalar`]; `f64` is used for gradient
//! verification and `f32` for training. Concrete aliases for both live at
//! the crate root.

pub mod error;
pub mod estimate;
pub mod hsi;
pub mod model;
pub mod numerics;
pub mod scalar;
pub mod train;

pub use error::{Error, Result};
pub use hsi::{HsiCube, PatchSet, SplitSpec};
pub use model::{ForwardTrace, ModelConfig, ModelParams, ParamId};
pub use numerics::{AdamState, Gradients, Tape, Tensor, Var};
pub use scalar::Scalar;
pub use train::{Metrics, TrainConfig};

pub type Tensor32 = Tensor<f32>;
pub type Tensor64 = Tensor<f64>;
pub type Tape32 = Tape<f32>;
pub type Tape64 = Tape<f64>;
pub type Params32 = ModelParams<f32>;
pub type Params64 = ModelParams<f64>;
pub type Adam32 = AdamState<f32>;
pub type Adam64 = AdamState<f64>;
