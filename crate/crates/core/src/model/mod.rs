//! The GraphMamba network.
//!
//! Stage order: tokenize → {prioritize → graph propagation} and
//! cross-attention → fuse → GRU state-space head → classifier.

pub mod checkpoint;
mod config;
mod forward;
mod gradcheck;
mod params;

pub use config::ModelConfig;
pub use forward::{
    classify, cross_attention, forward, forward_on_tape, fuse, graph_propagate, gru_ssm, prioritize, tokenize,
    Attention, ForwardOptions, ForwardTrace, ForwardVars, GraphOutput, Prioritized, Tokens,
};
pub use gradcheck::check_model_gradients;
pub use params::{ModelParams, ParamId, ParamVars};
