//! Loss, the training loop, evaluation metrics and map prediction.

mod loss;
mod metrics;
mod trainer;

pub use loss::{loss, loss_on_tape};
pub use metrics::{ConfusionMatrix, Metrics};
pub use trainer::{
    evaluate, predict_labels, predict_map, train, train_from, EpochStats, EvalOptions, TrainConfig, TrainOutcome,
};
