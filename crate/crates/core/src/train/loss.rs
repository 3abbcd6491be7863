use crate::error::Result;
use crate::numerics::kernels;
use crate::numerics::{Tape, Tensor, Var};
use crate::scalar::Scalar;

/// Mean softmax cross-entropy plus `lambda·‖W_classifier‖²`.
pub fn loss<T: Scalar>(logits: &Tensor<T>, labels: &[usize], classifier: &Tensor<T>, lambda: T) -> Result<T> {
    let ce = kernels::cross_entropy(logits, labels)?;
    let penalty: T = classifier.data().iter().map(|&w| w * w).sum();
    Ok(ce + lambda * penalty)
}

pub fn loss_on_tape<T: Scalar>(
    tape: &mut Tape<T>,
    logits: Var,
    labels: Vec<usize>,
    classifier: Var,
    lambda: T,
) -> Result<Var> {
    let ce = tape.cross_entropy(logits, labels)?;
    let sq = tape.sum_squares(classifier)?;
    let penalty = tape.scale(sq, lambda)?;
    tape.add(ce, penalty)
}
