use crate::error::Result;
use crate::model::{forward_on_tape, ForwardOptions, ModelParams, ParamId};
use crate::numerics::gradcheck::{check_gradients, GradCheckReport};
use crate::model::ParamVars;
use crate::numerics::{Tape, Tensor, Var};
use crate::train::loss_on_tape;

fn loss_with(
    params: &ModelParams<f64>,
    patches: &Tensor<f64>,
    labels: &[usize],
    lambda: f64,
    opts: &ForwardOptions,
) -> Result<(Tape<f64>, ParamVars, Var, Vec<usize>)> {
    let mut tape = Tape::new();
    let p = params.register(&mut tape);
    let x = tape.constant(patches.clone());
    let fwd = forward_on_tape(&mut tape, x, &p, params.config(), opts)?;
    let loss = loss_on_tape(&mut tape, fwd.logits, labels.to_vec(), p.get(ParamId::Classifier), lambda)?;
    Ok((tape, p, loss, fwd.prioritized.indices))
}

/// Compares tape gradients of the training loss with central differences
/// for every parameter tensor. The top-N indices chosen by the unperturbed
/// pass stay fixed while probing, since the selection is piecewise constant.
pub fn check_model_gradients(
    params: &ModelParams<f64>,
    patches: &Tensor<f64>,
    labels: &[usize],
    lambda: f64,
    step: f64,
    floor: f64,
) -> Result<Vec<(ParamId, GradCheckReport)>> {
    let (tape, vars, loss, indices) = loss_with(params, patches, labels, lambda, &ForwardOptions::default())?;
    let grads = tape.backward(loss)?;
    let frozen = ForwardOptions {
        frozen_indices: Some(indices),
    };
    let mut out = Vec::with_capacity(ParamId::ALL.len());
    for (id, var) in vars.iter() {
        let value = params.get(id).clone();
        let analytic = grads.get(var).cloned().unwrap_or_else(|| Tensor::zeros(value.shape()));
        let f = |x: &[Tensor<f64>]| {
            let mut probe = params.clone();
            *probe.get_mut(id) = x[0].clone();
            let (tape, _, loss, _) = loss_with(&probe, patches, labels, lambda, &frozen).expect("probe forward");
            tape.value(loss).item()
        };
        out.push((id, check_gradients(&[value], &[analytic], step, floor, &f)));
    }
    Ok(out)
}
