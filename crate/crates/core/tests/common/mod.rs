#![allow(dead_code)]

use graphmamba::numerics::gradcheck::{check_gradients, GradCheckReport};
use graphmamba::{Result, Tape64, Tensor64, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FD_STEP: f64 = 1e-5;
/// Denominator floor: central-difference roundoff at step 1e-5 is about
/// 1e-11 absolute, so gradients smaller than this are compared absolutely.
pub const REL_FLOOR: f64 = 1e-6;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn randn(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor64 {
    Tensor64::from_fn(shape, |_| rng.random_range(-1.0..1.0))
}

/// Builds a scalar from `inputs` on a fresh tape.
pub type Build<'a> = dyn Fn(&mut Tape64, &[Var]) -> Result<Var> + 'a;

pub fn eval(inputs: &[Tensor64], build: &Build) -> f64 {
    let mut tape = Tape64::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.param(t.clone())).collect();
    let out = build(&mut tape, &vars).unwrap();
    tape.value(out).item()
}

pub fn grad_report(inputs: &[Tensor64], build: &Build) -> GradCheckReport {
    let mut tape = Tape64::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.param(t.clone())).collect();
    let out = build(&mut tape, &vars).unwrap();
    let grads = tape.backward(out).unwrap();
    let analytic: Vec<Tensor64> = vars
        .iter()
        .zip(inputs)
        .map(|(&v, t)| grads.get(v).cloned().unwrap_or_else(|| Tensor64::zeros(t.shape())))
        .collect();
    check_gradients(inputs, &analytic, FD_STEP, REL_FLOOR, &|x: &[Tensor64]| eval(x, build))
}

pub fn max_grad_error(inputs: &[Tensor64], build: &Build) -> f64 {
    grad_report(inputs, build).max_relative_error
}

/// Random linear functional of `y`, so every output element matters.
pub fn weighted_sum(tape: &mut Tape64, y: Var, seed: u64) -> Result<Var> {
    let mut r = rng(seed ^ 0xA5A5);
    let w = randn(&mut r, tape.value(y).shape());
    let w = tape.constant(w);
    let prod = tape.mul(y, w)?;
    tape.sum(prod)
}
