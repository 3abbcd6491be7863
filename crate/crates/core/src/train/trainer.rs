use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hsi::{extract_patches, HsiCube, PatchSet, SplitSpec};
use crate::model::{forward, forward_on_tape, ForwardOptions, ModelConfig, ModelParams, ParamId};
use crate::numerics::{AdamConfig, AdamState, Tape, Tensor};
use crate::scalar::Scalar;
use crate::train::loss::loss_on_tape;
use crate::train::metrics::{ConfusionMatrix, Metrics};

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// L2 strength on the classifier weights.
    pub lambda: f64,
    /// Seeds parameter init; epoch `e` shuffles with `seed + e`.
    pub seed: u64,
    /// Evaluate held-out OA after every epoch (costly on large splits).
    pub eval_each_epoch: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            batch_size: 56,
            learning_rate: 1e-3,
            lambda: 0.01,
            seed: 0,
            eval_each_epoch: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Argument("epochs must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Argument("batch size must be >= 1".into()));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Argument(format!("learning rate must be >= 0, got {}", self.learning_rate)));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Argument(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    /// Sample-weighted mean training loss over the epoch's steps.
    pub loss: f64,
    /// Accuracy of the training-step predictions made during the epoch.
    pub train_oa: f64,
    pub test_oa: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome<T> {
    pub params: ModelParams<T>,
    pub history: Vec<EpochStats>,
}

#[derive(Clone, Copy, Debug)]
pub struct EvalOptions {
    pub batch_size: usize,
    /// Spread batches over the rayon pool. Results are identical either way.
    pub parallel: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            batch_size: 64,
            parallel: false,
        }
    }
}

/// Trains freshly initialized parameters (seeded by `train_cfg.seed`).
pub fn train<T: Scalar>(
    patches: &PatchSet,
    split: &SplitSpec,
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
) -> Result<TrainOutcome<T>> {
    let params = ModelParams::init(model_cfg, train_cfg.seed)?;
    train_from(params, patches, split, train_cfg)
}

/// Mini-batch Adam on the split's training indices, keeping the last
/// partial batch.
pub fn train_from<T: Scalar>(
    mut params: ModelParams<T>,
    patches: &PatchSet,
    split: &SplitSpec,
    train_cfg: &TrainConfig,
) -> Result<TrainOutcome<T>> {
    train_cfg.validate()?;
    let cfg = params.config().clone();
    check_patches(&cfg, patches)?;
    let train_idx = split.train_indices();
    if train_idx.is_empty() {
        return Err(Error::Argument("training split is empty".into()));
    }
    let class_of = |i: usize| patches.labels()[i] as usize - 1;
    let mut present: Vec<usize> = train_idx.iter().map(|&i| class_of(i)).collect();
    present.sort_unstable();
    present.dedup();
    if present.len() < 2 {
        return Err(Error::Argument("training split must contain at least 2 classes".into()));
    }
    if let Some(&c) = present.last().filter(|&&c| c >= cfg.classes) {
        return Err(Error::Argument(format!(
            "label {} exceeds model class count {}",
            c + 1,
            cfg.classes
        )));
    }
    let test_idx = split.test_indices();

    let adam_cfg = AdamConfig {
        learning_rate: train_cfg.learning_rate,
        ..AdamConfig::default()
    };
    let mut adam = AdamState::new(adam_cfg, params.tensors());
    let names: Vec<&str> = ParamId::ALL.iter().map(|p| p.name()).collect();
    let lambda = T::of(train_cfg.lambda);
    let mut history = Vec::with_capacity(train_cfg.epochs);

    for epoch in 0..train_cfg.epochs {
        let mut order = train_idx.clone();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(train_cfg.seed.wrapping_add(epoch as u64)));
        let (mut loss_sum, mut correct) = (0.0, 0usize);
        for (step, chunk) in order.chunks(train_cfg.batch_size).enumerate() {
            let labels: Vec<usize> = chunk.iter().map(|&i| class_of(i)).collect();
            let mut tape = Tape::new();
            let p = params.register(&mut tape);
            let x = tape.constant(patches.batch::<T>(chunk));
            let fwd = forward_on_tape(&mut tape, x, &p, &cfg, &ForwardOptions::default())
                .map_err(|e| diverged_or(e, epoch, step))?;
            correct += argmax_rows(tape.value(fwd.logits).data(), cfg.classes)
                .iter()
                .zip(&labels)
                .filter(|(a, b)| a == b)
                .count();
            let loss = loss_on_tape(&mut tape, fwd.logits, labels, p.get(ParamId::Classifier), lambda)
                .map_err(|e| diverged_or(e, epoch, step))?;
            let value = tape.value(loss).item().to_f64_lossy();
            if !value.is_finite() {
                return Err(Error::Diverged { epoch, step });
            }
            loss_sum += value * chunk.len() as f64;
            let mut grads = tape.backward(loss)?;
            // the score head only steers the discrete top-N selection, so it
            // receives no gradient
            let grads: Vec<_> = p
                .iter()
                .map(|(id, v)| grads.take(v).unwrap_or_else(|| Tensor::zeros(params.get(id).shape())))
                .collect();
            let grad_refs: Vec<_> = grads.iter().collect();
            adam.step(params.tensors_mut(), &grad_refs, &names)?;
        }
        let test_oa = if train_cfg.eval_each_epoch && !test_idx.is_empty() {
            Some(evaluate(&params, patches, &test_idx, &EvalOptions::default())?.oa)
        } else {
            None
        };
        history.push(EpochStats {
            epoch: epoch + 1,
            loss: loss_sum / order.len() as f64,
            train_oa: correct as f64 / order.len() as f64,
            test_oa,
        });
    }
    Ok(TrainOutcome { params, history })
}

fn diverged_or(e: Error, epoch: usize, step: usize) -> Error {
    match e {
        Error::NonFinite(_) => Error::Diverged { epoch, step },
        other => other,
    }
}

fn check_patches(cfg: &ModelConfig, patches: &PatchSet) -> Result<()> {
    if patches.size() != cfg.patch_size || patches.bands() != cfg.bands {
        return Err(Error::Argument(format!(
            "patches are {}x{}x{} but the model expects {}x{}x{}",
            patches.size(),
            patches.size(),
            patches.bands(),
            cfg.patch_size,
            cfg.patch_size,
            cfg.bands
        )));
    }
    Ok(())
}

fn argmax_rows<T: Scalar>(logits: &[T], classes: usize) -> Vec<usize> {
    logits
        .chunks(classes)
        .map(|row| {
            let mut best = 0;
            for (k, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = k;
                }
            }
            best
        })
        .collect()
}

/// Predicted 0-based class of each patch at `indices`.
pub fn predict_labels<T: Scalar>(
    params: &ModelParams<T>,
    patches: &PatchSet,
    indices: &[usize],
    opts: &EvalOptions,
) -> Result<Vec<usize>> {
    check_patches(params.config(), patches)?;
    let classes = params.config().classes;
    let run = |chunk: &[usize]| -> Result<Vec<usize>> {
        let (logits, _) = forward(params, &patches.batch::<T>(chunk), &ForwardOptions::default())?;
        Ok(argmax_rows(logits.data(), classes))
    };
    let chunks: Vec<&[usize]> = indices.chunks(opts.batch_size.max(1)).collect();
    let per_chunk: Vec<Result<Vec<usize>>> = if opts.parallel {
        chunks.par_iter().map(|c| run(c)).collect()
    } else {
        chunks.iter().map(|c| run(c)).collect()
    };
    let mut out = Vec::with_capacity(indices.len());
    for r in per_chunk {
        out.extend(r?);
    }
    Ok(out)
}

/// Confusion-matrix metrics over the labeled patches at `indices`.
pub fn evaluate<T: Scalar>(
    params: &ModelParams<T>,
    patches: &PatchSet,
    indices: &[usize],
    opts: &EvalOptions,
) -> Result<Metrics> {
    if indices.is_empty() {
        return Err(Error::Argument("evaluation split is empty".into()));
    }
    let classes = params.config().classes;
    let truth: Vec<usize> = indices
        .iter()
        .map(|&i| match patches.labels()[i] {
            0 => Err(Error::Argument(format!("patch {i} is unlabeled"))),
            l => Ok(l as usize - 1),
        })
        .collect::<Result<_>>()?;
    let predicted = predict_labels(params, patches, indices, opts)?;
    Metrics::from_confusion(ConfusionMatrix::from_pairs(classes, &truth, &predicted)?)
}

/// Row-major `height × width` map of predicted labels (1-based); pixels
/// without a full interior patch are 0.
pub fn predict_map<T: Scalar>(params: &ModelParams<T>, cube: Arc<HsiCube>, opts: &EvalOptions) -> Result<Vec<u32>> {
    let (h, w) = (cube.height(), cube.width());
    let patches = extract_patches(cube, params.config().patch_size, 1)?;
    let all: Vec<usize> = (0..patches.len()).collect();
    let predicted = predict_labels(params, &patches, &all, opts)?;
    let mut map = vec![0u32; h * w];
    for (&(r, c), &k) in patches.centers().iter().zip(&predicted) {
        map[r * w + c] = k as u32 + 1;
    }
    Ok(map)
}
