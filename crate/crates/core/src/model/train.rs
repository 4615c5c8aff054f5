// SPDX-License-Identifier: MIT OR Apache-2.0

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{encode, Checkpoint, Head, ModelConfig, Target};
use crate::error::{Error, Result};
use crate::seed;
use crate::text::{BinaryLabel, Comment};

/// Share of the data held out for checkpoint selection.
pub const HOLDOUT_FRACTION: f64 = 0.1;

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Init {
    #[default]
    Glorot,
}

// A `γ = 0.1` setting is sometimes listed next to these hyperparameters
// without a defined role. It has no field here and unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    /// Peak rate after warmup.
    pub learning_rate: f64,
    /// Fraction of all optimizer steps spent ramping the rate up linearly.
    pub warmup_ratio: f64,
    /// Decoupled weight decay on weight matrices and embeddings.
    pub weight_decay: f64,
    pub init: Init,
    /// Seeds for repeated runs; each run trains with one of them.
    pub seeds: Vec<u64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 20,
            batch_size: 64,
            learning_rate: 3e-4,
            warmup_ratio: 0.1,
            weight_decay: 0.1,
            init: Init::Glorot,
            seeds: vec![1, 2, 3, 4, 5],
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(0.0..=1.0).contains(&self.warmup_ratio) {
            return bad("warmup_ratio must lie in [0, 1]");
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad("weight_decay must be non-negative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainMeta {
    pub epochs_run: usize,
    /// Epoch (1-based) whose parameters were kept.
    pub best_epoch: usize,
    /// Mean training loss of the final epoch.
    pub final_loss: f64,
    /// Selection loss of the kept epoch: held-out loss, or training loss when
    /// the dataset is too small to hold anything out.
    pub best_selection_loss: f64,
    pub seed: u64,
}

fn target_for(comment: &Comment, head: Head) -> Result<Target> {
    let missing = || Error::LabelMismatch {
        id: comment.id().to_string(),
        head: head.name(),
    };
    match head {
        Head::Binary => {
            let label = comment.binary_label().ok_or_else(missing)?;
            Ok(Target::Class(usize::from(label == BinaryLabel::Offensive)))
        }
        Head::Multilabel3 => {
            let bits = comment.position_labels().ok_or_else(missing)?;
            Ok(Target::Bits(bits.0.map(|b| if b { 1.0 } else { 0.0 })))
        }
    }
}

/// Trains a fresh model with AdamW, linear warmup then a constant rate, and
/// returns the parameters of the epoch with the lowest held-out loss.
///
/// Fully deterministic in `(dataset, configs)`: initialization, the held-out
/// split and per-epoch shuffles all derive from `model.seed`.
pub fn train(dataset: &[Comment], model: &ModelConfig, config: &TrainConfig) -> Result<Checkpoint> {
    model.validate()?;
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::Empty("training dataset"));
    }
    let examples: Vec<(Vec<usize>, Target)> = dataset
        .iter()
        .map(|c| Ok((encode(c.text(), model), target_for(c, model.head)?)))
        .collect::<Result<_>>()?;

    let mut order: Vec<usize> = (0..examples.len()).collect();
    order.shuffle(&mut seed::rng(seed::derive(model.seed, "holdout", 0)));
    let holdout_len = (examples.len() as f64 * HOLDOUT_FRACTION) as usize;
    let (holdout, train_idx) = order.split_at(holdout_len);
    let mut train_idx = train_idx.to_vec();

    let mut ckpt = Checkpoint::glorot(model.clone())?;
    let n_params = model.parameter_count();
    let decay_mask: Vec<bool> = {
        let mut m = vec![false; n_params];
        for seg in model.segments() {
            if !seg.name.ends_with("bias") {
                m[seg.range()].iter_mut().for_each(|b| *b = true);
            }
        }
        m
    };

    let batches_per_epoch = train_idx.len().div_ceil(config.batch_size);
    let total_steps = config.epochs * batches_per_epoch;
    let warmup_steps = libm::round(config.warmup_ratio * total_steps as f64) as usize;

    let mut grads = vec![0.0; n_params];
    let mut m1 = vec![0.0; n_params];
    let mut m2 = vec![0.0; n_params];
    let mut step = 0usize;
    let mut best: Option<(f64, usize, Vec<f64>)> = None;
    let mut final_loss = f64::NAN;

    for epoch in 0..config.epochs {
        train_idx.shuffle(&mut seed::rng(seed::derive(model.seed, "shuffle", epoch as u64)));
        let mut epoch_loss = 0.0;
        for batch in train_idx.chunks(config.batch_size) {
            grads.iter_mut().for_each(|g| *g = 0.0);
            for &i in batch {
                let (seq, target) = &examples[i];
                epoch_loss += ckpt.loss_and_grad(seq, target, &mut grads)?;
            }
            let scale = 1.0 / batch.len() as f64;
            step += 1;
            let lr = if step <= warmup_steps {
                config.learning_rate * step as f64 / warmup_steps as f64
            } else {
                config.learning_rate
            };
            let bc1 = 1.0 - libm::pow(ADAM_BETA1, step as f64);
            let bc2 = 1.0 - libm::pow(ADAM_BETA2, step as f64);
            let params = ckpt.params_mut();
            for i in 0..n_params {
                let g = grads[i] * scale;
                m1[i] = ADAM_BETA1 * m1[i] + (1.0 - ADAM_BETA1) * g;
                m2[i] = ADAM_BETA2 * m2[i] + (1.0 - ADAM_BETA2) * g * g;
                let update = (m1[i] / bc1) / (libm::sqrt(m2[i] / bc2) + ADAM_EPS);
                let decay = if decay_mask[i] {
                    config.weight_decay * params[i]
                } else {
                    0.0
                };
                params[i] -= lr * (update + decay);
            }
        }
        final_loss = epoch_loss / train_idx.len() as f64;

        let selection = if holdout.is_empty() {
            final_loss
        } else {
            let mut total = 0.0;
            for &i in holdout {
                let (seq, target) = &examples[i];
                total += ckpt.loss(seq, target)?;
            }
            total / holdout.len() as f64
        };
        if best.as_ref().is_none_or(|(b, _, _)| selection < *b) {
            best = Some((selection, epoch + 1, ckpt.params().to_vec()));
        }
    }

    let (best_loss, best_epoch, params) = best.expect("at least one epoch ran");
    Checkpoint::new(
        model.clone(),
        params,
        TrainMeta {
            epochs_run: config.epochs,
            best_epoch,
            final_loss,
            best_selection_loss: best_loss,
            seed: model.seed,
        },
    )
}
