//! Supervised training loop: seeded shuffles, mini-batch mean
//! cross-entropy, momentum SGD with the step-halving schedule, and
//! best-validation-epoch checkpoint selection.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::clip::{self, Clip, PreprocessConfig};
use crate::error::{Error, Result};
use crate::model::{self, ModelConfig, ModelParams, NUM_CLASSES};
use crate::ops;
use crate::rng::Rng;
use crate::sgd::{sgd_step, SgdConfig};
use crate::synth::{self, MotionType, Split, SynthConfig};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub base_lr: f64,
    /// The learning rate halves after completing each listed epoch.
    pub halve_epochs: Vec<usize>,
    pub total_epochs: usize,
    pub momentum: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            base_lr: 0.001,
            halve_epochs: vec![20, 40],
            total_epochs: 60,
            momentum: 0.9,
            weight_decay: 5e-5,
            batch_size: 16,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.base_lr > 0.0) {
            return Err(Error::Config("base_lr must be positive".into()));
        }
        if self.batch_size == 0 || self.total_epochs == 0 {
            return Err(Error::Config("batch_size and total_epochs must be positive".into()));
        }
        if self.halve_epochs.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::Config("halve_epochs must be sorted".into()));
        }
        Ok(())
    }
}

/// Learning rate for a given epoch: the base rate halved once per
/// schedule entry already completed (the drop takes effect on the epoch
/// after the listed one).
pub fn lr_at_epoch(cfg: &TrainConfig, epoch: usize) -> f64 {
    let halvings = cfg.halve_epochs.iter().filter(|&&h| h < epoch).count();
    cfg.base_lr * libm::pow(0.5, halvings as f64)
}

#[derive(Debug, Clone)]
pub struct LabeledClip {
    pub clip: Clip,
    pub label: MotionType,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_acc: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Metrics {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_acc: f64,
    /// Confusion of the selected checkpoint on the validation split,
    /// rows = true class, columns = predicted.
    pub confusion: [[usize; NUM_CLASSES]; NUM_CLASSES],
}

fn check_split(split: &[LabeledClip], name: &str) -> Result<()> {
    if split.is_empty() {
        return Err(Error::Dataset(format!("{name} split is empty")));
    }
    Ok(())
}

/// Train the segment model. Returns the parameters of the epoch with
/// the best validation accuracy (ties resolved toward the later epoch)
/// and per-epoch metrics.
pub fn train(
    model_cfg: &ModelConfig,
    train_split: &[LabeledClip],
    val_split: &[LabeledClip],
    cfg: &TrainConfig,
    pre_train: &PreprocessConfig,
    pre_eval: &PreprocessConfig,
) -> Result<(ModelParams<f32>, Metrics)> {
    cfg.validate()?;
    model_cfg.validate()?;
    check_split(train_split, "train")?;
    check_split(val_split, "val")?;
    let mut present = [false; NUM_CLASSES];
    for lc in train_split {
        present[lc.label.code() as usize] = true;
    }
    if present.iter().any(|p| !p) {
        return Err(Error::Dataset("train split is missing at least one class".into()));
    }

    let mut rng = Rng::new(cfg.seed);
    let mut params = ModelParams::<f32>::init(model_cfg, &mut rng)?;
    let mut best_params = params.clone();
    let mut best_val = -1.0f64;
    let mut best_epoch = 0usize;
    let mut records = Vec::with_capacity(cfg.total_epochs);

    let mut order: Vec<usize> = (0..train_split.len()).collect();
    for epoch in 0..cfg.total_epochs {
        let lr = lr_at_epoch(cfg, epoch);
        let sgd_cfg = SgdConfig {
            learning_rate: lr,
            momentum: cfg.momentum,
            weight_decay: cfg.weight_decay,
        };
        rng.shuffle(&mut order);
        let mut loss_sum = 0.0f64;
        let mut correct = 0usize;
        for (batch_idx, batch) in order.chunks(cfg.batch_size).enumerate() {
            params.zero_grads();
            let scale = 1.0 / batch.len() as f64;
            for &i in batch {
                let lc = &train_split[i];
                let indices = clip::sample_segments(&lc.clip, model_cfg.segments)?;
                let input = clip::preprocess(&lc.clip, &indices, pre_train, &mut rng)?;
                let cache = model::forward_cached(&input, &params, model_cfg)?;
                let target = lc.label.code() as usize;
                let (loss, probs) = ops::softmax_cross_entropy(&cache.logits, target)?;
                if !loss.is_finite() {
                    return Err(Error::Divergence { epoch, batch: batch_idx });
                }
                loss_sum += loss as f64;
                if probs.argmax() == target {
                    correct += 1;
                }
                let grad_logits = ops::softmax_cross_entropy_backward(&probs, target);
                model::backward(&cache, &grad_logits, &mut params, model_cfg, scale)?;
            }
            sgd_step(&mut params.params, &sgd_cfg)?;
        }
        let (val_acc, _) = evaluate(&params, val_split, model_cfg, pre_eval)?;
        records.push(EpochRecord {
            epoch,
            lr,
            train_loss: loss_sum / train_split.len() as f64,
            train_acc: correct as f64 / train_split.len() as f64,
            val_acc,
        });
        if val_acc >= best_val {
            best_val = val_acc;
            best_epoch = epoch;
            best_params = params.clone();
        }
    }
    let (_, confusion) = evaluate(&best_params, val_split, model_cfg, pre_eval)?;
    Ok((
        best_params,
        Metrics {
            epochs: records,
            best_epoch,
            best_val_acc: best_val,
            confusion,
        },
    ))
}

/// Top-1 accuracy and confusion matrix over a split, eval-mode
/// preprocessing.
pub fn evaluate(
    params: &ModelParams<f32>,
    split: &[LabeledClip],
    model_cfg: &ModelConfig,
    pre_eval: &PreprocessConfig,
) -> Result<(f64, [[usize; NUM_CLASSES]; NUM_CLASSES])> {
    check_split(split, "eval")?;
    let mut confusion = [[0usize; NUM_CLASSES]; NUM_CLASSES];
    for lc in split {
        let (pred, _) = model::predict(&lc.clip, params, model_cfg, pre_eval)?;
        confusion[lc.label.code() as usize][pred.code() as usize] += 1;
    }
    let correct: usize = (0..NUM_CLASSES).map(|i| confusion[i][i]).sum();
    Ok((correct as f64 / split.len() as f64, confusion))
}

/// Generate the synthetic corpus in memory, already split.
/// Returns [train, val, test].
pub fn synth_splits(
    cfg: &SynthConfig,
    fractions: (f64, f64, f64),
) -> Result<[Vec<LabeledClip>; 3]> {
    let plan = synth::dataset_plan(cfg, fractions)?;
    let mut out: [Vec<LabeledClip>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    for entry in plan {
        let clip = synth::gen_clip(entry.class, cfg, entry.index)?;
        let slot = match entry.split {
            Split::Train => 0,
            Split::Val => 1,
            Split::Test => 2,
        };
        out[slot].push(LabeledClip { clip, label: entry.class });
    }
    Ok(out)
}
