//! Mini-batch training with early stopping on validation macro-F1, and
//! prediction.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use super::{adamw_step, softmax, AdamState, AdamW, ModelError, MultiHeadModel, TargetVector};
use crate::embedding::EmbeddingMatrix;
use crate::metrics;
use crate::rng::XorShift64Star;
use crate::split::SplitAssignment;
use crate::taxonomy::LabelSet;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub weight_decay: f64,
    /// Reweight each label inside the cross-entropy by inverse training
    /// frequency.
    pub label_weighting: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            batch_size: 64,
            max_epochs: 10,
            patience: 3,
            seed: 42,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            weight_decay: 0.01,
            label_weighting: false,
        }
    }
}

impl TrainConfig {
    pub fn optimizer(&self) -> AdamW {
        AdamW {
            lr: self.learning_rate,
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            eps: self.adam_eps,
            weight_decay: self.weight_decay,
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let ok = self.learning_rate >= 0.0
            && self.learning_rate.is_finite()
            && self.batch_size > 0
            && self.max_epochs > 0
            && self.adam_beta1 > 0.0
            && self.adam_beta1 < 1.0
            && self.adam_beta2 > 0.0
            && self.adam_beta2 < 1.0
            && self.adam_eps > 0.0
            && self.weight_decay >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(TrainError::InvalidConfig)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrainError {
    #[error("{0} split is empty")]
    EmptySplit(&'static str),
    #[error("non-finite loss at epoch {epoch}, batch {batch} (last finite loss {last_finite:?})")]
    NonFiniteLoss {
        epoch: usize,
        batch: usize,
        last_finite: Option<f64>,
    },
    #[error("no embedding for fact {0:?}")]
    MissingEmbedding(String),
    #[error("{targets} targets for {rows} embedding rows")]
    TargetCount { targets: usize, rows: usize },
    #[error("invalid training configuration")]
    InvalidConfig,
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean loss of the mini-batches seen during the epoch (dropout on).
    pub batch_loss: f64,
    /// Loss over the whole training split in evaluation mode after the
    /// epoch's updates.
    pub train_loss: f64,
    /// Pooled macro-F1 on the validation split.
    pub val_macro_f1: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    /// Parameters from the best validation epoch.
    pub model: MultiHeadModel,
    pub history: Vec<EpochStats>,
    pub best_epoch: usize,
    pub stopped_early: bool,
}

/// Balanced per-label weights `N / (K · count)` over the unmasked training
/// targets, where `K` counts the labels that occur; unseen labels get 1.
pub fn inverse_frequency_weights(targets: &[&TargetVector], label_counts: &[usize]) -> Vec<Vec<f64>> {
    label_counts
        .iter()
        .enumerate()
        .map(|(c, &n)| {
            let mut counts = vec![0usize; n];
            for t in targets {
                if let Some(Some(y)) = t.0.get(c) {
                    counts[*y] += 1;
                }
            }
            let total: usize = counts.iter().sum();
            let present = counts.iter().filter(|&&k| k > 0).count();
            counts
                .iter()
                .map(|&k| {
                    if k == 0 {
                        1.0
                    } else {
                        total as f64 / (present * k) as f64
                    }
                })
                .collect()
        })
        .collect()
}

fn rows_for(embeddings: &EmbeddingMatrix, ids: &[String]) -> Result<Vec<usize>, TrainError> {
    ids.iter()
        .map(|id| embeddings.position(id).ok_or_else(|| TrainError::MissingEmbedding(id.clone())))
        .collect()
}

fn dataset_loss(model: &MultiHeadModel, inputs: &[Vec<f64>], targets: &[&TargetVector]) -> Result<f64, ModelError> {
    let mut total = 0.0;
    for (h, t) in inputs.iter().zip(targets) {
        let logits = model.forward(h, None)?;
        total += model.loss(&logits, t)?;
    }
    Ok(total / inputs.len() as f64)
}

/// Pooled macro-F1 over all unmasked (category, label) pairs.
fn pooled_f1(model: &MultiHeadModel, inputs: &[Vec<f64>], targets: &[&TargetVector]) -> Result<f64, TrainError> {
    let mut gold = Vec::new();
    let mut pred = Vec::new();
    for (h, t) in inputs.iter().zip(targets) {
        let p = predict_one(model, h)?;
        for (c, y) in t.0.iter().enumerate() {
            if let Some(y) = *y {
                gold.push((c, y));
                pred.push((c, p.labels[c]));
            }
        }
    }
    metrics::macro_f1(&gold, &pred).map_err(|_| TrainError::EmptySplit("val"))
}

/// Trains head parameters on the frozen embeddings.
///
/// `targets` align with the rows of `embeddings`; the split names the row
/// ids used for training and validation. Each epoch shuffles the training
/// rows with a generator seeded from `config.seed`, steps AdamW once per
/// mini-batch on the mean batch gradient, then scores validation pooled
/// macro-F1. The best-scoring epoch's parameters are returned; training
/// stops after `patience` epochs without improvement.
pub fn train(
    model: &MultiHeadModel,
    embeddings: &EmbeddingMatrix,
    targets: &[TargetVector],
    split: &SplitAssignment,
    config: &TrainConfig,
) -> Result<TrainOutcome, TrainError> {
    config.validate()?;
    if targets.len() != embeddings.rows() {
        return Err(TrainError::TargetCount {
            targets: targets.len(),
            rows: embeddings.rows(),
        });
    }
    if split.train.is_empty() {
        return Err(TrainError::EmptySplit("train"));
    }
    if split.val.is_empty() {
        return Err(TrainError::EmptySplit("val"));
    }
    let train_rows = rows_for(embeddings, &split.train)?;
    let val_rows = rows_for(embeddings, &split.val)?;
    let train_inputs: Vec<Vec<f64>> = train_rows.iter().map(|&r| embeddings.row_f64(r)).collect();
    let train_targets: Vec<&TargetVector> = train_rows.iter().map(|&r| &targets[r]).collect();
    let val_inputs: Vec<Vec<f64>> = val_rows.iter().map(|&r| embeddings.row_f64(r)).collect();
    let val_targets: Vec<&TargetVector> = val_rows.iter().map(|&r| &targets[r]).collect();
    for t in train_targets.iter().chain(&val_targets) {
        model.check_target(t)?;
    }

    let mut model = model.clone();
    if config.label_weighting {
        let weights = inverse_frequency_weights(&train_targets, &model.label_counts());
        for (cat, w) in model.categories.iter_mut().zip(weights) {
            cat.label_weights = Some(w);
        }
    }

    let optimizer = config.optimizer();
    let mut states: Vec<AdamState> = model.heads.iter().map(|h| AdamState::new(h.params.len())).collect();
    let mut rng = XorShift64Star::derive(config.seed, 0x2);
    let mut order: Vec<usize> = (0..train_inputs.len()).collect();
    let mut history = Vec::new();
    let mut best: Option<(f64, usize, MultiHeadModel)> = None;
    let mut since_best = 0;
    let mut stopped_early = false;
    let mut last_finite = None;

    for epoch in 1..=config.max_epochs {
        rng.shuffle(&mut order);
        let mut loss_sum = 0.0;
        for (batch_no, batch) in order.chunks(config.batch_size).enumerate() {
            let mut grads: Vec<Vec<f64>> = model.heads.iter().map(|h| vec![0.0; h.params.len()]).collect();
            let mut batch_loss = 0.0;
            for &i in batch {
                let (loss, g) = model.backward(&train_inputs[i], train_targets[i], Some(&mut rng))?;
                batch_loss += loss;
                for (acc, gi) in grads.iter_mut().zip(g) {
                    for (a, x) in acc.iter_mut().zip(gi) {
                        *a += x;
                    }
                }
            }
            if !batch_loss.is_finite() {
                return Err(TrainError::NonFiniteLoss {
                    epoch,
                    batch: batch_no,
                    last_finite,
                });
            }
            last_finite = Some(batch_loss / batch.len() as f64);
            loss_sum += batch_loss;
            let inv = 1.0 / batch.len() as f64;
            for ((head, state), g) in model.heads.iter_mut().zip(&mut states).zip(&mut grads) {
                for x in g.iter_mut() {
                    *x *= inv;
                }
                adamw_step(state, &mut head.params, g, &optimizer);
            }
        }

        let train_loss = dataset_loss(&model, &train_inputs, &train_targets)?;
        if !train_loss.is_finite() {
            return Err(TrainError::NonFiniteLoss {
                epoch,
                batch: usize::MAX,
                last_finite,
            });
        }
        let val_macro_f1 = pooled_f1(&model, &val_inputs, &val_targets)?;
        history.push(EpochStats {
            epoch,
            batch_loss: loss_sum / train_inputs.len() as f64,
            train_loss,
            val_macro_f1,
        });

        if best.as_ref().is_none_or(|(score, _, _)| val_macro_f1 > *score) {
            best = Some((val_macro_f1, epoch, model.clone()));
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= config.patience {
                stopped_early = epoch < config.max_epochs;
                break;
            }
        }
    }

    let (_, best_epoch, model) = best.expect("max_epochs > 0 guarantees one epoch");
    Ok(TrainOutcome {
        model,
        history,
        best_epoch,
        stopped_early,
    })
}

/// Arg-max label and its softmax probability for every category.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub labels: Vec<usize>,
    pub confidences: Vec<f64>,
}

impl Prediction {
    /// Interprets the prediction in the seven-dimension taxonomy. Only
    /// meaningful for models where `is_taxonomy()` holds. Heads are read
    /// independently: the result may break label-set invariants (e.g. an
    /// invalidity reason on a valid fact).
    pub fn to_labelset(&self) -> Option<LabelSet> {
        LabelSet::from_indices(&self.labels)
    }
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn predict_one(model: &MultiHeadModel, h: &[f64]) -> Result<Prediction, ModelError> {
    let logits = model.forward(h, None)?;
    let mut labels = Vec::with_capacity(logits.len());
    let mut confidences = Vec::with_capacity(logits.len());
    for l in &logits {
        let p = softmax(l);
        let best = argmax(l);
        labels.push(best);
        confidences.push(p[best]);
    }
    Ok(Prediction { labels, confidences })
}

/// Evaluation-mode predictions for every row; ties go to the lowest label
/// index.
pub fn predict(model: &MultiHeadModel, embeddings: &EmbeddingMatrix) -> Result<Vec<Prediction>, ModelError> {
    if embeddings.dim() != model.dim {
        return Err(ModelError::DimensionMismatch {
            expected: model.dim,
            actual: embeddings.dim(),
        });
    }
    (0..embeddings.rows())
        .map(|i| predict_one(model, &embeddings.row_f64(i)))
        .collect()
}
