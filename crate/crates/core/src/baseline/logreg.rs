//! Multinomial logistic regression on sparse features, trained by seeded
//! mini-batch gradient descent with L2 regularization.
//!
//! The objective is `(1/N) Σ s_i CE_i + (λ/2)‖W‖²` where `s_i` is the sample
//! weight (1, or `N / (K · count(y_i))` with class balancing). Biases are not
//! regularized. Weight decay is applied lazily through a global scale factor
//! so each step only touches the features present in the batch.

use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use super::tfidf::SparseVec;
use crate::rng::XorShift64Star;

#[derive(Debug, Clone, PartialEq)]
pub struct LogRegConfig {
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub l2: f64,
    pub class_balanced: bool,
    pub seed: u64,
    /// Stop once the epoch objective changes by less than this.
    pub tol: f64,
}

impl Default for LogRegConfig {
    fn default() -> Self {
        LogRegConfig {
            lr: 0.5,
            epochs: 500,
            batch_size: 64,
            l2: 1e-4,
            class_balanced: true,
            seed: 42,
            tol: 1e-7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LogRegError {
    #[error("{x} feature rows but {y} labels")]
    LengthMismatch { x: usize, y: usize },
    #[error("no training data")]
    EmptyInput,
    #[error("label {label} outside 0..{classes}")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("feature column {column} outside 0..{features}")]
    FeatureOutOfRange { column: usize, features: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(&'static str),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub n_classes: usize,
    pub n_features: usize,
    /// `n_classes × n_features`, row-major.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl LinearModel {
    pub fn zeros(n_classes: usize, n_features: usize) -> Self {
        LinearModel {
            n_classes,
            n_features,
            weights: vec![0.0; n_classes * n_features],
            bias: vec![0.0; n_classes],
        }
    }

    pub fn scores(&self, x: &SparseVec) -> Vec<f64> {
        (0..self.n_classes)
            .map(|k| {
                let row = &self.weights[k * self.n_features..(k + 1) * self.n_features];
                self.bias[k] + x.iter().map(|&(j, v)| row[j] * v).sum::<f64>()
            })
            .collect()
    }

    /// Arg-max class; ties go to the lowest index.
    pub fn predict(&self, x: &SparseVec) -> usize {
        let s = self.scores(x);
        let mut best = 0;
        for k in 1..s.len() {
            if s[k] > s[best] {
                best = k;
            }
        }
        best
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitStatus {
    Converged,
    MaxEpochs,
    /// Only one class in the training labels: the model always predicts it.
    SingleClass,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogRegOutcome {
    pub model: LinearModel,
    pub status: FitStatus,
    /// Objective after each epoch.
    pub loss_history: Vec<f64>,
}

/// Sample weights `N / (K · count(y_i))` over the `K` classes present.
pub fn balanced_weights(y: &[usize], n_classes: usize) -> Vec<f64> {
    let mut counts = vec![0usize; n_classes];
    for &l in y {
        counts[l] += 1;
    }
    let present = counts.iter().filter(|&&c| c > 0).count();
    y.iter()
        .map(|&l| y.len() as f64 / (present * counts[l]) as f64)
        .collect()
}

fn softmax_in_place(s: &mut [f64]) {
    let max = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in s.iter_mut() {
        *v = libm::exp(*v - max);
        sum += *v;
    }
    for v in s.iter_mut() {
        *v /= sum;
    }
}

struct Scaled {
    model: LinearModel,
    scale: f64,
}

impl Scaled {
    fn scores(&self, x: &SparseVec) -> Vec<f64> {
        let f = self.model.n_features;
        (0..self.model.n_classes)
            .map(|k| {
                let row = &self.model.weights[k * f..(k + 1) * f];
                self.model.bias[k] + self.scale * x.iter().map(|&(j, v)| row[j] * v).sum::<f64>()
            })
            .collect()
    }

    fn objective(&self, x: &[SparseVec], y: &[usize], w: &[f64], l2: f64) -> f64 {
        let mut data = 0.0;
        for ((xi, &yi), &wi) in x.iter().zip(y).zip(w) {
            let s = self.scores(xi);
            let max = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + libm::log(s.iter().map(|v| libm::exp(v - max)).sum::<f64>());
            data += wi * (lse - s[yi]);
        }
        let norm_sq: f64 = self.model.weights.iter().map(|v| v * v).sum::<f64>() * self.scale * self.scale;
        data / x.len() as f64 + 0.5 * l2 * norm_sq
    }

    fn into_model(mut self) -> LinearModel {
        for v in &mut self.model.weights {
            *v *= self.scale;
        }
        self.model
    }
}

pub fn logreg_train(
    x: &[SparseVec],
    y: &[usize],
    n_classes: usize,
    n_features: usize,
    cfg: &LogRegConfig,
) -> Result<LogRegOutcome, LogRegError> {
    if x.len() != y.len() {
        return Err(LogRegError::LengthMismatch { x: x.len(), y: y.len() });
    }
    if x.is_empty() {
        return Err(LogRegError::EmptyInput);
    }
    if let Some(&label) = y.iter().find(|&&l| l >= n_classes) {
        return Err(LogRegError::LabelOutOfRange {
            label,
            classes: n_classes,
        });
    }
    if let Some(&(column, _)) = x.iter().flatten().find(|(j, _)| *j >= n_features) {
        return Err(LogRegError::FeatureOutOfRange {
            column,
            features: n_features,
        });
    }
    if cfg.batch_size == 0 || cfg.lr.is_nan() || cfg.lr < 0.0 || cfg.l2.is_nan() || cfg.l2 < 0.0 || cfg.lr * cfg.l2 >= 1.0 {
        return Err(LogRegError::InvalidConfig("need batch_size > 0, lr ≥ 0, l2 ≥ 0 and lr·l2 < 1"));
    }

    if y.iter().all(|&l| l == y[0]) {
        let mut model = LinearModel::zeros(n_classes, n_features);
        model.bias[y[0]] = 1.0;
        return Ok(LogRegOutcome {
            model,
            status: FitStatus::SingleClass,
            loss_history: Vec::new(),
        });
    }

    let sample_w = if cfg.class_balanced {
        balanced_weights(y, n_classes)
    } else {
        vec![1.0; y.len()]
    };
    let mut state = Scaled {
        model: LinearModel::zeros(n_classes, n_features),
        scale: 1.0,
    };
    let mut rng = XorShift64Star::new(cfg.seed);
    let mut order: Vec<usize> = (0..x.len()).collect();
    let mut history = Vec::new();
    let mut status = FitStatus::MaxEpochs;
    let mut previous = state.objective(x, y, &sample_w, cfg.l2);
    let decay = 1.0 - cfg.lr * cfg.l2;

    for _ in 0..cfg.epochs {
        rng.shuffle(&mut order);
        for batch in order.chunks(cfg.batch_size) {
            let step = cfg.lr / batch.len() as f64;
            // Gradients from the pre-step weights, then decay, then apply.
            let mut updates: Vec<(usize, Vec<f64>)> = Vec::with_capacity(batch.len());
            for &i in batch {
                let mut p = state.scores(&x[i]);
                softmax_in_place(&mut p);
                p[y[i]] -= 1.0;
                for v in &mut p {
                    *v *= sample_w[i];
                }
                updates.push((i, p));
            }
            state.scale *= decay;
            let f = n_features;
            for (i, g) in updates {
                for (k, gk) in g.iter().enumerate() {
                    state.model.bias[k] -= step * gk;
                    let row = &mut state.model.weights[k * f..(k + 1) * f];
                    for &(j, v) in &x[i] {
                        row[j] -= step * gk * v / state.scale;
                    }
                }
            }
            if state.scale < 1e-9 {
                for v in &mut state.model.weights {
                    *v *= state.scale;
                }
                state.scale = 1.0;
            }
        }
        let current = state.objective(x, y, &sample_w, cfg.l2);
        history.push(current);
        if (previous - current).abs() < cfg.tol {
            status = FitStatus::Converged;
            break;
        }
        previous = current;
    }

    Ok(LogRegOutcome {
        model: state.into_model(),
        status,
        loss_history: history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn separable() -> (Vec<SparseVec>, Vec<usize>) {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..20 {
            let t = i as f64 / 20.0;
            if i % 2 == 0 {
                x.push(vec![(0, 1.0), (2, t)]);
                y.push(0);
            } else {
                x.push(vec![(1, 1.0), (2, t)]);
                y.push(1);
            }
        }
        (x, y)
    }

    #[test]
    fn separable_reaches_full_accuracy() {
        let (x, y) = separable();
        let out = logreg_train(&x, &y, 2, 3, &LogRegConfig { epochs: 200, ..LogRegConfig::default() }).unwrap();
        assert!(x.iter().zip(&y).all(|(xi, &yi)| out.model.predict(xi) == yi));
    }

    #[test]
    fn full_batch_loss_never_increases() {
        let (x, y) = separable();
        let cfg = LogRegConfig {
            lr: 0.1,
            batch_size: x.len(),
            epochs: 100,
            ..LogRegConfig::default()
        };
        let out = logreg_train(&x, &y, 2, 3, &cfg).unwrap();
        for w in out.loss_history.windows(2) {
            assert!(w[1] <= w[0] + 1e-15, "{w:?}");
        }
    }

    #[test]
    fn zero_lr_keeps_init() {
        let (x, y) = separable();
        let out = logreg_train(&x, &y, 2, 3, &LogRegConfig { lr: 0.0, epochs: 3, ..LogRegConfig::default() }).unwrap();
        assert_eq!(out.model, LinearModel::zeros(2, 3));
    }

    #[test]
    fn balanced_weight_ratio() {
        let y: Vec<usize> = (0..100).map(|i| usize::from(i >= 90)).collect();
        let w = balanced_weights(&y, 2);
        assert!((w[95] / w[0] - 9.0).abs() < 1e-12);
    }

    #[test]
    fn single_class_is_constant() {
        let x = vec![vec![(0, 1.0)], vec![(1, 1.0)]];
        let out = logreg_train(&x, &[2, 2], 3, 2, &LogRegConfig::default()).unwrap();
        assert_eq!(out.status, FitStatus::SingleClass);
        assert!(x.iter().all(|xi| out.model.predict(xi) == 2));
    }
}
