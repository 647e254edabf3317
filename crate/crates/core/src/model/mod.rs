//! Multi-head classifier over frozen text embeddings.
//!
//! Every category `c` owns an independent two-layer head:
//!
//! ```text
//! z_c  = dropout(h)
//! t_c  = tanh(W1_c z_c + b1_c)
//! l_c  = W2_c dropout(t_c) + b2_c
//! ```
//!
//! and training minimises the masked weighted cross-entropy
//! `L = (1/|V|) Σ_{c∈V} w_c · CE(l_c, y_c)` where `V` holds the categories
//! whose target is not masked. Dropout uses the inverted convention: kept
//! activations are scaled by `1/(1-p)` during training and evaluation is the
//! identity.

mod optim;
mod train;

pub use optim::{adamw_step, AdamState, AdamW};
pub use train::{
    inverse_frequency_weights, predict, train, EpochStats, Prediction, TrainConfig, TrainError, TrainOutcome,
};

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::rng::XorShift64Star;
use crate::taxonomy::Dimension;

pub const DEFAULT_DROPOUT: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("input has {actual} features, model expects {expected}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("expected {expected} per-category entries, got {actual}")]
    CategoryCountMismatch { expected: usize, actual: usize },
    #[error("category {category}: label {label} outside 0..{count}")]
    LabelOutOfRange { category: usize, label: usize, count: usize },
    #[error("category {category}: expected {expected} logits, got {actual}")]
    LogitShape { category: usize, expected: usize, actual: usize },
    #[error("invalid model configuration: {0}")]
    InvalidConfig(&'static str),
}

/// Per-category target: a label index, or `None` for a masked category.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TargetVector(pub Vec<Option<usize>>);

impl TargetVector {
    pub fn masked(categories: usize) -> Self {
        TargetVector(vec![None; categories])
    }

    pub fn from_labels(labels: &[usize]) -> Self {
        TargetVector(labels.iter().map(|&l| Some(l)).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn active(&self) -> usize {
        self.0.iter().filter(|t| t.is_some()).count()
    }
}

/// Description of one classification category.
#[derive(Debug, Clone, PartialEq)]
pub struct Category {
    pub name: String,
    pub labels: Vec<String>,
    /// `w_c` in the loss.
    pub weight: f64,
    /// Optional per-label multipliers applied inside the cross-entropy.
    pub label_weights: Option<Vec<f64>>,
}

impl Category {
    pub fn new(name: impl Into<String>, labels: Vec<String>) -> Self {
        Category {
            name: name.into(),
            labels,
            weight: 1.0,
            label_weights: None,
        }
    }

    /// Anonymous category with `n` labels named `0..n`.
    pub fn with_size(name: impl Into<String>, n: usize) -> Self {
        Category::new(name, (0..n).map(|i| i.to_string()).collect())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Parameters of one head stored in a single buffer laid out as
/// `W1 (hidden×dim, row-major) | b1 (hidden) | W2 (outputs×hidden,
/// row-major) | b2 (outputs)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Head {
    pub dim: usize,
    pub hidden: usize,
    pub outputs: usize,
    pub params: Vec<f64>,
}

impl Head {
    pub fn zeros(dim: usize, hidden: usize, outputs: usize) -> Self {
        Head {
            dim,
            hidden,
            outputs,
            params: vec![0.0; Self::param_count(dim, hidden, outputs)],
        }
    }

    pub fn param_count(dim: usize, hidden: usize, outputs: usize) -> usize {
        hidden * dim + hidden + outputs * hidden + outputs
    }

    fn offsets(&self) -> (usize, usize, usize) {
        let b1 = self.hidden * self.dim;
        let w2 = b1 + self.hidden;
        let b2 = w2 + self.outputs * self.hidden;
        (b1, w2, b2)
    }

    pub fn w1(&self) -> &[f64] {
        &self.params[..self.hidden * self.dim]
    }

    pub fn b1(&self) -> &[f64] {
        let (b1, w2, _) = self.offsets();
        &self.params[b1..w2]
    }

    pub fn w2(&self) -> &[f64] {
        let (_, w2, b2) = self.offsets();
        &self.params[w2..b2]
    }

    pub fn b2(&self) -> &[f64] {
        let (_, _, b2) = self.offsets();
        &self.params[b2..]
    }

    /// Weights uniform in `±1/sqrt(fan_in)`, biases zero.
    fn init(&mut self, rng: &mut XorShift64Star) {
        let (b1, w2, b2) = self.offsets();
        let limit1 = 1.0 / libm::sqrt(self.dim as f64);
        let limit2 = 1.0 / libm::sqrt(self.hidden as f64);
        for p in &mut self.params[..b1] {
            *p = rng.symmetric(limit1);
        }
        for p in &mut self.params[w2..b2] {
            *p = rng.symmetric(limit2);
        }
    }
}

/// Shared-input classifier with one head per category.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiHeadModel {
    pub dim: usize,
    pub hidden: usize,
    pub dropout: f64,
    pub categories: Vec<Category>,
    pub heads: Vec<Head>,
}

/// Activations kept from a forward pass for backpropagation.
#[derive(Debug, Clone)]
pub struct HeadCache {
    /// Input after dropout.
    pub z: Vec<f64>,
    /// `tanh` activations before the second dropout.
    pub t: Vec<f64>,
    /// Second-dropout multipliers (0 or 1/(1-p)); empty in eval mode.
    pub mask2: Vec<f64>,
    /// Hidden activations after dropout.
    pub u: Vec<f64>,
    pub logits: Vec<f64>,
}

impl MultiHeadModel {
    /// Randomly initialised model. `hidden == 0` selects `hidden = dim`.
    pub fn new(
        dim: usize,
        hidden: usize,
        categories: Vec<Category>,
        dropout: f64,
        seed: u64,
    ) -> Result<Self, ModelError> {
        let mut model = Self::zeros(dim, hidden, categories, dropout)?;
        let mut rng = XorShift64Star::derive(seed, 0x1);
        for head in &mut model.heads {
            head.init(&mut rng);
        }
        Ok(model)
    }

    /// All-zero parameters.
    pub fn zeros(dim: usize, hidden: usize, categories: Vec<Category>, dropout: f64) -> Result<Self, ModelError> {
        if dim == 0 {
            return Err(ModelError::InvalidConfig("embedding dimension must be positive"));
        }
        if categories.is_empty() || categories.iter().any(|c| c.is_empty()) {
            return Err(ModelError::InvalidConfig("every category needs at least one label"));
        }
        if !(0.0..1.0).contains(&dropout) {
            return Err(ModelError::InvalidConfig("dropout must lie in [0, 1)"));
        }
        if categories.iter().any(|c| !(c.weight >= 0.0 && c.weight.is_finite())) {
            return Err(ModelError::InvalidConfig("category weights must be finite and nonnegative"));
        }
        let hidden = if hidden == 0 { dim } else { hidden };
        let heads = categories.iter().map(|c| Head::zeros(dim, hidden, c.len())).collect();
        Ok(MultiHeadModel {
            dim,
            hidden,
            dropout,
            categories,
            heads,
        })
    }

    /// The seven-dimension taxonomy with `hidden = dim`, dropout 0.1 and
    /// unit category weights.
    pub fn for_taxonomy(dim: usize, seed: u64) -> Result<Self, ModelError> {
        Self::new(dim, dim, taxonomy_categories(), DEFAULT_DROPOUT, seed)
    }

    pub fn category_count(&self) -> usize {
        self.categories.len()
    }

    pub fn label_counts(&self) -> Vec<usize> {
        self.categories.iter().map(Category::len).collect()
    }

    pub fn param_count(&self) -> usize {
        self.heads.iter().map(|h| h.params.len()).sum()
    }

    /// True when the categories are exactly the seven taxonomy dimensions,
    /// in order, with canonical label lists.
    pub fn is_taxonomy(&self) -> bool {
        self.categories.len() == Dimension::COUNT
            && self.categories.iter().zip(Dimension::ALL).all(|(c, d)| {
                c.name == d.name() && c.labels.iter().map(String::as_str).eq(d.labels().iter().copied())
            })
    }

    fn check_input(&self, h: &[f64]) -> Result<(), ModelError> {
        if h.len() != self.dim {
            return Err(ModelError::DimensionMismatch {
                expected: self.dim,
                actual: h.len(),
            });
        }
        Ok(())
    }

    fn dropout_mask(&self, len: usize, rng: &mut XorShift64Star) -> Vec<f64> {
        let keep = 1.0 - self.dropout;
        (0..len)
            .map(|_| if rng.next_f64() < self.dropout { 0.0 } else { 1.0 / keep })
            .collect()
    }

    fn forward_head(&self, c: usize, h: &[f64], rng: Option<&mut XorShift64Star>) -> HeadCache {
        let head = &self.heads[c];
        let (mask1, mask2) = match rng {
            Some(rng) if self.dropout > 0.0 => (self.dropout_mask(self.dim, rng), self.dropout_mask(head.hidden, rng)),
            _ => (Vec::new(), Vec::new()),
        };
        let z: Vec<f64> = if mask1.is_empty() {
            h.to_vec()
        } else {
            h.iter().zip(&mask1).map(|(x, m)| x * m).collect()
        };
        let t: Vec<f64> = head
            .w1()
            .chunks_exact(self.dim)
            .zip(head.b1())
            .map(|(row, b)| libm::tanh(dot(row, &z) + b))
            .collect();
        let u: Vec<f64> = if mask2.is_empty() {
            t.clone()
        } else {
            t.iter().zip(&mask2).map(|(x, m)| x * m).collect()
        };
        let logits = head
            .w2()
            .chunks_exact(head.hidden)
            .zip(head.b2())
            .map(|(row, b)| dot(row, &u) + b)
            .collect();
        HeadCache {
            z,
            t,
            mask2,
            u,
            logits,
        }
    }

    /// Full forward pass keeping intermediate activations. Passing an RNG
    /// enables training-mode dropout.
    pub fn forward_cached(
        &self,
        h: &[f64],
        mut rng: Option<&mut XorShift64Star>,
    ) -> Result<Vec<HeadCache>, ModelError> {
        self.check_input(h)?;
        Ok((0..self.heads.len())
            .map(|c| self.forward_head(c, h, rng.as_deref_mut()))
            .collect())
    }

    /// Per-category logits; `rng = None` is evaluation mode.
    pub fn forward(&self, h: &[f64], rng: Option<&mut XorShift64Star>) -> Result<Vec<Vec<f64>>, ModelError> {
        Ok(self.forward_cached(h, rng)?.into_iter().map(|c| c.logits).collect())
    }

    fn check_target(&self, target: &TargetVector) -> Result<(), ModelError> {
        if target.len() != self.categories.len() {
            return Err(ModelError::CategoryCountMismatch {
                expected: self.categories.len(),
                actual: target.len(),
            });
        }
        for (c, (t, cat)) in target.0.iter().zip(&self.categories).enumerate() {
            if let Some(label) = *t {
                if label >= cat.len() {
                    return Err(ModelError::LabelOutOfRange {
                        category: c,
                        label,
                        count: cat.len(),
                    });
                }
            }
        }
        Ok(())
    }

    fn example_weight(&self, c: usize, label: usize) -> f64 {
        let cat = &self.categories[c];
        cat.weight * cat.label_weights.as_ref().map_or(1.0, |w| w[label])
    }

    /// Masked weighted cross-entropy; 0 when every category is masked.
    pub fn loss(&self, logits: &[Vec<f64>], target: &TargetVector) -> Result<f64, ModelError> {
        self.check_target(target)?;
        if logits.len() != self.categories.len() {
            return Err(ModelError::CategoryCountMismatch {
                expected: self.categories.len(),
                actual: logits.len(),
            });
        }
        let active = target.active();
        if active == 0 {
            return Ok(0.0);
        }
        let mut total = 0.0;
        for (c, (l, t)) in logits.iter().zip(&target.0).enumerate() {
            if l.len() != self.categories[c].len() {
                return Err(ModelError::LogitShape {
                    category: c,
                    expected: self.categories[c].len(),
                    actual: l.len(),
                });
            }
            if let Some(y) = *t {
                total += self.example_weight(c, y) * cross_entropy(l, y);
            }
        }
        Ok(total / active as f64)
    }

    /// Loss and exact parameter gradients for one example. Gradients share
    /// the layout of `Head::params`; masked categories get all-zero
    /// gradients.
    pub fn backward(
        &self,
        h: &[f64],
        target: &TargetVector,
        rng: Option<&mut XorShift64Star>,
    ) -> Result<(f64, Vec<Vec<f64>>), ModelError> {
        self.check_target(target)?;
        let caches = self.forward_cached(h, rng)?;
        let logits: Vec<Vec<f64>> = caches.iter().map(|c| c.logits.clone()).collect();
        let loss = self.loss(&logits, target)?;
        let active = target.active();
        let mut grads: Vec<Vec<f64>> = self.heads.iter().map(|head| vec![0.0; head.params.len()]).collect();
        for (c, (cache, t)) in caches.iter().zip(&target.0).enumerate() {
            let Some(y) = *t else { continue };
            let head = &self.heads[c];
            let scale = self.example_weight(c, y) / active as f64;
            let mut g_logits = softmax(&cache.logits);
            g_logits[y] -= 1.0;
            for g in &mut g_logits {
                *g *= scale;
            }
            let (b1_off, w2_off, b2_off) = head.offsets();
            let grad = &mut grads[c];
            // Output layer.
            for (k, &g) in g_logits.iter().enumerate() {
                for (j, &u) in cache.u.iter().enumerate() {
                    grad[w2_off + k * head.hidden + j] = g * u;
                }
                grad[b2_off + k] = g;
            }
            // Back through dropout and tanh.
            let w2 = head.w2();
            for j in 0..head.hidden {
                let mut du = 0.0;
                for (k, &g) in g_logits.iter().enumerate() {
                    du += w2[k * head.hidden + j] * g;
                }
                let dt = if cache.mask2.is_empty() { du } else { du * cache.mask2[j] };
                let da = dt * (1.0 - cache.t[j] * cache.t[j]);
                for (i, &z) in cache.z.iter().enumerate() {
                    grad[j * head.dim + i] = da * z;
                }
                grad[b1_off + j] = da;
            }
        }
        Ok((loss, grads))
    }
}

/// Categories of the seven-dimension taxonomy.
pub fn taxonomy_categories() -> Vec<Category> {
    Dimension::ALL
        .iter()
        .map(|d| Category::new(d.name(), d.labels().iter().map(|s| s.to_string()).collect()))
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn log_sum_exp(logits: &[f64]) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + libm::log(logits.iter().map(|l| libm::exp(l - max)).sum::<f64>())
}

/// `-log softmax(logits)[label]`.
pub fn cross_entropy(logits: &[f64], label: usize) -> f64 {
    log_sum_exp(logits) - logits[label]
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| libm::exp(l - max)).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}
