//! TOML run configuration shared by every subcommand.
//!
//! Every key is optional; missing keys take the defaults below.
//!
//! ```toml
//! seeds = [42, 123, 456, 789, 1024]
//!
//! [split]
//! parts = [70, 10, 20]
//! seed = 42
//! stratify_by = "main_category"
//!
//! [train]
//! learning_rate = 0.001
//! batch_size = 64
//! max_epochs = 10
//! patience = 3
//! weight_decay = 0.01
//! label_weighting = false
//! hidden = 0          # 0 means "same as the embedding dimension"
//! dropout = 0.1
//!
//! [sampling]
//! k = 1000
//! cap = 3
//!
//! [embedding]
//! mode = "file"       # or "http"
//! endpoint = "http://localhost:8080"
//! batch_size = 64
//! timeout_secs = 30
//! retries = 3
//! ```

use std::collections::BTreeSet;
use std::path::Path;
use std::time::Duration;

use factkit_core::baseline::{LogRegConfig, TfidfConfig};
use factkit_core::split::SplitSpec;
use factkit_core::taxonomy::Dimension;
use factkit_core::TrainConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::provider::HttpProvider;

pub const DEFAULT_SEEDS: [u64; 5] = [42, 123, 456, 789, 1024];

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {message}")]
    Read { path: String, message: String },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seeds: Vec<u64>,
    pub split: SplitSection,
    pub train: TrainSection,
    pub sampling: SamplingSection,
    pub embedding: EmbeddingSection,
    pub baseline: BaselineSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seeds: DEFAULT_SEEDS.to_vec(),
            split: SplitSection::default(),
            train: TrainSection::default(),
            sampling: SamplingSection::default(),
            embedding: EmbeddingSection::default(),
            baseline: BaselineSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSection {
    pub parts: [u64; 3],
    pub seed: u64,
    pub stratify_by: String,
}

impl Default for SplitSection {
    fn default() -> Self {
        SplitSection {
            parts: [70, 10, 20],
            seed: 42,
            stratify_by: Dimension::MainCategory.key().to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub weight_decay: f64,
    pub label_weighting: bool,
    pub hidden: usize,
    pub dropout: f64,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        TrainSection {
            learning_rate: t.learning_rate,
            batch_size: t.batch_size,
            max_epochs: t.max_epochs,
            patience: t.patience,
            adam_beta1: t.adam_beta1,
            adam_beta2: t.adam_beta2,
            adam_eps: t.adam_eps,
            weight_decay: t.weight_decay,
            label_weighting: t.label_weighting,
            hidden: 0,
            dropout: factkit_core::model::DEFAULT_DROPOUT,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingSection {
    pub k: usize,
    pub cap: usize,
    pub seed: u64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for SamplingSection {
    fn default() -> Self {
        use factkit_core::kmeans::*;
        SamplingSection {
            k: DEFAULT_K,
            cap: DEFAULT_CAP,
            seed: 42,
            max_iter: DEFAULT_MAX_ITER,
            tol: DEFAULT_TOL,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum EmbeddingMode {
    #[default]
    File,
    Http,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbeddingSection {
    pub mode: EmbeddingMode,
    pub path: Option<String>,
    pub endpoint: Option<String>,
    pub batch_size: usize,
    pub timeout_secs: u64,
    pub retries: u32,
}

impl Default for EmbeddingSection {
    fn default() -> Self {
        EmbeddingSection {
            mode: EmbeddingMode::File,
            path: None,
            endpoint: None,
            batch_size: 64,
            timeout_secs: 30,
            retries: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineSection {
    pub ngram_max: usize,
    pub min_df: usize,
    pub max_df: f64,
    pub max_features: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub l2: f64,
    pub class_balanced: bool,
    pub tol: f64,
}

impl Default for BaselineSection {
    fn default() -> Self {
        let t = TfidfConfig::default();
        let l = LogRegConfig::default();
        BaselineSection {
            ngram_max: t.ngram_range.1,
            min_df: t.min_df,
            max_df: t.max_df,
            max_features: t.max_features,
            learning_rate: l.lr,
            epochs: l.epochs,
            batch_size: l.batch_size,
            l2: l.l2,
            class_balanced: l.class_balanced,
            tol: l.tol,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let config: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Invalid(e.message().to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_toml(&text).map_err(|e| ConfigError::Read {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.seeds.is_empty() {
            return Err(ConfigError::Invalid("seeds must not be empty".into()));
        }
        if self.seeds.iter().collect::<BTreeSet<_>>().len() != self.seeds.len() {
            return Err(ConfigError::Invalid("seeds must be distinct".into()));
        }
        if self.split.parts.iter().sum::<u64>() == 0 {
            return Err(ConfigError::Invalid("split.parts must not all be zero".into()));
        }
        self.stratify_by()?;
        self.train_config(0)
            .validate()
            .map_err(|_| ConfigError::Invalid("train section has out-of-range values".into()))?;
        if !(0.0..1.0).contains(&self.train.dropout) {
            return Err(ConfigError::Invalid("train.dropout must lie in [0, 1)".into()));
        }
        if self.sampling.k == 0 || self.sampling.cap == 0 {
            return Err(ConfigError::Invalid("sampling.k and sampling.cap must be positive".into()));
        }
        if self.embedding.batch_size == 0 {
            return Err(ConfigError::Invalid("embedding.batch_size must be positive".into()));
        }
        if self.baseline.ngram_max == 0 || self.baseline.batch_size == 0 {
            return Err(ConfigError::Invalid("baseline.ngram_max and baseline.batch_size must be positive".into()));
        }
        Ok(())
    }

    fn stratify_by(&self) -> Result<Dimension, ConfigError> {
        Dimension::from_key(&self.split.stratify_by)
            .ok_or_else(|| ConfigError::Invalid(format!("unknown split.stratify_by {:?}", self.split.stratify_by)))
    }

    pub fn split_spec(&self, seed: u64) -> SplitSpec {
        SplitSpec {
            parts: self.split.parts,
            seed,
            stratify_by: self.stratify_by().unwrap_or(Dimension::MainCategory),
        }
    }

    pub fn train_config(&self, seed: u64) -> TrainConfig {
        let t = &self.train;
        TrainConfig {
            learning_rate: t.learning_rate,
            batch_size: t.batch_size,
            max_epochs: t.max_epochs,
            patience: t.patience,
            seed,
            adam_beta1: t.adam_beta1,
            adam_beta2: t.adam_beta2,
            adam_eps: t.adam_eps,
            weight_decay: t.weight_decay,
            label_weighting: t.label_weighting,
        }
    }

    pub fn tfidf_config(&self) -> TfidfConfig {
        TfidfConfig {
            ngram_range: (1, self.baseline.ngram_max),
            min_df: self.baseline.min_df,
            max_df: self.baseline.max_df,
            max_features: self.baseline.max_features,
            ..TfidfConfig::default()
        }
    }

    pub fn logreg_config(&self, seed: u64) -> LogRegConfig {
        let b = &self.baseline;
        LogRegConfig {
            lr: b.learning_rate,
            epochs: b.epochs,
            batch_size: b.batch_size,
            l2: b.l2,
            class_balanced: b.class_balanced,
            seed,
            tol: b.tol,
        }
    }

    pub fn http_provider(&self, endpoint: &str) -> HttpProvider {
        HttpProvider {
            batch_size: self.embedding.batch_size,
            timeout: Duration::from_secs(self.embedding.timeout_secs),
            retries: self.embedding.retries,
            ..HttpProvider::new(endpoint)
        }
        .with_env_token()
    }

    /// SHA-256 of the canonical JSON form of the effective configuration.
    pub fn digest(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let c = RunConfig::from_toml("").unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.seeds, [42, 123, 456, 789, 1024]);
    }

    #[test]
    fn partial_override() {
        let c = RunConfig::from_toml("seeds = [7]\n[train]\nmax_epochs = 3\n").unwrap();
        assert_eq!(c.seeds, [7]);
        assert_eq!(c.train.max_epochs, 3);
        assert_eq!(c.train.batch_size, 64);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(RunConfig::from_toml("seeds = []").is_err());
        assert!(RunConfig::from_toml("seeds = [1, 1]").is_err());
        assert!(RunConfig::from_toml("[train]\nlearnin_rate = 1.0").is_err());
        assert!(RunConfig::from_toml("[split]\nstratify_by = \"mood\"").is_err());
    }

    #[test]
    fn digest_tracks_content() {
        let a = RunConfig::default();
        let mut b = a.clone();
        assert_eq!(a.digest(), b.digest());
        b.seeds.push(5);
        assert_ne!(a.digest(), b.digest());
    }
}
