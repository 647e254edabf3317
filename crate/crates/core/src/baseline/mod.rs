//! TF-IDF + class-balanced logistic regression baseline, one linear model
//! per taxonomy dimension.

pub mod logreg;
pub mod tfidf;

pub use logreg::{logreg_train, FitStatus, LinearModel, LogRegConfig, LogRegError, LogRegOutcome};
pub use tfidf::{tfidf_fit, tfidf_transform, tokenize, SparseVec, TfidfConfig, TfidfError, TfidfVocab};

use alloc::vec::Vec;

use thiserror::Error;

use crate::metrics::{self, MetricsError, MetricsReport};
use crate::taxonomy::{Dimension, LabelSet};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BaselineError {
    #[error(transparent)]
    Tfidf(#[from] TfidfError),
    #[error("{dimension}: {source}")]
    LogReg {
        dimension: Dimension,
        #[source]
        source: LogRegError,
    },
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("expected one model per dimension ({expected}), got {actual}")]
    ModelCount { expected: usize, actual: usize },
    #[error("{texts} texts but {labels} label sets")]
    LengthMismatch { texts: usize, labels: usize },
}

/// Fitted vocabulary plus the seven per-dimension classifiers.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineModel {
    pub vocab: TfidfVocab,
    pub models: Vec<LinearModel>,
    pub status: Vec<FitStatus>,
}

impl BaselineModel {
    pub fn features<S: AsRef<str>>(&self, texts: &[S]) -> Vec<SparseVec> {
        tfidf_transform(&self.vocab, texts)
    }

    pub fn predict<S: AsRef<str>>(&self, texts: &[S]) -> Result<Vec<LabelSet>, BaselineError> {
        predict_labelsets(&self.models, &self.features(texts))
    }
}

/// Fits the vocabulary on `texts` and one classifier per dimension.
pub fn fit_baseline<S: AsRef<str>>(
    texts: &[S],
    labels: &[LabelSet],
    tfidf: &TfidfConfig,
    logreg: &LogRegConfig,
) -> Result<BaselineModel, BaselineError> {
    if texts.len() != labels.len() {
        return Err(BaselineError::LengthMismatch {
            texts: texts.len(),
            labels: labels.len(),
        });
    }
    let vocab = tfidf_fit(texts, tfidf)?;
    let x = tfidf_transform(&vocab, texts);
    let mut models = Vec::with_capacity(Dimension::COUNT);
    let mut status = Vec::with_capacity(Dimension::COUNT);
    for dimension in Dimension::ALL {
        let y: Vec<usize> = labels.iter().map(|l| l.index(dimension)).collect();
        let out = logreg_train(&x, &y, dimension.label_count(), vocab.len(), logreg)
            .map_err(|source| BaselineError::LogReg { dimension, source })?;
        models.push(out.model);
        status.push(out.status);
    }
    Ok(BaselineModel { vocab, models, status })
}

fn predict_labelsets(models: &[LinearModel], x: &[SparseVec]) -> Result<Vec<LabelSet>, BaselineError> {
    if models.len() != Dimension::COUNT {
        return Err(BaselineError::ModelCount {
            expected: Dimension::COUNT,
            actual: models.len(),
        });
    }
    Ok(x.iter()
        .map(|xi| {
            let idx: Vec<usize> = models.iter().map(|m| m.predict(xi)).collect();
            LabelSet::from_indices(&idx).expect("models sized to the taxonomy")
        })
        .collect())
}

/// Arg-max prediction per dimension scored with the full metrics report.
pub fn baseline_eval(models: &[LinearModel], x: &[SparseVec], gold: &[LabelSet]) -> Result<MetricsReport, BaselineError> {
    for (m, d) in models.iter().zip(Dimension::ALL) {
        if m.n_classes != d.label_count() {
            return Err(BaselineError::ModelCount {
                expected: d.label_count(),
                actual: m.n_classes,
            });
        }
    }
    let pred = predict_labelsets(models, x)?;
    Ok(metrics::evaluate(gold, &pred)?)
}
