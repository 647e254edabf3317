//! Corpus-level label distributions predicted by an ensemble of seed models,
//! and the training-overlap audit.
//!
//! A label's share is the percentage of corpus facts assigned that label by
//! one seed model; shares are then summarised as mean ± sample std across
//! seeds. Confidence is conditional on the predicted label: the mean
//! max-softmax probability over the facts a seed assigned to that label,
//! averaged across the seeds that assigned it at least once. Heads are read
//! independently, so e.g. Invalidity Reason shares are not reconciled with
//! Validity.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

use crate::embedding::EmbeddingMatrix;
use crate::model::{predict, Category, ModelError, MultiHeadModel, Prediction};
use crate::stats::MeanStd;
use crate::taxonomy::FactRecord;

/// Predictions of one seed model, one entry per corpus fact.
pub type PredictionTable = Vec<Prediction>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DistributionError {
    #[error("no prediction tables")]
    EmptyTables,
    #[error("models or tables disagree on shape: {0}")]
    SchemaMismatch(&'static str),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Runs every seed model over the corpus embeddings.
pub fn predict_corpus(
    models: &[MultiHeadModel],
    embeddings: &EmbeddingMatrix,
) -> Result<Vec<PredictionTable>, DistributionError> {
    let first = models.first().ok_or(DistributionError::EmptyTables)?;
    for m in models {
        if m.dim != first.dim {
            return Err(DistributionError::SchemaMismatch("embedding dimension"));
        }
        if m.categories.len() != first.categories.len()
            || m.categories.iter().zip(&first.categories).any(|(a, b)| a.name != b.name || a.labels != b.labels)
        {
            return Err(DistributionError::SchemaMismatch("label spaces"));
        }
    }
    models.iter().map(|m| Ok(predict(m, embeddings)?)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistributionCell {
    /// Percent of facts.
    pub share: MeanStd,
    /// Percent; `None` when no seed predicted the label.
    pub confidence: Option<MeanStd>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistributionReport {
    /// `(category name, label names)` in model order.
    pub categories: Vec<(String, Vec<String>)>,
    /// Keyed by `(category index, label index)`; every label has a cell.
    pub cells: BTreeMap<(usize, usize), DistributionCell>,
    pub facts: usize,
    pub seeds: usize,
}

impl DistributionReport {
    pub fn cell(&self, category: &str, label: &str) -> Option<&DistributionCell> {
        let c = self.categories.iter().position(|(name, _)| name == category)?;
        let l = self.categories[c].1.iter().position(|n| n == label)?;
        self.cells.get(&(c, l))
    }
}

/// Percentage share of each label per category for one seed.
pub fn seed_shares(table: &[Prediction], label_counts: &[usize]) -> Vec<Vec<f64>> {
    let n = table.len() as f64;
    label_counts
        .iter()
        .enumerate()
        .map(|(c, &k)| {
            let mut counts = alloc::vec![0usize; k];
            for p in table {
                counts[p.labels[c]] += 1;
            }
            counts.into_iter().map(|x| 100.0 * x as f64 / n).collect()
        })
        .collect()
}

fn check_tables(categories: &[Category], tables: &[PredictionTable]) -> Result<usize, DistributionError> {
    let first = tables.first().ok_or(DistributionError::EmptyTables)?;
    let facts = first.len();
    if facts == 0 {
        return Err(DistributionError::EmptyTables);
    }
    for table in tables {
        if table.len() != facts {
            return Err(DistributionError::SchemaMismatch("tables cover different fact counts"));
        }
        for p in table {
            if p.labels.len() != categories.len()
                || p.labels.iter().zip(categories).any(|(&l, c)| l >= c.len())
            {
                return Err(DistributionError::SchemaMismatch("prediction outside the label space"));
            }
        }
    }
    Ok(facts)
}

pub fn aggregate_distribution(
    categories: &[Category],
    tables: &[PredictionTable],
) -> Result<DistributionReport, DistributionError> {
    let facts = check_tables(categories, tables)?;
    let label_counts: Vec<usize> = categories.iter().map(Category::len).collect();
    let shares: Vec<Vec<Vec<f64>>> = tables.iter().map(|t| seed_shares(t, &label_counts)).collect();
    let mut cells = BTreeMap::new();
    for (c, &k) in label_counts.iter().enumerate() {
        for l in 0..k {
            let per_seed: Vec<f64> = shares.iter().map(|s| s[c][l]).collect();
            let confidences: Vec<f64> = tables
                .iter()
                .filter_map(|table| {
                    let assigned: Vec<f64> = table
                        .iter()
                        .filter(|p| p.labels[c] == l)
                        .map(|p| p.confidences[c])
                        .collect();
                    (!assigned.is_empty()).then(|| 100.0 * assigned.iter().sum::<f64>() / assigned.len() as f64)
                })
                .collect();
            cells.insert(
                (c, l),
                DistributionCell {
                    share: MeanStd::from_values(&per_seed).expect("at least one table"),
                    confidence: MeanStd::from_values(&confidences),
                },
            );
        }
    }
    Ok(DistributionReport {
        categories: categories.iter().map(|c| (c.name.clone(), c.labels.clone())).collect(),
        cells,
        facts,
        seeds: tables.len(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeakageAudit {
    /// Corpus facts whose trimmed text also occurs in the training facts.
    pub overlap_count: usize,
    pub overlap_fraction: f64,
    pub full: DistributionReport,
    /// `None` when every corpus fact overlaps (nothing left to aggregate).
    pub held_out: Option<DistributionReport>,
    /// Held-out minus full mean share, in percentage points, per cell.
    pub shifts: BTreeMap<(usize, usize), f64>,
    /// Largest absolute shift and its cell.
    pub max_shift: Option<((usize, usize), f64)>,
}

impl LeakageAudit {
    pub fn total_overlap(&self) -> bool {
        self.held_out.is_none()
    }
}

/// Re-aggregates the distribution with training-overlap facts held out.
pub fn leakage_audit(
    train: &[FactRecord],
    corpus: &[FactRecord],
    categories: &[Category],
    tables: &[PredictionTable],
) -> Result<LeakageAudit, DistributionError> {
    if tables.iter().any(|t| t.len() != corpus.len()) {
        return Err(DistributionError::SchemaMismatch("tables do not align with the corpus"));
    }
    let full = aggregate_distribution(categories, tables)?;
    let seen: BTreeSet<&str> = train.iter().map(|f| f.text.trim()).collect();
    let keep: Vec<bool> = corpus.iter().map(|f| !seen.contains(f.text.trim())).collect();
    let overlap_count = keep.iter().filter(|k| !**k).count();
    let overlap_fraction = overlap_count as f64 / corpus.len() as f64;

    let held_tables: Vec<PredictionTable> = tables
        .iter()
        .map(|t| t.iter().zip(&keep).filter(|(_, k)| **k).map(|(p, _)| p.clone()).collect())
        .collect();
    let held_out = match aggregate_distribution(categories, &held_tables) {
        Ok(report) => Some(report),
        Err(DistributionError::EmptyTables) => None,
        Err(e) => return Err(e),
    };

    let mut shifts = BTreeMap::new();
    let mut max_shift: Option<((usize, usize), f64)> = None;
    if let Some(held) = &held_out {
        for (key, cell) in &full.cells {
            let shift = held.cells[key].share.mean - cell.share.mean;
            shifts.insert(*key, shift);
            if max_shift.is_none_or(|(_, m)| shift.abs() > m.abs()) {
                max_shift = Some((*key, shift));
            }
        }
    }
    Ok(LeakageAudit {
        overlap_count,
        overlap_fraction,
        full,
        held_out,
        shifts,
        max_shift,
    })
}
