//! Precision, recall and F1 at three granularities: per label, macro-averaged
//! per dimension, and pooled over all seven dimensions.
//!
//! The label universe of an evaluation is the union of gold and predicted
//! labels. A label with `P + R = 0` scores F1 = 0 rather than being skipped.
//! The pooled overall score treats every (dimension, label) pair as its own
//! label type and macro-averages over all of them jointly; it is not the
//! mean of the per-dimension macro scores.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use thiserror::Error;

use crate::stats::MeanStd;
use crate::taxonomy::{Dimension, LabelSet};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("gold has {gold} items, predictions have {pred}")]
    LengthMismatch { gold: usize, pred: usize },
    #[error("nothing to evaluate")]
    EmptyInput,
    #[error("reports cover different dimensions")]
    SchemaMismatch,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabelScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Number of gold occurrences.
    pub support: usize,
    pub predicted: usize,
}

fn check_lengths<L>(gold: &[L], pred: &[L]) -> Result<(), MetricsError> {
    if gold.len() != pred.len() {
        return Err(MetricsError::LengthMismatch {
            gold: gold.len(),
            pred: pred.len(),
        });
    }
    Ok(())
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Scores for every label that occurs in `gold` or `pred`.
pub fn f1_per_label<L: Ord + Clone>(gold: &[L], pred: &[L]) -> Result<BTreeMap<L, LabelScore>, MetricsError> {
    check_lengths(gold, pred)?;
    // (true positives, gold count, predicted count)
    let mut counts: BTreeMap<L, (usize, usize, usize)> = BTreeMap::new();
    for (g, p) in gold.iter().zip(pred) {
        counts.entry(g.clone()).or_default().1 += 1;
        counts.entry(p.clone()).or_default().2 += 1;
        if g == p {
            counts.get_mut(g).expect("inserted above").0 += 1;
        }
    }
    Ok(counts
        .into_iter()
        .map(|(label, (tp, support, predicted))| {
            let precision = ratio(tp, predicted);
            let recall = ratio(tp, support);
            let f1 = if precision + recall == 0.0 {
                0.0
            } else {
                2.0 * precision * recall / (precision + recall)
            };
            (
                label,
                LabelScore {
                    precision,
                    recall,
                    f1,
                    support,
                    predicted,
                },
            )
        })
        .collect())
}

/// Unweighted mean of per-label F1 over `gold ∪ pred`.
pub fn macro_f1<L: Ord + Clone>(gold: &[L], pred: &[L]) -> Result<f64, MetricsError> {
    check_lengths(gold, pred)?;
    if gold.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let scores = f1_per_label(gold, pred)?;
    Ok(scores.values().map(|s| s.f1).sum::<f64>() / scores.len() as f64)
}

type Pooled = Vec<(Dimension, usize)>;

fn pooled_pairs(gold: &[LabelSet], pred: &[LabelSet]) -> (Pooled, Pooled) {
    let mut g = Vec::with_capacity(gold.len() * Dimension::COUNT);
    let mut p = Vec::with_capacity(pred.len() * Dimension::COUNT);
    for (gs, ps) in gold.iter().zip(pred) {
        for d in Dimension::ALL {
            g.push((d, gs.index(d)));
            p.push((d, ps.index(d)));
        }
    }
    (g, p)
}

/// Macro-F1 over (dimension, label) label types pooled across all seven
/// dimensions: one pooled item per fact per dimension.
pub fn pooled_overall_f1(gold: &[LabelSet], pred: &[LabelSet]) -> Result<f64, MetricsError> {
    check_lengths(gold, pred)?;
    let (g, p) = pooled_pairs(gold, pred);
    macro_f1(&g, &p)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    /// Keyed by dimension and label index within `Dimension::labels()`.
    pub per_label: BTreeMap<(Dimension, usize), LabelScore>,
    pub per_category_macro_f1: BTreeMap<Dimension, f64>,
    pub overall_macro_f1: f64,
    pub n: usize,
}

impl MetricsReport {
    pub fn per_label_f1(&self, dimension: Dimension, label: &str) -> Option<f64> {
        let idx = dimension.labels().iter().position(|l| *l == label)?;
        self.per_label.get(&(dimension, idx)).map(|s| s.f1)
    }
}

/// Full report for label-set predictions.
pub fn evaluate(gold: &[LabelSet], pred: &[LabelSet]) -> Result<MetricsReport, MetricsError> {
    check_lengths(gold, pred)?;
    if gold.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let mut per_label = BTreeMap::new();
    let mut per_category = BTreeMap::new();
    for d in Dimension::ALL {
        let g: Vec<usize> = gold.iter().map(|l| l.index(d)).collect();
        let p: Vec<usize> = pred.iter().map(|l| l.index(d)).collect();
        let scores = f1_per_label(&g, &p)?;
        per_category.insert(d, scores.values().map(|s| s.f1).sum::<f64>() / scores.len() as f64);
        per_label.extend(scores.into_iter().map(|(l, s)| ((d, l), s)));
    }
    Ok(MetricsReport {
        per_label,
        per_category_macro_f1: per_category,
        overall_macro_f1: pooled_overall_f1(gold, pred)?,
        n: gold.len(),
    })
}

/// Mean and sample standard deviation of every metric across seed runs.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedSummary {
    pub runs: usize,
    pub overall: MeanStd,
    pub per_category: BTreeMap<Dimension, MeanStd>,
    /// Aggregated over the runs in which the label occurs; `MeanStd::n`
    /// records how many.
    pub per_label: BTreeMap<(Dimension, usize), MeanStd>,
    /// Mean gold support per label over the runs in which it occurs.
    pub support: BTreeMap<(Dimension, usize), f64>,
}

impl SeedSummary {
    /// A single run has no spread; its standard deviations are 0.
    pub fn is_degenerate(&self) -> bool {
        self.runs < 2
    }
}

pub fn aggregate_seeds(reports: &[MetricsReport]) -> Result<SeedSummary, MetricsError> {
    let first = reports.first().ok_or(MetricsError::EmptyInput)?;
    let dims: BTreeSet<Dimension> = first.per_category_macro_f1.keys().copied().collect();
    if reports
        .iter()
        .any(|r| !r.per_category_macro_f1.keys().copied().eq(dims.iter().copied()))
    {
        return Err(MetricsError::SchemaMismatch);
    }
    let collect = |f: &dyn Fn(&MetricsReport) -> Option<f64>| -> Option<MeanStd> {
        let values: Vec<f64> = reports.iter().filter_map(f).collect();
        MeanStd::from_values(&values)
    };
    let overall = collect(&|r| Some(r.overall_macro_f1)).expect("non-empty");
    let per_category = dims
        .iter()
        .map(|&d| (d, collect(&|r| r.per_category_macro_f1.get(&d).copied()).expect("non-empty")))
        .collect();
    let keys: BTreeSet<(Dimension, usize)> = reports.iter().flat_map(|r| r.per_label.keys().copied()).collect();
    let mut per_label = BTreeMap::new();
    let mut support = BTreeMap::new();
    for key in keys {
        if let Some(m) = collect(&|r| r.per_label.get(&key).map(|s| s.f1)) {
            per_label.insert(key, m);
        }
        if let Some(m) = collect(&|r| r.per_label.get(&key).map(|s| s.support as f64)) {
            support.insert(key, m.mean);
        }
    }
    Ok(SeedSummary {
        runs: reports.len(),
        overall,
        per_category,
        per_label,
        support,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn hand_confusion_matrix() {
        let gold = ['A', 'A', 'B', 'B'];
        let pred = ['A', 'B', 'B', 'B'];
        let s = f1_per_label(&gold, &pred).unwrap();
        assert!((s[&'A'].f1 - 2.0 / 3.0).abs() < 1e-12);
        assert!((s[&'B'].f1 - 0.8).abs() < 1e-12);
        let m = macro_f1(&gold, &pred).unwrap();
        assert!((m - (2.0 / 3.0 + 0.8) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn vacuous_labels_are_absent() {
        let s = f1_per_label(&[1, 2], &[1, 2]).unwrap();
        assert!(!s.contains_key(&3));
        assert!(s.values().all(|x| x.f1 == 1.0));
    }

    #[test]
    fn never_predicted_scores_zero() {
        let s = f1_per_label(&[1, 2], &[1, 1]).unwrap();
        assert_eq!(s[&2].f1, 0.0);
        assert_eq!(s[&2].support, 1);
    }

    #[test]
    fn errors() {
        assert_eq!(
            macro_f1(&[1], &[1, 2]),
            Err(MetricsError::LengthMismatch { gold: 1, pred: 2 })
        );
        assert_eq!(macro_f1::<u8>(&[], &[]), Err(MetricsError::EmptyInput));
        assert_eq!(aggregate_seeds(&[]), Err(MetricsError::EmptyInput));
    }

    #[test]
    fn two_seed_aggregate() {
        let gold = vec![crate::taxonomy::LabelSet::invalid(crate::taxonomy::InvalidityReason::Opinion)];
        let mut a = evaluate(&gold, &gold).unwrap();
        let mut b = a.clone();
        a.overall_macro_f1 = 0.80;
        b.overall_macro_f1 = 0.82;
        let s = aggregate_seeds(&[a, b]).unwrap();
        assert!((s.overall.mean - 0.81).abs() < 1e-12);
        assert!((s.overall.std - libm::sqrt(2.0) / 100.0).abs() < 1e-12);
    }
}
