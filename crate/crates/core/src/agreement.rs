//! Inter-annotator agreement: percent agreement, Cohen's κ, Fleiss' κ,
//! Krippendorff's α for nominal data and the Landis-Koch verbal bands.
//!
//! All statistics take labels of any ordered type, so they are invariant to
//! relabeling by construction. Chance-agreement degeneracies (a single
//! category everywhere) return the limiting value instead of failing:
//! κ = 1 when observed agreement is perfect, 0 otherwise; α = 1.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AgreementError {
    #[error("need at least two raters, got {0}")]
    TooFewRaters(usize),
    #[error("unit {unit} has {actual} ratings, expected {expected}")]
    Ragged { unit: usize, expected: usize, actual: usize },
    #[error("unit {0} has no ratings")]
    EmptyUnit(usize),
    #[error("no unit has two or more ratings")]
    NoComparableUnits,
    #[error("unit {0} has missing ratings")]
    MissingRatings(usize),
    #[error("rating lists differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("nothing to compare")]
    EmptyInput,
    #[error("value {0} outside [-1, 1]")]
    OutOfRange(f64),
}

/// `units × raters` ratings; `None` marks a missing rating.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RatingsTable<L> {
    raters: usize,
    units: Vec<Vec<Option<L>>>,
}

impl<L: Ord + Clone> RatingsTable<L> {
    pub fn new(units: Vec<Vec<Option<L>>>) -> Result<Self, AgreementError> {
        let raters = units.first().map_or(0, Vec::len);
        if raters < 2 {
            return Err(AgreementError::TooFewRaters(raters));
        }
        for (i, unit) in units.iter().enumerate() {
            if unit.len() != raters {
                return Err(AgreementError::Ragged {
                    unit: i,
                    expected: raters,
                    actual: unit.len(),
                });
            }
            if unit.iter().all(Option::is_none) {
                return Err(AgreementError::EmptyUnit(i));
            }
        }
        Ok(RatingsTable { raters, units })
    }

    /// Table without missing entries.
    pub fn complete(units: Vec<Vec<L>>) -> Result<Self, AgreementError> {
        Self::new(units.into_iter().map(|u| u.into_iter().map(Some).collect()).collect())
    }

    pub fn raters(&self) -> usize {
        self.raters
    }

    pub fn units(&self) -> &[Vec<Option<L>>] {
        &self.units
    }

    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    /// Only the units rated by every rater.
    pub fn complete_units(&self) -> RatingsTable<L> {
        RatingsTable {
            raters: self.raters,
            units: self
                .units
                .iter()
                .filter(|u| u.iter().all(Option::is_some))
                .cloned()
                .collect(),
        }
    }

    /// Label counts of each unit over its non-missing ratings.
    fn unit_counts(&self) -> impl Iterator<Item = (usize, BTreeMap<&L, usize>)> + '_ {
        self.units.iter().map(|unit| {
            let mut counts = BTreeMap::new();
            let mut m = 0;
            for l in unit.iter().flatten() {
                *counts.entry(l).or_insert(0) += 1;
                m += 1;
            }
            (m, counts)
        })
    }
}

/// Mean over units of the fraction of agreeing rater pairs, using the
/// non-missing ratings of units that have at least two.
pub fn percent_agreement<L: Ord + Clone>(t: &RatingsTable<L>) -> Result<f64, AgreementError> {
    let mut total = 0.0;
    let mut units = 0usize;
    for (m, counts) in t.unit_counts() {
        if m < 2 {
            continue;
        }
        let agreeing: usize = counts.values().map(|&c| c * (c - 1) / 2).sum();
        total += agreeing as f64 / (m * (m - 1) / 2) as f64;
        units += 1;
    }
    if units == 0 {
        return Err(AgreementError::NoComparableUnits);
    }
    Ok(total / units as f64)
}

fn chance_corrected(observed: f64, expected: f64) -> f64 {
    if expected >= 1.0 - 1e-12 {
        if observed >= 1.0 - 1e-12 {
            1.0
        } else {
            0.0
        }
    } else {
        (observed - expected) / (1.0 - expected)
    }
}

/// Cohen's κ for two complete rating lists.
pub fn cohen_kappa<L: Ord + Clone>(a: &[L], b: &[L]) -> Result<f64, AgreementError> {
    if a.len() != b.len() {
        return Err(AgreementError::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(AgreementError::EmptyInput);
    }
    let n = a.len() as f64;
    let observed = a.iter().zip(b).filter(|(x, y)| x == y).count() as f64 / n;
    let mut marginals: BTreeMap<&L, (usize, usize)> = BTreeMap::new();
    for (x, y) in a.iter().zip(b) {
        marginals.entry(x).or_default().0 += 1;
        marginals.entry(y).or_default().1 += 1;
    }
    let expected: f64 = marginals.values().map(|&(ca, cb)| (ca as f64 / n) * (cb as f64 / n)).sum();
    Ok(chance_corrected(observed, expected))
}

/// Fleiss' κ; every unit must be rated by every rater.
pub fn fleiss_kappa<L: Ord + Clone>(t: &RatingsTable<L>) -> Result<f64, AgreementError> {
    if t.is_empty() {
        return Err(AgreementError::EmptyInput);
    }
    if let Some(i) = t.units.iter().position(|u| u.iter().any(Option::is_none)) {
        return Err(AgreementError::MissingRatings(i));
    }
    let n = t.raters as f64;
    let units = t.len() as f64;
    let mut p_bar = 0.0;
    let mut totals: BTreeMap<&L, usize> = BTreeMap::new();
    for (_, counts) in t.unit_counts() {
        let sum_sq: f64 = counts.values().map(|&c| (c * c) as f64).sum();
        p_bar += (sum_sq - n) / (n * (n - 1.0));
        for (l, c) in counts {
            *totals.entry(l).or_insert(0) += c;
        }
    }
    p_bar /= units;
    let p_e: f64 = totals
        .values()
        .map(|&c| {
            let p = c as f64 / (units * n);
            p * p
        })
        .sum();
    Ok(chance_corrected(p_bar, p_e))
}

/// Krippendorff's α with the nominal distance, via the coincidence matrix.
/// Units with fewer than two ratings are not pairable and are ignored.
pub fn krippendorff_alpha_nominal<L: Ord + Clone>(t: &RatingsTable<L>) -> Result<f64, AgreementError> {
    let mut n_total = 0usize;
    let mut observed_disagreement = 0.0;
    let mut marginals: BTreeMap<&L, usize> = BTreeMap::new();
    for (m, counts) in t.unit_counts() {
        if m < 2 {
            continue;
        }
        let sum_sq: usize = counts.values().map(|&c| c * c).sum();
        // Σ_{c≠k} o_ck contributed by this unit.
        observed_disagreement += (m * m - sum_sq) as f64 / (m - 1) as f64;
        n_total += m;
        for (l, c) in counts {
            *marginals.entry(l).or_insert(0) += c;
        }
    }
    if n_total == 0 {
        return Err(AgreementError::NoComparableUnits);
    }
    let n = n_total as f64;
    let expected_pairs = n * n - marginals.values().map(|&c| (c * c) as f64).sum::<f64>();
    if expected_pairs == 0.0 {
        return Ok(1.0);
    }
    Ok(1.0 - (n - 1.0) * observed_disagreement / expected_pairs)
}

/// Landis-Koch interpretation bands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Band {
    Poor,
    Slight,
    Fair,
    Moderate,
    Substantial,
    AlmostPerfect,
}

impl Band {
    pub fn as_str(self) -> &'static str {
        match self {
            Band::Poor => "Poor",
            Band::Slight => "Slight",
            Band::Fair => "Fair",
            Band::Moderate => "Moderate",
            Band::Substantial => "Substantial",
            Band::AlmostPerfect => "Almost Perfect",
        }
    }
}

impl fmt::Display for Band {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Band for a κ-type value, decided on the value rounded to three decimals:
/// `< 0` Poor, `≤ 0.20` Slight, `≤ 0.40` Fair, `≤ 0.60` Moderate, `≤ 0.80`
/// Substantial, above that Almost Perfect.
pub fn landis_koch(value: f64) -> Result<Band, AgreementError> {
    if !(-1.0..=1.0).contains(&value) {
        return Err(AgreementError::OutOfRange(value));
    }
    let milli = libm::round(value * 1000.0) as i64;
    Ok(match milli {
        i64::MIN..=-1 => Band::Poor,
        0..=200 => Band::Slight,
        201..=400 => Band::Fair,
        401..=600 => Band::Moderate,
        601..=800 => Band::Substantial,
        _ => Band::AlmostPerfect,
    })
}

/// One row of an agreement table.
#[derive(Debug, Clone, PartialEq)]
pub struct AgreementReport {
    /// Percent agreement over units rated by everyone, in `[0, 1]`.
    pub percent: f64,
    /// Only for two raters.
    pub cohen_kappa: Option<f64>,
    pub fleiss_kappa: f64,
    /// Over every unit with at least two ratings.
    pub kripp_alpha: f64,
    /// Band of Cohen's κ for two raters, Fleiss' κ otherwise.
    pub interpretation: Band,
    /// Units rated by everyone.
    pub n: usize,
}

pub fn agreement_report<L: Ord + Clone>(t: &RatingsTable<L>) -> Result<AgreementReport, AgreementError> {
    let complete = t.complete_units();
    if complete.is_empty() {
        return Err(AgreementError::NoComparableUnits);
    }
    let percent = percent_agreement(&complete)?;
    let fleiss = fleiss_kappa(&complete)?;
    let cohen = if t.raters == 2 {
        let a: Vec<L> = complete.units.iter().map(|u| u[0].clone().expect("complete")).collect();
        let b: Vec<L> = complete.units.iter().map(|u| u[1].clone().expect("complete")).collect();
        Some(cohen_kappa(&a, &b)?)
    } else {
        None
    };
    let alpha = krippendorff_alpha_nominal(t)?;
    let interpretation = landis_koch(cohen.unwrap_or(fleiss).clamp(-1.0, 1.0))?;
    Ok(AgreementReport {
        percent,
        cohen_kappa: cohen,
        fleiss_kappa: fleiss,
        kripp_alpha: alpha,
        interpretation,
        n: complete.len(),
    })
}
