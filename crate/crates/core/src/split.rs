//! Exact-text deduplication and seeded stratified train/val/test splits.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

use crate::rng::XorShift64Star;
use crate::taxonomy::{Dimension, FactRecord};

/// Keeps the first occurrence of every text, comparing the bytes left after
/// trimming surrounding whitespace. Records are returned unchanged.
pub fn dedup_exact(facts: &[FactRecord]) -> Vec<FactRecord> {
    let mut seen = BTreeSet::new();
    facts
        .iter()
        .filter(|f| seen.insert(f.text.trim()))
        .cloned()
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Part {
    Train,
    Val,
    Test,
}

impl Part {
    pub const ALL: [Part; 3] = [Part::Train, Part::Val, Part::Test];

    pub fn name(self) -> &'static str {
        match self {
            Part::Train => "train",
            Part::Val => "val",
            Part::Test => "test",
        }
    }
}

/// Split proportions as integer parts of a common whole, so they always sum
/// to one exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitSpec {
    pub parts: [u64; 3],
    pub seed: u64,
    pub stratify_by: Dimension,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            parts: [70, 10, 20],
            seed: 42,
            stratify_by: Dimension::MainCategory,
        }
    }
}

impl SplitSpec {
    pub fn with_seed(seed: u64) -> Self {
        SplitSpec {
            seed,
            ..SplitSpec::default()
        }
    }

    pub fn whole(&self) -> u64 {
        self.parts.iter().sum()
    }

    pub fn fraction(&self, part: Part) -> f64 {
        self.parts[part as usize] as f64 / self.whole() as f64
    }

    /// Largest-remainder apportionment of `n` items; ties go to the earlier
    /// part (train, then val, then test).
    pub fn apportion(&self, n: usize) -> [usize; 3] {
        let whole = self.whole();
        let n = n as u64;
        let mut counts = [0u64; 3];
        let mut remainders = [0u64; 3];
        for i in 0..3 {
            counts[i] = n * self.parts[i] / whole;
            remainders[i] = n * self.parts[i] % whole;
        }
        let mut left = n - counts.iter().sum::<u64>();
        let mut order = [0usize, 1, 2];
        // Stable sort keeps train < val < test among equal remainders.
        order.sort_by(|&a, &b| remainders[b].cmp(&remainders[a]));
        for &i in order.iter() {
            if left == 0 {
                break;
            }
            counts[i] += 1;
            left -= 1;
        }
        counts.map(|c| c as usize)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SplitAssignment {
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
}

impl SplitAssignment {
    pub fn part(&self, part: Part) -> &[String] {
        match part {
            Part::Train => &self.train,
            Part::Val => &self.val,
            Part::Test => &self.test,
        }
    }

    fn part_mut(&mut self, part: Part) -> &mut Vec<String> {
        match part {
            Part::Train => &mut self.train,
            Part::Val => &mut self.val,
            Part::Test => &mut self.test,
        }
    }

    pub fn len(&self) -> usize {
        self.train.len() + self.val.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SplitError {
    #[error("no facts to split")]
    EmptyInput,
    #[error("split proportions are all zero")]
    ZeroProportions,
    #[error("fact {0:?} has no labels")]
    MissingLabels(String),
    #[error("fact {0:?} is flagged as excluded")]
    ExcludedFact(String),
    #[error("duplicate fact id {0:?}")]
    DuplicateId(String),
}

/// Splits facts per stratum of `spec.stratify_by`.
///
/// Strata are visited in label-index order. Inside each stratum the ids are
/// shuffled (input order, then one Fisher-Yates pass of a generator seeded
/// with `spec.seed`) and cut at the largest-remainder counts.
pub fn stratified_split(facts: &[FactRecord], spec: &SplitSpec) -> Result<SplitAssignment, SplitError> {
    if facts.is_empty() {
        return Err(SplitError::EmptyInput);
    }
    if spec.whole() == 0 {
        return Err(SplitError::ZeroProportions);
    }
    let mut seen = BTreeSet::new();
    let mut strata: BTreeMap<usize, Vec<&str>> = BTreeMap::new();
    for fact in facts {
        let labels = fact.labels.ok_or_else(|| SplitError::MissingLabels(fact.id.clone()))?;
        if fact.excluded {
            return Err(SplitError::ExcludedFact(fact.id.clone()));
        }
        if !seen.insert(fact.id.as_str()) {
            return Err(SplitError::DuplicateId(fact.id.clone()));
        }
        strata.entry(labels.index(spec.stratify_by)).or_default().push(&fact.id);
    }

    let mut rng = XorShift64Star::new(spec.seed);
    let mut out = SplitAssignment::default();
    for ids in strata.values_mut() {
        rng.shuffle(ids);
        let counts = spec.apportion(ids.len());
        let mut rest = &ids[..];
        for part in Part::ALL {
            let (head, tail) = rest.split_at(counts[part as usize]);
            out.part_mut(part).extend(head.iter().map(|s| String::from(*s)));
            rest = tail;
        }
    }
    Ok(out)
}
