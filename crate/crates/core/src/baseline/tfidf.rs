//! Word 1-2 gram TF-IDF features.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;
use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

/// Sparse row: `(column, value)` pairs sorted by column.
pub type SparseVec = Vec<(usize, f64)>;

#[derive(Debug, Clone, PartialEq)]
pub struct TfidfConfig {
    /// Inclusive n-gram range.
    pub ngram_range: (usize, usize),
    /// Minimum document count.
    pub min_df: usize,
    /// Maximum document fraction.
    pub max_df: f64,
    pub max_features: usize,
    pub sublinear_tf: bool,
    pub strip_accents: bool,
}

impl Default for TfidfConfig {
    fn default() -> Self {
        TfidfConfig {
            ngram_range: (1, 2),
            min_df: 2,
            max_df: 0.95,
            max_features: 10_000,
            sublinear_tf: true,
            strip_accents: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TfidfError {
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("every term was filtered out of the vocabulary")]
    EmptyVocabulary,
    #[error("invalid n-gram range")]
    BadNgramRange,
}

/// Lowercases, optionally folds accents (NFKD, then drop combining marks)
/// and splits on runs of non-alphanumeric characters.
pub fn tokenize(text: &str, strip_accents: bool) -> Vec<String> {
    let folded: String = if strip_accents {
        text.nfkd().filter(|c| !is_combining_mark(*c)).flat_map(char::to_lowercase).collect()
    } else {
        text.chars().flat_map(char::to_lowercase).collect()
    };
    folded
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(String::from)
        .collect()
}

fn ngrams(tokens: &[String], (lo, hi): (usize, usize)) -> Vec<String> {
    let mut out = Vec::new();
    for n in lo..=hi {
        if n == 0 || n > tokens.len() {
            continue;
        }
        out.extend(tokens.windows(n).map(|w| w.join(" ")));
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct TfidfVocab {
    /// Sorted lexicographically; a term's position is its column.
    pub terms: Vec<String>,
    pub df: Vec<usize>,
    pub idf: Vec<f64>,
    pub n_docs: usize,
    pub config: TfidfConfig,
    index: BTreeMap<String, usize>,
}

impl TfidfVocab {
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn column(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    fn analyze(&self, text: &str) -> Vec<String> {
        ngrams(&tokenize(text, self.config.strip_accents), self.config.ngram_range)
    }

    /// Rebuilds a vocabulary from stored parts (e.g. when loading a saved
    /// baseline).
    pub fn from_parts(terms: Vec<String>, df: Vec<usize>, idf: Vec<f64>, n_docs: usize, config: TfidfConfig) -> Self {
        let index = terms.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        TfidfVocab {
            terms,
            df,
            idf,
            n_docs,
            config,
            index,
        }
    }
}

/// Builds the vocabulary: terms with `df ≥ min_df` and `df/N ≤ max_df`, the
/// `max_features` most frequent by document count (ties broken
/// lexicographically), with smoothed idf `ln((1+N)/(1+df)) + 1`.
pub fn tfidf_fit<S: AsRef<str>>(corpus: &[S], config: &TfidfConfig) -> Result<TfidfVocab, TfidfError> {
    if corpus.is_empty() {
        return Err(TfidfError::EmptyCorpus);
    }
    let (lo, hi) = config.ngram_range;
    if lo == 0 || lo > hi {
        return Err(TfidfError::BadNgramRange);
    }
    let n_docs = corpus.len();
    let mut df: BTreeMap<String, usize> = BTreeMap::new();
    for doc in corpus {
        let terms: BTreeSet<String> = ngrams(&tokenize(doc.as_ref(), config.strip_accents), config.ngram_range)
            .into_iter()
            .collect();
        for t in terms {
            *df.entry(t).or_insert(0) += 1;
        }
    }
    let max_count = config.max_df * n_docs as f64;
    let mut kept: Vec<(String, usize)> = df
        .into_iter()
        .filter(|&(_, d)| d >= config.min_df && d as f64 <= max_count)
        .collect();
    if kept.is_empty() {
        return Err(TfidfError::EmptyVocabulary);
    }
    kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    kept.truncate(config.max_features);
    kept.sort_by(|a, b| a.0.cmp(&b.0));

    let terms: Vec<String> = kept.iter().map(|(t, _)| t.clone()).collect();
    let dfs: Vec<usize> = kept.iter().map(|&(_, d)| d).collect();
    let idf = dfs
        .iter()
        .map(|&d| libm::log((1.0 + n_docs as f64) / (1.0 + d as f64)) + 1.0)
        .collect();
    Ok(TfidfVocab::from_parts(terms, dfs, idf, n_docs, config.clone()))
}

/// One L2-normalized sparse row per text. Out-of-vocabulary terms are
/// ignored; a text with no known terms yields an empty (zero) row.
pub fn tfidf_transform<S: AsRef<str>>(vocab: &TfidfVocab, texts: &[S]) -> Vec<SparseVec> {
    texts
        .iter()
        .map(|text| {
            let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
            for term in vocab.analyze(text.as_ref()) {
                if let Some(col) = vocab.column(&term) {
                    *counts.entry(col).or_insert(0) += 1;
                }
            }
            let mut row: SparseVec = counts
                .into_iter()
                .map(|(col, count)| {
                    let tf = if vocab.config.sublinear_tf {
                        1.0 + libm::log(count as f64)
                    } else {
                        count as f64
                    };
                    (col, tf * vocab.idf[col])
                })
                .collect();
            let norm = libm::sqrt(row.iter().map(|(_, v)| v * v).sum::<f64>());
            if norm > 0.0 {
                for (_, v) in &mut row {
                    *v /= norm;
                }
            }
            row
        })
        .collect()
}
