//! Row-aligned dense embeddings produced by a frozen text encoder.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EmbeddingError {
    #[error("embedding dimension must be positive")]
    ZeroDimension,
    #[error("expected {expected} values for {rows} rows, got {actual}")]
    DimensionMismatch { rows: usize, expected: usize, actual: usize },
    #[error("{ids} ids for {rows} rows")]
    IdCountMismatch { rows: usize, ids: usize },
    #[error("duplicate row id {0:?}")]
    DuplicateId(String),
    #[error("non-finite value in row {0}")]
    NonFinite(usize),
    #[error("row {0} is the zero vector")]
    ZeroVector(usize),
    #[error("no embedding for id {0:?}")]
    MissingId(String),
}

/// `N × d` matrix of `f32` values stored row-major, with one unique id per
/// row.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    dim: usize,
    data: Vec<f32>,
    ids: Vec<String>,
    index: BTreeMap<String, usize>,
}

impl EmbeddingMatrix {
    pub fn new(dim: usize, data: Vec<f32>, ids: Vec<String>) -> Result<Self, EmbeddingError> {
        if dim == 0 {
            return Err(EmbeddingError::ZeroDimension);
        }
        let rows = ids.len();
        if data.len() != rows * dim {
            return Err(EmbeddingError::DimensionMismatch {
                rows,
                expected: rows * dim,
                actual: data.len(),
            });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(EmbeddingError::NonFinite(pos / dim));
        }
        let mut index = BTreeMap::new();
        for (i, id) in ids.iter().enumerate() {
            if index.insert(id.clone(), i).is_some() {
                return Err(EmbeddingError::DuplicateId(id.clone()));
            }
        }
        Ok(EmbeddingMatrix { dim, data, ids, index })
    }

    pub fn from_rows(rows: &[Vec<f64>], ids: Vec<String>) -> Result<Self, EmbeddingError> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.len() != ids.len() {
            return Err(EmbeddingError::IdCountMismatch {
                rows: rows.len(),
                ids: ids.len(),
            });
        }
        let mut data = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            if row.len() != dim {
                return Err(EmbeddingError::DimensionMismatch {
                    rows: rows.len(),
                    expected: dim,
                    actual: row.len(),
                });
            }
            data.extend(row.iter().map(|&v| v as f32));
        }
        Self::new(dim, data, ids)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// Row widened to `f64` for training arithmetic.
    pub fn row_f64(&self, i: usize) -> Vec<f64> {
        self.row(i).iter().map(|&v| f64::from(v)).collect()
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    /// Sub-matrix with rows in the order of `ids`.
    pub fn select<S: AsRef<str>>(&self, ids: &[S]) -> Result<EmbeddingMatrix, EmbeddingError> {
        let mut data = Vec::with_capacity(ids.len() * self.dim);
        let mut out_ids = Vec::with_capacity(ids.len());
        for id in ids {
            let id = id.as_ref();
            let i = self.position(id).ok_or_else(|| EmbeddingError::MissingId(String::from(id)))?;
            data.extend_from_slice(self.row(i));
            out_ids.push(String::from(id));
        }
        Self::new(self.dim, data, out_ids)
    }

    /// Scales every row to unit Euclidean norm (computed in `f64`).
    pub fn l2_normalize(&self) -> Result<EmbeddingMatrix, EmbeddingError> {
        let mut data = Vec::with_capacity(self.data.len());
        for i in 0..self.rows() {
            let row = self.row(i);
            let norm = libm::sqrt(row.iter().map(|&v| f64::from(v) * f64::from(v)).sum::<f64>());
            if norm == 0.0 {
                return Err(EmbeddingError::ZeroVector(i));
            }
            data.extend(row.iter().map(|&v| (f64::from(v) / norm) as f32));
        }
        Ok(EmbeddingMatrix {
            dim: self.dim,
            data,
            ids: self.ids.clone(),
            index: self.index.clone(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| i.to_string()).collect()
    }

    #[test]
    fn three_four_five() {
        let m = EmbeddingMatrix::new(2, vec![3.0, 4.0], ids(1)).unwrap().l2_normalize().unwrap();
        assert!((m.row(0)[0] - 0.6).abs() < 1e-7);
        assert!((m.row(0)[1] - 0.8).abs() < 1e-7);
    }

    #[test]
    fn unit_rows_unchanged() {
        let m = EmbeddingMatrix::new(3, vec![0.0, 1.0, 0.0, 0.6, 0.0, 0.8], ids(2)).unwrap();
        let n = m.l2_normalize().unwrap();
        for (a, b) in m.data().iter().zip(n.data()) {
            assert!((a - b).abs() < 1e-7);
        }
    }

    #[test]
    fn zero_row_rejected() {
        let m = EmbeddingMatrix::new(2, vec![1.0, 0.0, 0.0, 0.0], ids(2)).unwrap();
        assert_eq!(m.l2_normalize(), Err(EmbeddingError::ZeroVector(1)));
    }

    #[test]
    fn construction_checks() {
        assert!(matches!(
            EmbeddingMatrix::new(3, vec![0.0; 5], ids(2)),
            Err(EmbeddingError::DimensionMismatch { .. })
        ));
        assert!(matches!(
            EmbeddingMatrix::new(1, vec![0.0, 1.0], vec!["a".into(), "a".into()]),
            Err(EmbeddingError::DuplicateId(_))
        ));
        assert_eq!(
            EmbeddingMatrix::new(1, vec![f32::NAN], ids(1)),
            Err(EmbeddingError::NonFinite(0))
        );
    }

    #[test]
    fn select_reorders() {
        let m = EmbeddingMatrix::new(1, vec![1.0, 2.0, 3.0], ids(3)).unwrap();
        let s = m.select(&["2", "0"]).unwrap();
        assert_eq!(s.data(), &[3.0, 1.0]);
        assert!(matches!(m.select(&["9"]), Err(EmbeddingError::MissingId(_))));
    }
}
