//! Binary model checkpoints.
//!
//! All integers are little-endian; strings are a `u32` byte length followed
//! by UTF-8 bytes.
//!
//! ```text
//! magic        4 bytes  "FKCK"
//! version      u32      1
//! dim          u32      input dimension d
//! hidden       u32      head hidden width h
//! dropout      f64
//! categories   u32      C
//! C times:     name (string), weight f64, label count u32, labels (strings),
//!              has_label_weights u8, then one f64 per label when set
//! params       u64      total parameter count
//! values       f64 × params
//! ```
//!
//! Parameters are stored head by head in category order. Inside a head the
//! order is `W1` (h × d, row-major), `b1` (h), `W2` (n × h, row-major), `b2` (n).

use std::path::Path;

use factkit_core::model::{Category, ModelError};
use factkit_core::MultiHeadModel;
use thiserror::Error;

pub const MAGIC: [u8; 4] = *b"FKCK";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("not a checkpoint file (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    UnsupportedVersion(u32),
    #[error("checkpoint truncated in {0}")]
    Truncated(&'static str),
    #[error("{0} unexpected bytes after the parameters")]
    TrailingBytes(usize),
    #[error("string in {0} is not valid UTF-8")]
    BadUtf8(&'static str),
    #[error("header implies {expected} parameters, file declares {found}")]
    ParamCount { expected: usize, found: usize },
    #[error("non-finite parameter at index {0}")]
    NonFinite(usize),
    #[error(transparent)]
    Model(#[from] ModelError),
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

pub fn encode(model: &MultiHeadModel) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(model.dim as u32).to_le_bytes());
    out.extend_from_slice(&(model.hidden as u32).to_le_bytes());
    out.extend_from_slice(&model.dropout.to_le_bytes());
    out.extend_from_slice(&(model.categories.len() as u32).to_le_bytes());
    for c in &model.categories {
        put_str(&mut out, &c.name);
        out.extend_from_slice(&c.weight.to_le_bytes());
        out.extend_from_slice(&(c.labels.len() as u32).to_le_bytes());
        for l in &c.labels {
            put_str(&mut out, l);
        }
        match &c.label_weights {
            Some(w) => {
                out.push(1);
                for v in w {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
            None => out.push(0),
        }
    }
    let total: usize = model.heads.iter().map(|h| h.params.len()).sum();
    out.extend_from_slice(&(total as u64).to_le_bytes());
    for head in &model.heads {
        for v in &head.params {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, section: &'static str) -> Result<&'a [u8], CheckpointError> {
        if n > self.bytes.len() - self.pos {
            return Err(CheckpointError::Truncated(section));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn array<const N: usize>(&mut self, section: &'static str) -> Result<[u8; N], CheckpointError> {
        Ok(self.take(N, section)?.try_into().expect("length checked"))
    }

    fn u32(&mut self, section: &'static str) -> Result<usize, CheckpointError> {
        Ok(u32::from_le_bytes(self.array(section)?) as usize)
    }

    fn f64(&mut self, section: &'static str) -> Result<f64, CheckpointError> {
        Ok(f64::from_le_bytes(self.array(section)?))
    }

    fn string(&mut self, section: &'static str) -> Result<String, CheckpointError> {
        let len = self.u32(section)?;
        String::from_utf8(self.take(len, section)?.to_vec()).map_err(|_| CheckpointError::BadUtf8(section))
    }
}

pub fn decode(bytes: &[u8]) -> Result<MultiHeadModel, CheckpointError> {
    let mut r = Reader { bytes, pos: 0 };
    if bytes.len() >= 4 && bytes[..4] != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    r.take(4, "header")?;
    let version = r.u32("header")? as u32;
    if version != VERSION {
        return Err(CheckpointError::UnsupportedVersion(version));
    }
    let dim = r.u32("header")?;
    let hidden = r.u32("header")?;
    let dropout = r.f64("header")?;
    let count = r.u32("header")?;
    let mut categories = Vec::new();
    for _ in 0..count {
        let name = r.string("category name")?;
        let weight = r.f64("category weight")?;
        let n = r.u32("label list")?;
        let labels = (0..n).map(|_| r.string("label list")).collect::<Result<Vec<_>, _>>()?;
        let label_weights = match r.take(1, "label weights")?[0] {
            0 => None,
            _ => Some((0..n).map(|_| r.f64("label weights")).collect::<Result<Vec<_>, _>>()?),
        };
        let mut category = Category::new(name, labels);
        category.weight = weight;
        category.label_weights = label_weights;
        categories.push(category);
    }
    let mut model = MultiHeadModel::zeros(dim, hidden, categories, dropout)?;
    let expected: usize = model.heads.iter().map(|h| h.params.len()).sum();
    let found = u64::from_le_bytes(r.array("parameter count")?) as usize;
    if found != expected {
        return Err(CheckpointError::ParamCount { expected, found });
    }
    let mut index = 0;
    for head in &mut model.heads {
        for p in &mut head.params {
            *p = r.f64("parameters")?;
            if !p.is_finite() {
                return Err(CheckpointError::NonFinite(index));
            }
            index += 1;
        }
    }
    if r.pos != bytes.len() {
        return Err(CheckpointError::TrailingBytes(bytes.len() - r.pos));
    }
    Ok(model)
}

pub fn save(path: &Path, model: &MultiHeadModel) -> Result<(), CheckpointError> {
    std::fs::write(path, encode(model)).map_err(|source| CheckpointError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load(path: &Path) -> Result<MultiHeadModel, CheckpointError> {
    let bytes = std::fs::read(path).map_err(|source| CheckpointError::Io {
        path: path.display().to_string(),
        source,
    })?;
    decode(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let mut model = MultiHeadModel::for_taxonomy(5, 7).unwrap();
        model.categories[2].weight = 0.5;
        model.categories[3].label_weights = Some(vec![1.0, 2.5, 0.25]);
        let back = decode(&encode(&model)).unwrap();
        assert_eq!(back, model);
    }

    #[test]
    fn truncation_detected() {
        let bytes = encode(&MultiHeadModel::for_taxonomy(3, 1).unwrap());
        assert!(matches!(decode(&bytes[..bytes.len() - 1]), Err(CheckpointError::Truncated("parameters"))));
        assert!(matches!(decode(b"XXXX"), Err(CheckpointError::BadMagic)));
    }
}
