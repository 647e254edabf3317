//! `.emb` embedding files.
//!
//! Layout, all integers little-endian `u32`:
//!
//! | bytes            | content                                  |
//! |------------------|------------------------------------------|
//! | 0..4             | magic `FEMB`                             |
//! | 4..8             | format version (1)                       |
//! | 8..12            | row count N                              |
//! | 12..16           | dimension d                              |
//! | 16..16+4·N·d     | `f32` values, row-major                  |
//! | then, N times    | id byte length, then the UTF-8 id bytes  |

use std::path::Path;

use factkit_core::embedding::EmbeddingError;
use factkit_core::EmbeddingMatrix;
use thiserror::Error;

pub const MAGIC: [u8; 4] = *b"FEMB";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum EmbFileError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("not an embedding file (bad magic)")]
    BadMagic,
    #[error("unsupported embedding file version {0}")]
    UnsupportedVersion(u32),
    #[error("embedding dimension {found}, expected {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("file truncated: {section} needs {needed} bytes, {available} remain")]
    TruncatedFile {
        section: &'static str,
        needed: usize,
        available: usize,
    },
    #[error("{0} unexpected bytes after the id list")]
    TrailingBytes(usize),
    #[error("id of row {0} is not valid UTF-8")]
    BadId(usize),
    #[error(transparent)]
    Invalid(#[from] EmbeddingError),
}

pub fn encode(m: &EmbeddingMatrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + 4 * m.data().len());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(m.rows() as u32).to_le_bytes());
    out.extend_from_slice(&(m.dim() as u32).to_le_bytes());
    for v in m.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for id in m.ids() {
        out.extend_from_slice(&(id.len() as u32).to_le_bytes());
        out.extend_from_slice(id.as_bytes());
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, section: &'static str) -> Result<&'a [u8], EmbFileError> {
        let available = self.bytes.len() - self.pos;
        if n > available {
            return Err(EmbFileError::TruncatedFile {
                section,
                needed: n,
                available,
            });
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u32(&mut self, section: &'static str) -> Result<u32, EmbFileError> {
        let b = self.take(4, section)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

pub fn decode(bytes: &[u8]) -> Result<EmbeddingMatrix, EmbFileError> {
    let mut r = Reader { bytes, pos: 0 };
    if bytes.len() >= 4 && bytes[..4] != MAGIC {
        return Err(EmbFileError::BadMagic);
    }
    r.take(4, "header")?;
    let version = r.u32("header")?;
    if version != VERSION {
        return Err(EmbFileError::UnsupportedVersion(version));
    }
    let rows = r.u32("header")? as usize;
    let dim = r.u32("header")? as usize;
    let values = rows
        .checked_mul(dim)
        .and_then(|n| n.checked_mul(4))
        .ok_or(EmbFileError::TruncatedFile {
            section: "values",
            needed: usize::MAX,
            available: bytes.len() - r.pos,
        })?;
    let data: Vec<f32> = r
        .take(values, "values")?
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    let mut ids = Vec::with_capacity(rows);
    for row in 0..rows {
        let len = r.u32("ids")? as usize;
        let raw = r.take(len, "ids")?;
        ids.push(String::from_utf8(raw.to_vec()).map_err(|_| EmbFileError::BadId(row))?);
    }
    if r.pos != bytes.len() {
        return Err(EmbFileError::TrailingBytes(bytes.len() - r.pos));
    }
    Ok(EmbeddingMatrix::new(dim, data, ids)?)
}

pub fn load_embeddings(path: &Path) -> Result<EmbeddingMatrix, EmbFileError> {
    let bytes = std::fs::read(path).map_err(|source| EmbFileError::Io {
        path: path.display().to_string(),
        source,
    })?;
    decode(&bytes)
}

/// Loads a file and checks its dimension against what a model expects.
pub fn load_embeddings_with_dim(path: &Path, dim: usize) -> Result<EmbeddingMatrix, EmbFileError> {
    let m = load_embeddings(path)?;
    if m.dim() != dim {
        return Err(EmbFileError::DimensionMismatch {
            expected: dim,
            found: m.dim(),
        });
    }
    Ok(m)
}

pub fn write_embeddings(path: &Path, m: &EmbeddingMatrix) -> Result<(), EmbFileError> {
    std::fs::write(path, encode(m)).map_err(|source| EmbFileError::Io {
        path: path.display().to_string(),
        source,
    })
}
