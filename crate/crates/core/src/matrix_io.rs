//! Dense matrix files and embedding JSONL.
//!
//! Binary layout (little endian):
//!
//! | offset | size      | field                      |
//! |--------|-----------|----------------------------|
//! | 0      | 4         | magic `b"LCMX"`            |
//! | 4      | 4         | rows, `u32`                |
//! | 8      | 4         | cols, `u32`                |
//! | 12     | 4·rows·cols | values, `f32`, row-major |
//!
//! Similarity matrices and token-embedding grids share this format.

use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{EmbeddingMatrix, GeometryError};
use crate::jsonl;

pub const MAGIC: [u8; 4] = *b"LCMX";
const HEADER_LEN: usize = 12;

#[derive(Debug, Error)]
pub enum MatrixIoError {
    #[error("{path}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("bad magic {0:?}, expected \"LCMX\"")]
    BadMagic([u8; 4]),
    #[error("file truncated: {got} bytes, expected {expected}")]
    Truncated { got: usize, expected: usize },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("{path}:{line}: {message}")]
    Record {
        path: String,
        line: usize,
        message: String,
    },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> MatrixIoError + '_ {
    move |source| MatrixIoError::Io {
        path: path.display().to_string(),
        source,
    }
}

pub fn encode(m: &EmbeddingMatrix<f32>) -> Vec<u8> {
    let mut buf = Vec::with_capacity(HEADER_LEN + 4 * m.as_slice().len());
    buf.extend_from_slice(&MAGIC);
    buf.extend_from_slice(&(m.rows() as u32).to_le_bytes());
    buf.extend_from_slice(&(m.dim() as u32).to_le_bytes());
    for v in m.as_slice() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf
}

pub fn decode(bytes: &[u8]) -> Result<EmbeddingMatrix<f32>, MatrixIoError> {
    if bytes.len() < HEADER_LEN {
        return Err(MatrixIoError::Truncated {
            got: bytes.len(),
            expected: HEADER_LEN,
        });
    }
    let word = |i: usize| [bytes[i], bytes[i + 1], bytes[i + 2], bytes[i + 3]];
    if word(0) != MAGIC {
        return Err(MatrixIoError::BadMagic(word(0)));
    }
    let rows = u32::from_le_bytes(word(4)) as usize;
    let cols = u32::from_le_bytes(word(8)) as usize;
    let expected = HEADER_LEN + 4 * rows * cols;
    if bytes.len() != expected {
        return Err(MatrixIoError::Truncated {
            got: bytes.len(),
            expected,
        });
    }
    let data = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    Ok(EmbeddingMatrix::new(rows, cols, data)?)
}

pub fn read_matrix(path: &Path) -> Result<EmbeddingMatrix<f32>, MatrixIoError> {
    decode(&fs::read(path).map_err(io_err(path))?)
}

pub fn write_matrix(path: &Path, m: &EmbeddingMatrix<f32>) -> Result<(), MatrixIoError> {
    fs::write(path, encode(m)).map_err(io_err(path))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingRecord {
    pub id: String,
    pub vector: Vec<f32>,
}

/// Read `{"id", "vector"}` records. Every vector must have the same length.
pub fn read_embeddings(path: &Path) -> Result<Vec<EmbeddingRecord>, MatrixIoError> {
    let mut out: Vec<EmbeddingRecord> = Vec::new();
    for item in jsonl::read_lines(path).map_err(io_err(path))? {
        let (line, raw) = item.map_err(io_err(path))?;
        let record_err = |message: String| MatrixIoError::Record {
            path: path.display().to_string(),
            line,
            message,
        };
        let rec: EmbeddingRecord = serde_json::from_str(&raw).map_err(|e| record_err(e.to_string()))?;
        if let Some(first) = out.first() {
            if first.vector.len() != rec.vector.len() {
                return Err(record_err(format!(
                    "vector has {} dims, expected {}",
                    rec.vector.len(),
                    first.vector.len()
                )));
            }
        }
        if rec.vector.iter().any(|v| !v.is_finite()) {
            return Err(record_err("non-finite value".into()));
        }
        out.push(rec);
    }
    Ok(out)
}

pub fn write_embeddings(path: &Path, records: &[EmbeddingRecord]) -> Result<(), MatrixIoError> {
    jsonl::write_records(path, records).map_err(io_err(path))?;
    Ok(())
}
