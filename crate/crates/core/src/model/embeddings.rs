//! `RSME` precomputed-embedding files.
//!
//! ```text
//! "RSME" | version u32 | record_count u32
//! per record: ordinal u32 | L u32 | D u32 | f32 * L * D (row-major)
//! ```
//!
//! Records appear in corpus order, so record `i` has ordinal `i`.

use std::path::Path;

use crate::tensor::{Scalar, Tensor};

use super::ModelError;

pub const MAGIC: &[u8; 4] = b"RSME";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingRecord {
    pub ordinal: u32,
    pub rows: usize,
    pub dim: usize,
    pub data: Vec<f32>,
}

impl EmbeddingRecord {
    pub fn to_tensor<T: Scalar>(&self) -> Tensor<T> {
        let data = self.data.iter().map(|&v| T::of_f32(v)).collect();
        Tensor::new(&[self.rows, self.dim], data).expect("record payload matches its header")
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PrecomputedEmbeddings {
    pub records: Vec<EmbeddingRecord>,
}

impl PrecomputedEmbeddings {
    pub fn get(&self, ordinal: usize) -> Option<&EmbeddingRecord> {
        self.records.get(ordinal)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.records.len() as u32).to_le_bytes());
        for r in &self.records {
            out.extend_from_slice(&r.ordinal.to_le_bytes());
            out.extend_from_slice(&(r.rows as u32).to_le_bytes());
            out.extend_from_slice(&(r.dim as u32).to_le_bytes());
            for v in &r.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ModelError> {
        let fail = |msg: String| ModelError::Embeddings(msg);
        let mut r = crate::tensor::checkpoint_reader(bytes);
        let take_err = |e: crate::tensor::TensorError| fail(e.to_string());
        if r.take(4).map_err(take_err)? != MAGIC {
            return Err(fail("bad magic, expected RSME".into()));
        }
        let version = r.u32().map_err(take_err)?;
        if version != VERSION {
            return Err(fail(format!("unsupported version {version}")));
        }
        let count = r.u32().map_err(take_err)?;
        let mut records = Vec::with_capacity(count as usize);
        let mut dim = None;
        for i in 0..count {
            let ordinal = r.u32().map_err(take_err)?;
            if ordinal != i {
                return Err(fail(format!(
                    "record {i} has ordinal {ordinal}; records must follow corpus order"
                )));
            }
            let rows = r.u32().map_err(take_err)? as usize;
            let d = r.u32().map_err(take_err)? as usize;
            if *dim.get_or_insert(d) != d {
                return Err(fail(format!(
                    "record {i} has width {d}, expected {}",
                    dim.unwrap()
                )));
            }
            let payload = r.take(rows * d * 4).map_err(take_err)?;
            let data = payload
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect();
            records.push(EmbeddingRecord {
                ordinal,
                rows,
                dim: d,
                data,
            });
        }
        if r.pos != bytes.len() {
            return Err(fail("trailing bytes after last record".into()));
        }
        Ok(Self { records })
    }

    pub fn read(path: &Path) -> Result<Self, ModelError> {
        let bytes = std::fs::read(path)
            .map_err(|e| ModelError::Embeddings(format!("{}: {e}", path.display())))?;
        Self::from_bytes(&bytes)
    }

    pub fn write(&self, path: &Path) -> Result<(), ModelError> {
        std::fs::write(path, self.to_bytes())
            .map_err(|e| ModelError::Embeddings(format!("{}: {e}", path.display())))
    }
}
