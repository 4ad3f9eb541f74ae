//! IDX tensors: a big-endian `u32` magic (`0x0000_08NN`, `NN` the rank for
//! unsigned bytes), one big-endian `u32` per dimension, then row-major bytes.

use std::path::Path;

use thiserror::Error;

use crate::points::Points;

pub const MAGIC_U8_RANK1: u32 = 0x0000_0801;
pub const MAGIC_U8_RANK3: u32 = 0x0000_0803;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum IdxError {
    #[error("wrong IDX magic {0:#010x}")]
    WrongMagic(u32),
    #[error("truncated IDX file: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
}

/// Unsigned-byte tensor read from an IDX file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IdxTensor {
    pub dims: Vec<usize>,
    pub data: Vec<u8>,
}

impl IdxTensor {
    pub fn new(dims: Vec<usize>, data: Vec<u8>) -> Self {
        debug_assert_eq!(dims.iter().product::<usize>(), data.len());
        IdxTensor { dims, data }
    }

    /// One point per leading index, remaining axes flattened, bytes scaled
    /// to [0, 1].
    pub fn to_points(&self) -> Points {
        let n = self.dims.first().copied().unwrap_or(0);
        let dim = if n == 0 { 1 } else { (self.data.len() / n).max(1) };
        let data = self.data.iter().map(|b| f64::from(*b) / 255.0).collect();
        Points::from_flat(dim, data).expect("length is a multiple of the row size")
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let magic = 0x0000_0800u32 | self.dims.len() as u32;
        let mut out = magic.to_be_bytes().to_vec();
        for d in &self.dims {
            out.extend_from_slice(&(*d as u32).to_be_bytes());
        }
        out.extend_from_slice(&self.data);
        out
    }
}

fn read_u32(bytes: &[u8], at: usize) -> Result<u32, IdxError> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or(IdxError::Truncated {
            expected: at + 4,
            found: bytes.len(),
        })
}

pub fn parse_idx(bytes: &[u8]) -> Result<IdxTensor, IdxError> {
    let magic = read_u32(bytes, 0)?;
    if magic != MAGIC_U8_RANK1 && magic != MAGIC_U8_RANK3 {
        return Err(IdxError::WrongMagic(magic));
    }
    let rank = (magic & 0xff) as usize;
    let mut dims = Vec::with_capacity(rank);
    for r in 0..rank {
        dims.push(read_u32(bytes, 4 + 4 * r)? as usize);
    }
    let header = 4 + 4 * rank;
    let expected = header + dims.iter().product::<usize>();
    if bytes.len() != expected {
        return Err(IdxError::Truncated {
            expected,
            found: bytes.len(),
        });
    }
    Ok(IdxTensor {
        dims,
        data: bytes[header..].to_vec(),
    })
}

pub fn load_idx(path: impl AsRef<Path>) -> crate::error::Result<IdxTensor> {
    let bytes = std::fs::read(path)?;
    Ok(parse_idx(&bytes)?)
}
