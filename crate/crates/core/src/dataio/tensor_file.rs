//! Tensor file layout (all little-endian):
//!
//! ```text
//! "CENTTNSR" | u32 version | u32 rank | u64 dims[rank] | f32 payload[prod(dims)] | u32 crc32
//! ```
//!
//! The CRC-32 (IEEE) covers every byte before it.

use std::path::Path;

use crate::binio::{ByteReader, ByteWriter};
use crate::error::{Error, FormatError, Result};
use crate::tensor::Tensor;

pub const TENSOR_MAGIC: &[u8; 8] = b"CENTTNSR";
pub const TENSOR_VERSION: u32 = 1;

pub fn encode_tensor(tensor: &Tensor) -> Result<Vec<u8>> {
    if tensor.rank() == 0 {
        return Err(Error::contract("rank-0 tensors cannot be saved"));
    }
    let mut w = ByteWriter::with_header(TENSOR_MAGIC, TENSOR_VERSION);
    w.u32(tensor.rank() as u32);
    for &d in tensor.shape() {
        w.u64(d as u64);
    }
    w.f32s(tensor.data());
    Ok(w.finish())
}

pub fn decode_tensor(buf: &[u8]) -> Result<Tensor, FormatError> {
    let mut r = ByteReader::open(buf, TENSOR_MAGIC, "tensor", TENSOR_VERSION)?;
    let rank = r.u32()? as usize;
    if rank == 0 {
        return Err(FormatError::Malformed("rank 0".into()));
    }
    if rank.saturating_mul(8) > r.remaining() {
        return Err(FormatError::Truncated {
            offset: 16,
            needed: rank * 8,
            len: buf.len(),
        });
    }
    let mut shape = Vec::with_capacity(rank);
    let mut count: usize = 1;
    for _ in 0..rank {
        let d = r.u64()?;
        if d == 0 {
            return Err(FormatError::Malformed("zero-sized dimension".into()));
        }
        let d = usize::try_from(d)
            .map_err(|_| FormatError::Malformed(format!("dimension {d} too large")))?;
        count = count
            .checked_mul(d)
            .ok_or_else(|| FormatError::Malformed("element count overflows".into()))?;
        shape.push(d);
    }
    let expected_len = 8 + 4 + 4 + rank * 8 + count.saturating_mul(4) + 4;
    if buf.len() < expected_len {
        return Err(FormatError::Truncated {
            offset: buf.len(),
            needed: expected_len - buf.len(),
            len: buf.len(),
        });
    }
    let data = r.f32s(count)?;
    r.finish()?;
    Tensor::new(shape, data).map_err(|e| FormatError::Malformed(e.to_string()))
}

pub fn save_tensor(path: impl AsRef<Path>, tensor: &Tensor) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_tensor(tensor)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_tensor(path: impl AsRef<Path>) -> Result<Tensor> {
    let path = path.as_ref();
    let buf = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_tensor(&buf).map_err(|source| Error::Format {
        path: path.to_path_buf(),
        source,
    })
}
