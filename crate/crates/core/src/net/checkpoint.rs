//! Binary checkpoint format.
//!
//! ```text
//! "CENTCKPT" | u32 version | u64 seed
//! u32 input_rank | u64 dims[input_rank]
//! u32 layer_count | layer table
//! f32 parameters (weights then bias, per parametric layer, in order)
//! u32 crc32 of everything above
//! ```
//!
//! Layer table entries start with a `u8` kind: 0 conv (`u32 rank`,
//! `u32 kernel[rank]`, `u32 stride[rank]`, `u8 padding`, `u32 filters`),
//! 1 relu, 2 max pool (`u32 rank`, `u32 window[rank]`, `u32 stride[rank]`,
//! `u8 padding`), 3 fully connected (`u32 outputs`), 4 softmax. Padding is
//! 0 for valid and 1 for same. All integers and reals are little-endian.

use std::path::Path;

use super::{infer_shape, LayerSpec, Network};
use crate::binio::{ByteReader, ByteWriter};
use crate::error::{Error, FormatError, Result};
use crate::tensor::{ConvSpec, Padding, PoolSpec};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"CENTCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

const MAX_RANK: u32 = 8;

fn put_axes(w: &mut ByteWriter, axes: &[usize]) {
    for &a in axes {
        w.u32(a as u32);
    }
}

fn put_padding(w: &mut ByteWriter, p: Padding) {
    w.u8(match p {
        Padding::Valid => 0,
        Padding::Same => 1,
    });
}

pub(crate) fn encode(net: &Network) -> Vec<u8> {
    let mut w = ByteWriter::with_header(CHECKPOINT_MAGIC, CHECKPOINT_VERSION);
    w.u64(net.seed);
    w.u32(net.input_shape.len() as u32);
    for &d in &net.input_shape {
        w.u64(d as u64);
    }
    w.u32(net.layers.len() as u32);
    for layer in &net.layers {
        match layer.spec() {
            LayerSpec::Conv(c) => {
                w.u8(0);
                w.u32(c.kernel.len() as u32);
                put_axes(&mut w, &c.kernel);
                put_axes(&mut w, &c.stride);
                put_padding(&mut w, c.padding);
                w.u32(c.filters as u32);
            }
            LayerSpec::Relu => w.u8(1),
            LayerSpec::MaxPool(p) => {
                w.u8(2);
                w.u32(p.window.len() as u32);
                put_axes(&mut w, &p.window);
                put_axes(&mut w, &p.stride);
                put_padding(&mut w, p.padding);
            }
            LayerSpec::FullyConnected { outputs } => {
                w.u8(3);
                w.u32(outputs as u32);
            }
            LayerSpec::Softmax => w.u8(4),
        }
    }
    for (weights, bias) in net.layers.iter().filter_map(|l| l.params()) {
        w.f32s(weights.data());
        w.f32s(bias.data());
    }
    w.finish()
}

fn get_rank(r: &mut ByteReader) -> Result<usize, FormatError> {
    let rank = r.u32()?;
    if rank == 0 || rank > MAX_RANK {
        return Err(FormatError::Malformed(format!("implausible rank {rank}")));
    }
    Ok(rank as usize)
}

fn get_axes(r: &mut ByteReader, rank: usize) -> Result<Vec<usize>, FormatError> {
    (0..rank).map(|_| r.u32().map(|v| v as usize)).collect()
}

fn get_padding(r: &mut ByteReader) -> Result<Padding, FormatError> {
    match r.u8()? {
        0 => Ok(Padding::Valid),
        1 => Ok(Padding::Same),
        other => Err(FormatError::Malformed(format!(
            "unknown padding tag {other}"
        ))),
    }
}

/// Parameter count implied by a spec chain, computed without allocating.
fn param_count(input: &[usize], specs: &[LayerSpec]) -> Result<usize, FormatError> {
    let mut shape = input.to_vec();
    let mut total = 0usize;
    for spec in specs {
        let out = infer_shape(spec, &shape).map_err(|e| FormatError::Malformed(e.to_string()))?;
        let n = match spec {
            LayerSpec::Conv(c) => {
                let k: usize = c.kernel.iter().product();
                c.filters
                    .checked_mul(shape[0])
                    .and_then(|v| v.checked_mul(k))
                    .map(|v| v + c.filters)
            }
            LayerSpec::FullyConnected { outputs } => {
                let fan_in: usize = shape.iter().product();
                outputs.checked_mul(fan_in).map(|v| v + outputs)
            }
            _ => Some(0),
        };
        total = n
            .and_then(|n| total.checked_add(n))
            .ok_or_else(|| FormatError::Malformed("parameter count overflows".into()))?;
        shape = out;
    }
    Ok(total)
}

pub(crate) fn decode(buf: &[u8]) -> Result<Network, FormatError> {
    let mut r = ByteReader::open(buf, CHECKPOINT_MAGIC, "checkpoint", CHECKPOINT_VERSION)?;
    let seed = r.u64()?;
    let rank = get_rank(&mut r)?;
    let input_shape = (0..rank)
        .map(|_| r.u64().map(|v| v as usize))
        .collect::<Result<Vec<_>, _>>()?;
    let layer_count = r.u32()? as usize;
    if layer_count > r.remaining() {
        return Err(FormatError::Malformed(format!(
            "implausible layer count {layer_count}"
        )));
    }
    let mut specs = Vec::with_capacity(layer_count);
    for _ in 0..layer_count {
        let spec = match r.u8()? {
            0 => {
                let rank = get_rank(&mut r)?;
                let kernel = get_axes(&mut r, rank)?;
                let stride = get_axes(&mut r, rank)?;
                let padding = get_padding(&mut r)?;
                let filters = r.u32()? as usize;
                LayerSpec::Conv(ConvSpec {
                    kernel,
                    stride,
                    padding,
                    filters,
                })
            }
            1 => LayerSpec::Relu,
            2 => {
                let rank = get_rank(&mut r)?;
                let window = get_axes(&mut r, rank)?;
                let stride = get_axes(&mut r, rank)?;
                let padding = get_padding(&mut r)?;
                LayerSpec::MaxPool(PoolSpec {
                    window,
                    stride,
                    padding,
                })
            }
            3 => LayerSpec::FullyConnected {
                outputs: r.u32()? as usize,
            },
            4 => LayerSpec::Softmax,
            other => {
                return Err(FormatError::Malformed(format!(
                    "unknown layer kind {other}"
                )))
            }
        };
        specs.push(spec);
    }

    let needed = param_count(&input_shape, &specs)?;
    if needed.saturating_mul(4) > r.remaining() {
        return Err(FormatError::Truncated {
            offset: buf.len() - 4 - r.remaining(),
            needed: needed * 4,
            len: buf.len(),
        });
    }
    let mut net = Network::build(&input_shape, &specs, seed)
        .map_err(|e| FormatError::Malformed(e.to_string()))?;
    for layer in net.layers.iter_mut() {
        if let Some((w, b)) = layer.params_mut() {
            let wv = r.f32s(w.len())?;
            w.data_mut().copy_from_slice(&wv);
            let bv = r.f32s(b.len())?;
            b.data_mut().copy_from_slice(&bv);
        }
    }
    r.finish()?;
    Ok(net)
}

pub fn save_checkpoint(net: &Network, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode(net)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Network> {
    let path = path.as_ref();
    let buf = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&buf).map_err(|source| Error::Format {
        path: path.to_path_buf(),
        source,
    })
}
