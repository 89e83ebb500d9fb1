//! Forest file layout (little-endian):
//!
//! ```text
//! "CENTFRST" | u32 version | u32 feature_count | u32 class_count
//! u8 has_oob | f64 oob_accuracy (only if has_oob = 1)
//! u32 tree_count, then per tree: u32 node_count, then per node
//!   u8 0 (split) | u32 feature | f64 threshold | u32 left | u32 right | u64 samples | f64 gain
//!   u8 1 (leaf)  | u64 counts[class_count]
//! u32 crc32 of everything above
//! ```
//!
//! Children always come after their parent, which rules out cycles.

use std::fmt::Write as _;
use std::path::Path;

use super::tree::{DecisionTree, Node};
use super::{count_splits, ForestModel};
use crate::binio::{ByteReader, ByteWriter};
use crate::error::{Error, FormatError, Result};

pub const FOREST_MAGIC: &[u8; 8] = b"CENTFRST";
pub const FOREST_VERSION: u32 = 1;

pub fn encode_forest(model: &ForestModel) -> Vec<u8> {
    let mut w = ByteWriter::with_header(FOREST_MAGIC, FOREST_VERSION);
    w.u32(model.feature_count as u32);
    w.u32(model.class_count as u32);
    match model.oob_accuracy {
        Some(a) => {
            w.u8(1);
            w.f64(a);
        }
        None => w.u8(0),
    }
    w.u32(model.trees.len() as u32);
    for t in &model.trees {
        w.u32(t.nodes.len() as u32);
        for node in &t.nodes {
            match node {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    samples,
                    gain,
                } => {
                    w.u8(0);
                    w.u32(*feature as u32);
                    w.f64(*threshold);
                    w.u32(*left as u32);
                    w.u32(*right as u32);
                    w.u64(*samples);
                    w.f64(*gain);
                }
                Node::Leaf { counts } => {
                    w.u8(1);
                    for &c in counts {
                        w.u64(c);
                    }
                }
            }
        }
    }
    w.finish()
}

fn malformed(msg: impl Into<String>) -> FormatError {
    FormatError::Malformed(msg.into())
}

fn decode_tree(
    r: &mut ByteReader,
    features: usize,
    classes: usize,
) -> Result<DecisionTree, FormatError> {
    let count = r.u32()? as usize;
    if count == 0 {
        return Err(malformed("tree with no nodes"));
    }
    // smallest node is a leaf: 1 + 8 * classes bytes
    if count.saturating_mul(1 + 8 * classes) > r.remaining() {
        return Err(FormatError::Truncated {
            offset: 0,
            needed: count * (1 + 8 * classes),
            len: r.remaining(),
        });
    }
    let mut referenced = vec![false; count];
    let mut nodes = Vec::with_capacity(count);
    for i in 0..count {
        let node = match r.u8()? {
            0 => {
                let feature = r.u32()? as usize;
                let threshold = r.f64()?;
                let left = r.u32()? as usize;
                let right = r.u32()? as usize;
                let samples = r.u64()?;
                let gain = r.f64()?;
                if feature >= features {
                    return Err(malformed(format!(
                        "node {i} splits on feature {feature} of {features}"
                    )));
                }
                if !threshold.is_finite() || !gain.is_finite() {
                    return Err(malformed(format!(
                        "node {i} has a non-finite threshold or gain"
                    )));
                }
                for c in [left, right] {
                    if c <= i || c >= count || std::mem::replace(&mut referenced[c], true) {
                        return Err(malformed(format!("node {i} has invalid child {c}")));
                    }
                }
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    samples,
                    gain,
                }
            }
            1 => {
                let counts = (0..classes)
                    .map(|_| r.u64())
                    .collect::<Result<Vec<_>, _>>()?;
                if counts.iter().all(|&c| c == 0) {
                    return Err(malformed(format!("leaf {i} is empty")));
                }
                Node::Leaf { counts }
            }
            k => return Err(malformed(format!("unknown node kind {k}"))),
        };
        nodes.push(node);
    }
    if referenced.iter().skip(1).any(|r| !r) {
        return Err(malformed("tree has unreachable nodes"));
    }
    Ok(DecisionTree { nodes })
}

pub fn decode_forest(buf: &[u8]) -> Result<ForestModel, FormatError> {
    let mut r = ByteReader::open(buf, FOREST_MAGIC, "forest", FOREST_VERSION)?;
    let feature_count = r.u32()? as usize;
    let class_count = r.u32()? as usize;
    if feature_count == 0 || class_count < 2 {
        return Err(malformed(format!(
            "{feature_count} features, {class_count} classes"
        )));
    }
    let oob_accuracy = match r.u8()? {
        0 => None,
        1 => Some(r.f64()?),
        k => return Err(malformed(format!("bad oob flag {k}"))),
    };
    let tree_count = r.u32()? as usize;
    if tree_count == 0 {
        return Err(malformed("forest has no trees"));
    }
    let mut trees = Vec::new();
    for _ in 0..tree_count {
        trees.push(decode_tree(&mut r, feature_count, class_count)?);
    }
    r.finish()?;
    Ok(ForestModel {
        split_counts: count_splits(&trees, feature_count),
        trees,
        feature_count,
        class_count,
        oob_accuracy,
    })
}

pub fn save_forest(model: &ForestModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_forest(model)).map_err(|e| Error::io(path, e))
}

pub fn load_forest(path: impl AsRef<Path>) -> Result<ForestModel> {
    let path = path.as_ref();
    let buf = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_forest(&buf).map_err(|source| Error::Format {
        path: path.to_path_buf(),
        source,
    })
}

/// Indented text rendering of every tree, for debugging.
pub fn dump_forest(model: &ForestModel) -> String {
    let mut s = String::new();
    writeln!(
        s,
        "forest: {} trees, {} features, {} classes",
        model.trees.len(),
        model.feature_count,
        model.class_count
    )
    .unwrap();
    for (t, tree) in model.trees.iter().enumerate() {
        writeln!(s, "tree {t}").unwrap();
        let mut stack = vec![(0usize, 1usize)];
        while let Some((i, depth)) = stack.pop() {
            let pad = "  ".repeat(depth);
            match &tree.nodes[i] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    samples,
                    gain,
                } => {
                    writeln!(
                        s,
                        "{pad}[{i}] x{feature} <= {threshold} (n={samples}, gain={gain:.6})"
                    )
                    .unwrap();
                    stack.push((*right, depth + 1));
                    stack.push((*left, depth + 1));
                }
                Node::Leaf { counts } => writeln!(s, "{pad}[{i}] leaf {counts:?}").unwrap(),
            }
        }
    }
    s
}
