use serde::{Deserialize, Serialize};

use super::geometry::{Padding, Window3};
use super::{expect_shape, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolSpec {
    pub window: Vec<usize>,
    pub stride: Vec<usize>,
    pub padding: Padding,
}

impl PoolSpec {
    pub fn cubic(rank: usize, window: usize, stride: usize, padding: Padding) -> Self {
        PoolSpec {
            window: vec![window; rank],
            stride: vec![stride; rank],
            padding,
        }
    }

    pub fn output_extent(&self, input_spatial: &[usize]) -> Result<Vec<usize>> {
        let g = Window3::new(input_spatial, &self.window, &self.stride, self.padding)?;
        Ok(g.output_shape(input_spatial.len()))
    }
}

/// Flat input index of each output element's maximum.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PoolCache {
    pub input_shape: Vec<usize>,
    pub argmax: Vec<usize>,
}

/// Per-channel max pooling of a `[channels, spatial..]` tensor. Ties go to
/// the lowest flat input index.
pub fn maxpool_forward(input: &Tensor, spec: &PoolSpec) -> Result<(Tensor, PoolCache)> {
    let rank = spec.window.len();
    if input.rank() != rank + 1 {
        return Err(Error::ShapeMismatch {
            context: "maxpool input (channels + spatial) vs window rank",
            left: input.shape().to_vec(),
            right: spec.window.clone(),
        });
    }
    let g = Window3::new(
        &input.shape()[1..],
        &spec.window,
        &spec.stride,
        spec.padding,
    )?;
    let channels = input.shape()[0];
    let in_len = g.input_len();
    let [od, oh, ow] = g.output;
    let [ih, iw] = [g.input[1], g.input[2]];
    let [kd, kh, kw] = g.kernel;
    let x = input.data();

    let mut out = Vec::with_capacity(channels * g.output_len());
    let mut argmax = Vec::with_capacity(out.capacity());
    for c in 0..channels {
        let base = c * in_len;
        for o0 in 0..od {
            for o1 in 0..oh {
                for o2 in 0..ow {
                    let mut best = f32::NEG_INFINITY;
                    let mut best_idx = usize::MAX;
                    // Row-major scan visits flat indices in increasing order,
                    // so a strict comparison keeps the lowest index on ties.
                    for a in 0..kd {
                        let Some(i0) = g.source(0, o0, a) else {
                            continue;
                        };
                        for b in 0..kh {
                            let Some(i1) = g.source(1, o1, b) else {
                                continue;
                            };
                            for e in 0..kw {
                                let Some(i2) = g.source(2, o2, e) else {
                                    continue;
                                };
                                let idx = base + (i0 * ih + i1) * iw + i2;
                                if best_idx == usize::MAX || x[idx] > best {
                                    best = x[idx];
                                    best_idx = idx;
                                }
                            }
                        }
                    }
                    out.push(best);
                    argmax.push(best_idx);
                }
            }
        }
    }

    let mut shape = vec![channels];
    shape.extend(g.output_shape(rank));
    Ok((
        Tensor::new(shape, out)?,
        PoolCache {
            input_shape: input.shape().to_vec(),
            argmax,
        },
    ))
}

/// Routes each upstream gradient entry to its window's recorded argmax.
pub fn maxpool_backward(grad_output: &Tensor, cache: &PoolCache) -> Result<Tensor> {
    if grad_output.len() != cache.argmax.len() {
        return Err(Error::ShapeMismatch {
            context: "maxpool grad_output vs cached output",
            left: grad_output.shape().to_vec(),
            right: vec![cache.argmax.len()],
        });
    }
    let mut gx = Tensor::zeros(&cache.input_shape);
    let d = gx.data_mut();
    for (&g, &idx) in grad_output.data().iter().zip(&cache.argmax) {
        d[idx] += g;
    }
    expect_shape("maxpool grad_input", gx.shape(), &cache.input_shape)?;
    Ok(gx)
}
