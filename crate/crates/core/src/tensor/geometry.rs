use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Padding {
    /// Windows lie entirely inside the input.
    Valid,
    /// Output extent is `ceil(input / stride)`; the overhang is split with
    /// the smaller half before the input. Convolutions read zeros there,
    /// pooling windows are clipped to the input.
    Same,
}

/// Window geometry for 1-3 spatial axes, normalized to three axes by
/// prepending unit axes so the kernels need only one loop nest.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Window3 {
    pub input: [usize; 3],
    pub kernel: [usize; 3],
    pub stride: [usize; 3],
    pub pad_before: [usize; 3],
    pub output: [usize; 3],
}

impl Window3 {
    pub fn new(
        input: &[usize],
        kernel: &[usize],
        stride: &[usize],
        padding: Padding,
    ) -> Result<Self> {
        let rank = input.len();
        if rank == 0 || rank > 3 {
            return Err(Error::contract(format!(
                "1 to 3 spatial axes supported, got {rank}"
            )));
        }
        if kernel.len() != rank || stride.len() != rank {
            return Err(Error::contract(format!(
                "window {kernel:?} / stride {stride:?} do not match spatial rank {rank}"
            )));
        }
        let mut g = Window3 {
            input: [1; 3],
            kernel: [1; 3],
            stride: [1; 3],
            pad_before: [0; 3],
            output: [1; 3],
        };
        let off = 3 - rank;
        for a in 0..rank {
            let (n, k, s) = (input[a], kernel[a], stride[a]);
            if k == 0 || s == 0 {
                return Err(Error::contract(format!(
                    "window {kernel:?} and stride {stride:?} must be positive"
                )));
            }
            let (out, pad) = match padding {
                Padding::Valid => {
                    if k > n {
                        return Err(Error::contract(format!(
                            "window {kernel:?} larger than input {input:?} on axis {a}"
                        )));
                    }
                    ((n - k) / s + 1, 0)
                }
                Padding::Same => {
                    let out = n.div_ceil(s);
                    let total = ((out - 1) * s + k).saturating_sub(n);
                    if k > n + total {
                        return Err(Error::contract(format!(
                            "window {kernel:?} larger than padded input {input:?}"
                        )));
                    }
                    (out, total / 2)
                }
            };
            g.input[off + a] = n;
            g.kernel[off + a] = k;
            g.stride[off + a] = s;
            g.pad_before[off + a] = pad;
            g.output[off + a] = out;
        }
        Ok(g)
    }

    pub fn input_len(&self) -> usize {
        self.input.iter().product()
    }

    pub fn output_len(&self) -> usize {
        self.output.iter().product()
    }

    /// Output extent restricted to the original spatial rank.
    pub fn output_shape(&self, rank: usize) -> Vec<usize> {
        self.output[3 - rank..].to_vec()
    }

    /// Input coordinate on `axis` read by output `o` at kernel offset `k`,
    /// or `None` if it falls into padding.
    #[inline]
    pub fn source(&self, axis: usize, o: usize, k: usize) -> Option<usize> {
        let pos = o * self.stride[axis] + k;
        let pos = pos.checked_sub(self.pad_before[axis])?;
        (pos < self.input[axis]).then_some(pos)
    }
}
