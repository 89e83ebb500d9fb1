use serde::{Deserialize, Serialize};

use super::geometry::{Padding, Window3};
use super::{expect_shape, Tensor};
use crate::error::{Error, Result};

/// Convolution hyperparameters over 1-3 spatial axes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvSpec {
    pub kernel: Vec<usize>,
    pub stride: Vec<usize>,
    pub padding: Padding,
    pub filters: usize,
}

impl ConvSpec {
    /// Same kernel extent and stride on every one of `rank` axes.
    pub fn cubic(
        rank: usize,
        kernel: usize,
        stride: usize,
        padding: Padding,
        filters: usize,
    ) -> Self {
        ConvSpec {
            kernel: vec![kernel; rank],
            stride: vec![stride; rank],
            padding,
            filters,
        }
    }

    pub fn spatial_rank(&self) -> usize {
        self.kernel.len()
    }

    /// Output spatial extent for the given input spatial extent.
    pub fn output_extent(&self, input_spatial: &[usize]) -> Result<Vec<usize>> {
        let g = Window3::new(input_spatial, &self.kernel, &self.stride, self.padding)?;
        Ok(g.output_shape(input_spatial.len()))
    }

    fn filter_shape(&self, channels: usize) -> Vec<usize> {
        let mut s = vec![self.filters, channels];
        s.extend_from_slice(&self.kernel);
        s
    }

    /// Validates `input` against the spec and returns its channel count and geometry.
    fn geometry(&self, input: &Tensor) -> Result<(usize, Window3)> {
        if self.filters == 0 {
            return Err(Error::contract("convolution needs at least one filter"));
        }
        if input.rank() != self.spatial_rank() + 1 {
            return Err(Error::ShapeMismatch {
                context: "conv input (channels + spatial) vs kernel rank",
                left: input.shape().to_vec(),
                right: self.kernel.clone(),
            });
        }
        let g = Window3::new(
            &input.shape()[1..],
            &self.kernel,
            &self.stride,
            self.padding,
        )?;
        Ok((input.shape()[0], g))
    }

    /// Checks `filters` against the input's channel count and the spec.
    fn check_filters(&self, input: &Tensor, filters: &Tensor, channels: usize) -> Result<()> {
        if filters.shape() != self.filter_shape(channels).as_slice() {
            return Err(Error::ShapeMismatch {
                context: "conv input vs filters [filters, channels, kernel..]",
                left: input.shape().to_vec(),
                right: filters.shape().to_vec(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvGrads {
    pub input: Tensor,
    pub filters: Tensor,
    pub bias: Tensor,
}

/// `input` is `[channels, spatial..]`, `filters` is
/// `[filters, channels, kernel..]`, `bias` is `[filters]`.
pub fn conv_forward(
    input: &Tensor,
    filters: &Tensor,
    bias: &Tensor,
    spec: &ConvSpec,
) -> Result<Tensor> {
    let (channels, g) = spec.geometry(input)?;
    spec.check_filters(input, filters, channels)?;
    expect_shape("conv bias", bias.shape(), &[spec.filters])?;

    let x = input.data();
    let w = filters.data();
    let in_len = g.input_len();
    let k_len: usize = g.kernel.iter().product();
    let [od, oh, ow] = g.output;
    let [ih, iw] = [g.input[1], g.input[2]];
    let [kd, kh, kw] = g.kernel;

    let mut out = Vec::with_capacity(spec.filters * g.output_len());
    for f in 0..spec.filters {
        let wf = &w[f * channels * k_len..(f + 1) * channels * k_len];
        for o0 in 0..od {
            for o1 in 0..oh {
                for o2 in 0..ow {
                    let mut acc = bias.data()[f] as f64;
                    for c in 0..channels {
                        let xc = &x[c * in_len..(c + 1) * in_len];
                        let wc = &wf[c * k_len..(c + 1) * k_len];
                        for a in 0..kd {
                            let Some(i0) = g.source(0, o0, a) else {
                                continue;
                            };
                            for b in 0..kh {
                                let Some(i1) = g.source(1, o1, b) else {
                                    continue;
                                };
                                let row = (i0 * ih + i1) * iw;
                                let wrow = (a * kh + b) * kw;
                                for e in 0..kw {
                                    if let Some(i2) = g.source(2, o2, e) {
                                        acc += xc[row + i2] as f64 * wc[wrow + e] as f64;
                                    }
                                }
                            }
                        }
                    }
                    out.push(acc as f32);
                }
            }
        }
    }

    let mut shape = vec![spec.filters];
    shape.extend(g.output_shape(spec.spatial_rank()));
    Tensor::new(shape, out)
}

/// Gradients of a scalar loss with respect to the convolution's input,
/// filters and bias, given the loss gradient at the output.
pub fn conv_backward(
    grad_output: &Tensor,
    cached_input: &Tensor,
    filters: &Tensor,
    spec: &ConvSpec,
) -> Result<ConvGrads> {
    let (channels, g) = spec.geometry(cached_input)?;
    spec.check_filters(cached_input, filters, channels)?;
    let mut out_shape = vec![spec.filters];
    out_shape.extend(g.output_shape(spec.spatial_rank()));
    expect_shape("conv grad_output", grad_output.shape(), &out_shape)?;

    let x = cached_input.data();
    let w = filters.data();
    let gy = grad_output.data();
    let in_len = g.input_len();
    let out_len = g.output_len();
    let k_len: usize = g.kernel.iter().product();
    let [od, oh, ow] = g.output;
    let [ih, iw] = [g.input[1], g.input[2]];
    let [kd, kh, kw] = g.kernel;

    let mut gx = vec![0f64; x.len()];
    let mut gw = vec![0f64; w.len()];
    let mut gb = vec![0f64; spec.filters];

    for f in 0..spec.filters {
        let f_base = f * channels * k_len;
        for o0 in 0..od {
            for o1 in 0..oh {
                for o2 in 0..ow {
                    let gout = gy[f * out_len + (o0 * oh + o1) * ow + o2] as f64;
                    if gout == 0.0 {
                        continue;
                    }
                    gb[f] += gout;
                    for c in 0..channels {
                        let x_base = c * in_len;
                        let w_base = f_base + c * k_len;
                        for a in 0..kd {
                            let Some(i0) = g.source(0, o0, a) else {
                                continue;
                            };
                            for b in 0..kh {
                                let Some(i1) = g.source(1, o1, b) else {
                                    continue;
                                };
                                let row = x_base + (i0 * ih + i1) * iw;
                                let wrow = w_base + (a * kh + b) * kw;
                                for e in 0..kw {
                                    if let Some(i2) = g.source(2, o2, e) {
                                        gx[row + i2] += w[wrow + e] as f64 * gout;
                                        gw[wrow + e] += x[row + i2] as f64 * gout;
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    let narrow = |v: Vec<f64>| v.into_iter().map(|x| x as f32).collect::<Vec<_>>();
    Ok(ConvGrads {
        input: Tensor::new(cached_input.shape().to_vec(), narrow(gx))?,
        filters: Tensor::new(filters.shape().to_vec(), narrow(gw))?,
        bias: Tensor::new(vec![spec.filters], narrow(gb))?,
    })
}
