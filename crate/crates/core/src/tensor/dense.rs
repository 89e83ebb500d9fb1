use super::{expect_shape, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DenseGrads {
    /// Shaped like the cached input (not flattened).
    pub input: Tensor,
    pub weights: Tensor,
    pub bias: Tensor,
}

fn check(input: &Tensor, weights: &Tensor) -> Result<(usize, usize)> {
    if weights.rank() != 2 {
        return Err(Error::contract(format!(
            "dense weights must be [outputs, inputs], got {:?}",
            weights.shape()
        )));
    }
    let (m, n) = (weights.shape()[0], weights.shape()[1]);
    if input.len() != n {
        return Err(Error::ShapeMismatch {
            context: "dense input (flattened) vs weights",
            left: input.shape().to_vec(),
            right: weights.shape().to_vec(),
        });
    }
    Ok((m, n))
}

/// `weights · flatten(input) + bias`, with `weights` shaped `[m, n]`.
pub fn dense_forward(input: &Tensor, weights: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let (m, n) = check(input, weights)?;
    expect_shape("dense bias", bias.shape(), &[m])?;
    let x = input.data();
    let w = weights.data();
    let out = (0..m)
        .map(|i| {
            let row = &w[i * n..(i + 1) * n];
            let acc = row
                .iter()
                .zip(x)
                .fold(bias.data()[i] as f64, |acc, (&a, &b)| {
                    acc + a as f64 * b as f64
                });
            acc as f32
        })
        .collect();
    Tensor::new(vec![m], out)
}

pub fn dense_backward(
    grad_output: &Tensor,
    cached_input: &Tensor,
    weights: &Tensor,
) -> Result<DenseGrads> {
    let (m, n) = check(cached_input, weights)?;
    expect_shape("dense grad_output", grad_output.shape(), &[m])?;
    let x = cached_input.data();
    let w = weights.data();
    let g = grad_output.data();

    let mut gx = vec![0f64; n];
    let mut gw = Vec::with_capacity(m * n);
    for i in 0..m {
        let gi = g[i] as f64;
        let row = &w[i * n..(i + 1) * n];
        for j in 0..n {
            gx[j] += row[j] as f64 * gi;
            gw.push((gi * x[j] as f64) as f32);
        }
    }
    Ok(DenseGrads {
        input: Tensor::new(
            cached_input.shape().to_vec(),
            gx.into_iter().map(|v| v as f32).collect(),
        )?,
        weights: Tensor::new(vec![m, n], gw)?,
        bias: grad_output.clone(),
    })
}
