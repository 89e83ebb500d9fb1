use super::{expect_shape, Tensor};
use crate::error::Result;

pub fn relu(input: &Tensor) -> Tensor {
    let mut out = input.clone();
    for v in out.data_mut() {
        *v = v.max(0.0);
    }
    out
}

/// Passes the upstream gradient where the cached input was strictly
/// positive; the subgradient at exactly zero is taken as zero.
pub fn relu_backward(grad_output: &Tensor, cached_input: &Tensor) -> Result<Tensor> {
    expect_shape(
        "relu grad_output",
        grad_output.shape(),
        cached_input.shape(),
    )?;
    let data = grad_output
        .data()
        .iter()
        .zip(cached_input.data())
        .map(|(&g, &x)| if x > 0.0 { g } else { 0.0 })
        .collect();
    Tensor::new(cached_input.shape().to_vec(), data)
}
