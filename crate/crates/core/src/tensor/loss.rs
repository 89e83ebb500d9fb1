use super::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxLoss {
    pub probs: Tensor,
    /// `-ln probs[true_class]`, in nats.
    pub loss: f64,
    /// `probs - onehot(true_class)`.
    pub grad_logits: Tensor,
}

/// Max-shifted softmax in double precision.
fn softmax_f64(logits: &[f32]) -> (Vec<f64>, f64) {
    let max = logits.iter().copied().fold(f32::NEG_INFINITY, f32::max) as f64;
    let exps: Vec<f64> = logits.iter().map(|&z| (z as f64 - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    let log_norm = max + sum.ln();
    (exps.into_iter().map(|e| e / sum).collect(), log_norm)
}

pub fn softmax(logits: &Tensor) -> Tensor {
    let (p, _) = softmax_f64(logits.data());
    Tensor::new(
        logits.shape().to_vec(),
        p.into_iter().map(|v| v as f32).collect(),
    )
    .expect("same shape")
}

pub fn softmax_cross_entropy(logits: &Tensor, true_class: usize) -> Result<SoftmaxLoss> {
    let k = logits.len();
    if k < 2 {
        return Err(Error::contract(format!(
            "softmax needs at least 2 logits, got {k}"
        )));
    }
    if true_class >= k {
        return Err(Error::contract(format!(
            "class index {true_class} out of range for {k} logits"
        )));
    }
    let (p, log_norm) = softmax_f64(logits.data());
    let loss = (log_norm - logits.data()[true_class] as f64).max(0.0);
    let grad = p
        .iter()
        .enumerate()
        .map(|(i, &pi)| (pi - if i == true_class { 1.0 } else { 0.0 }) as f32)
        .collect();
    Ok(SoftmaxLoss {
        probs: Tensor::new(
            logits.shape().to_vec(),
            p.iter().map(|&v| v as f32).collect(),
        )?,
        loss,
        grad_logits: Tensor::new(logits.shape().to_vec(), grad)?,
    })
}
