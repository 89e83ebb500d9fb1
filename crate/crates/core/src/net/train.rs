use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Network, ParamGrads};
use crate::dataio::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.05,
            epochs: 20,
            batch_size: 10,
            seed: 0,
            shuffle: true,
        }
    }
}

impl TrainConfig {
    fn validate(&self, n: usize) -> Result<()> {
        // lr = 0 is allowed: it is the no-op step used to check the update path.
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(Error::contract(format!(
                "learning_rate must be finite and non-negative, got {}",
                self.learning_rate
            )));
        }
        if self.epochs == 0 {
            return Err(Error::contract("epochs must be positive"));
        }
        if self.batch_size == 0 || self.batch_size > n {
            return Err(Error::contract(format!(
                "batch_size must be in 1..={n}, got {}",
                self.batch_size
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub network: Network,
    /// Mean per-sample loss (nats) of each epoch, measured before each
    /// batch's update.
    pub loss_trace: Vec<f64>,
}

/// Mini-batch SGD on softmax cross-entropy.
///
/// Per-sample gradients within a batch are computed in parallel and summed
/// in sample order, so results do not depend on thread scheduling.
pub fn train(mut net: Network, data: &Dataset, config: &TrainConfig) -> Result<TrainOutcome> {
    let n = data.len();
    if n == 0 {
        return Err(Error::contract("training set is empty"));
    }
    config.validate(n)?;
    let classes = net.class_count();
    if let Some(&bad) = data.labels.iter().find(|&&l| l >= classes) {
        return Err(Error::contract(format!(
            "label {bad} out of range for {classes}-class network"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut loss_trace = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        if config.shuffle {
            order.shuffle(&mut rng);
        }
        let mut epoch_loss = 0.0;
        for (batch, idx) in order.chunks(config.batch_size).enumerate() {
            let results: Vec<(f64, ParamGrads)> = idx
                .par_iter()
                .map(|&i| net.loss_and_grads(&data.images[i], data.labels[i]))
                .collect::<Result<_>>()?;

            let mut sum: Option<ParamGrads> = None;
            let mut batch_loss = 0.0;
            for (loss, grads) in results {
                if !loss.is_finite() {
                    return Err(Error::NonFiniteLoss { epoch, batch });
                }
                batch_loss += loss;
                match &mut sum {
                    None => sum = Some(grads),
                    Some(acc) => accumulate(acc, &grads),
                }
            }
            epoch_loss += batch_loss;

            let scale = (config.learning_rate / idx.len() as f64) as f32;
            if scale != 0.0 {
                let sum = sum.expect("non-empty batch");
                for (layer, g) in net.layers.iter_mut().zip(sum) {
                    if let (Some((w, b)), Some((gw, gb))) = (layer.params_mut(), g) {
                        step(w.data_mut(), gw.data(), scale);
                        step(b.data_mut(), gb.data(), scale);
                    }
                }
                if !net.parameters_finite() {
                    return Err(Error::NonFiniteLoss { epoch, batch });
                }
            }
        }
        let mean = epoch_loss / n as f64;
        log::debug!("epoch {epoch}: mean loss {mean:.6}");
        loss_trace.push(mean);
    }

    Ok(TrainOutcome {
        network: net,
        loss_trace,
    })
}

fn accumulate(acc: &mut ParamGrads, grads: &ParamGrads) {
    for (a, g) in acc.iter_mut().zip(grads) {
        if let (Some((aw, ab)), Some((gw, gb))) = (a, g) {
            for (x, y) in aw.data_mut().iter_mut().zip(gw.data()) {
                *x += y;
            }
            for (x, y) in ab.data_mut().iter_mut().zip(gb.data()) {
                *x += y;
            }
        }
    }
}

fn step(params: &mut [f32], grads: &[f32], scale: f32) {
    for (p, g) in params.iter_mut().zip(grads) {
        *p -= scale * g;
    }
}
