//! Samples from a discrete Markov chain `C -> X -> Y`, used to exercise the
//! data-processing inequality. `Y` is produced by [`Channel::apply`], which
//! only ever sees `X` and its own random stream.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainSample {
    pub x: usize,
    pub y: usize,
    pub c: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MarkovSpec {
    pub samples: usize,
    pub classes: usize,
    /// Distance between class centers on the X axis.
    pub spacing: usize,
    /// X = center + offset, offset uniform in `-noise..=noise`.
    pub noise: usize,
    /// Number of equal-width Y levels over the X range; `None` keeps Y = X.
    pub quantizer_levels: Option<usize>,
    /// Probability that Y is replaced by a uniformly random level.
    pub corruption: f64,
    pub seed: u64,
}

impl Default for MarkovSpec {
    fn default() -> Self {
        MarkovSpec {
            samples: 100_000,
            classes: 4,
            spacing: 4,
            noise: 3,
            quantizer_levels: Some(4),
            corruption: 0.05,
            seed: 0,
        }
    }
}

impl MarkovSpec {
    pub fn x_cardinality(&self) -> usize {
        (self.classes - 1) * self.spacing + 2 * self.noise + 1
    }

    pub fn y_cardinality(&self) -> usize {
        self.quantizer_levels
            .unwrap_or_else(|| self.x_cardinality())
    }

    fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(Error::contract("chain needs at least one sample"));
        }
        if self.classes == 0 {
            return Err(Error::contract("chain needs at least one class"));
        }
        if self.quantizer_levels == Some(0) {
            return Err(Error::contract("quantizer needs at least one level"));
        }
        if !(0.0..=1.0).contains(&self.corruption) {
            return Err(Error::contract(format!(
                "corruption probability {} outside [0, 1]",
                self.corruption
            )));
        }
        Ok(())
    }
}

/// The X -> Y processing step.
struct Channel {
    x_card: usize,
    levels: Option<usize>,
    corruption: f64,
    rng: ChaCha8Rng,
}

impl Channel {
    fn apply(&mut self, x: usize) -> usize {
        let y = match self.levels {
            None => x,
            Some(l) => x * l / self.x_card,
        };
        if self.corruption > 0.0 && self.rng.random::<f64>() < self.corruption {
            let card = self.levels.unwrap_or(self.x_card);
            self.rng.random_range(0..card)
        } else {
            y
        }
    }
}

pub fn generate_markov_chain(spec: &MarkovSpec) -> Result<Vec<ChainSample>> {
    spec.validate()?;
    let mut source = ChaCha8Rng::seed_from_u64(spec.seed);
    source.set_stream(0);
    let mut channel_rng = ChaCha8Rng::seed_from_u64(spec.seed);
    channel_rng.set_stream(1);
    let mut channel = Channel {
        x_card: spec.x_cardinality(),
        levels: spec.quantizer_levels,
        corruption: spec.corruption,
        rng: channel_rng,
    };
    Ok((0..spec.samples)
        .map(|_| {
            let c = source.random_range(0..spec.classes);
            let offset = source.random_range(0..=2 * spec.noise);
            let x = c * spec.spacing + offset;
            let y = channel.apply(x);
            ChainSample { x, y, c }
        })
        .collect())
}
