//! Layer stacks: construction with shape checking, forward passes with
//! activation snapshots, backpropagation and SGD training.

mod checkpoint;
mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use train::{train, TrainConfig, TrainOutcome};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{
    conv_backward, conv_forward, dense_backward, dense_forward, maxpool_backward, maxpool_forward,
    relu, relu_backward, softmax, ConvSpec, Padding, PoolCache, PoolSpec, Tensor,
};

/// Declarative description of one layer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerSpec {
    Conv(ConvSpec),
    Relu,
    MaxPool(PoolSpec),
    FullyConnected { outputs: usize },
    Softmax,
}

/// A layer together with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Conv {
        spec: ConvSpec,
        filters: Tensor,
        bias: Tensor,
    },
    Relu,
    MaxPool(PoolSpec),
    FullyConnected {
        weights: Tensor,
        bias: Tensor,
    },
    Softmax,
}

impl Layer {
    pub fn spec(&self) -> LayerSpec {
        match self {
            Layer::Conv { spec, .. } => LayerSpec::Conv(spec.clone()),
            Layer::Relu => LayerSpec::Relu,
            Layer::MaxPool(p) => LayerSpec::MaxPool(p.clone()),
            Layer::FullyConnected { weights, .. } => LayerSpec::FullyConnected {
                outputs: weights.shape()[0],
            },
            Layer::Softmax => LayerSpec::Softmax,
        }
    }

    /// (weights, bias) of parametric layers.
    pub fn params(&self) -> Option<(&Tensor, &Tensor)> {
        match self {
            Layer::Conv { filters, bias, .. } => Some((filters, bias)),
            Layer::FullyConnected { weights, bias } => Some((weights, bias)),
            _ => None,
        }
    }

    pub fn params_mut(&mut self) -> Option<(&mut Tensor, &mut Tensor)> {
        match self {
            Layer::Conv { filters, bias, .. } => Some((filters, bias)),
            Layer::FullyConnected { weights, bias } => Some((weights, bias)),
            _ => None,
        }
    }
}

/// How a `[1, 64, 64, 64]` volume is reduced to `32³` in each block of the
/// reference network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReferenceVariant {
    /// Stride-1 zero-padded convolution, then 2³ max pooling with stride 2.
    PoolReduces,
    /// Stride-2 convolution, then 2³ max pooling with stride 1 (same extent).
    ConvStrideReduces,
}

/// Which side of each ReLU an activation snapshot reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SnapshotPoint {
    #[default]
    PostRelu,
    PreRelu,
}

/// Output of [`Network::forward_collect`].
#[derive(Debug, Clone, PartialEq)]
pub struct Collected {
    /// One tensor per ReLU layer, in network order.
    pub activations: Vec<Tensor>,
    pub probs: Tensor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    input_shape: Vec<usize>,
    layers: Vec<Layer>,
    /// Output shape of each layer.
    shapes: Vec<Vec<usize>>,
    seed: u64,
}

/// Per-layer values kept from the forward pass for backpropagation.
enum Cache {
    Input(Tensor),
    Pool(PoolCache),
    None,
}

/// Gradients for each layer's (weights, bias); `None` for parameterless layers.
pub type ParamGrads = Vec<Option<(Tensor, Tensor)>>;

fn infer_shape(spec: &LayerSpec, input: &[usize]) -> Result<Vec<usize>> {
    match spec {
        LayerSpec::Conv(c) => {
            if input.len() != c.spatial_rank() + 1 {
                return Err(Error::contract(format!(
                    "conv with {}-d kernel cannot follow shape {input:?}",
                    c.spatial_rank()
                )));
            }
            let mut out = vec![c.filters];
            out.extend(c.output_extent(&input[1..])?);
            Ok(out)
        }
        LayerSpec::MaxPool(p) => {
            if input.len() != p.window.len() + 1 {
                return Err(Error::contract(format!(
                    "maxpool with {}-d window cannot follow shape {input:?}",
                    p.window.len()
                )));
            }
            let mut out = vec![input[0]];
            out.extend(p.output_extent(&input[1..])?);
            Ok(out)
        }
        LayerSpec::Relu => Ok(input.to_vec()),
        LayerSpec::FullyConnected { outputs } => {
            if *outputs == 0 {
                return Err(Error::contract("fully connected layer needs outputs > 0"));
            }
            Ok(vec![*outputs])
        }
        LayerSpec::Softmax => {
            if input.len() != 1 || input[0] < 2 {
                return Err(Error::contract(format!(
                    "softmax needs a vector of at least 2 logits, got {input:?}"
                )));
            }
            Ok(input.to_vec())
        }
    }
}

fn uniform(rng: &mut ChaCha8Rng, shape: &[usize], limit: f64) -> Tensor {
    Tensor::from_fn(shape, |_| {
        ((rng.random::<f64>() * 2.0 - 1.0) * limit) as f32
    })
}

impl Network {
    /// Builds and initializes a network; parameters are uniform in
    /// `[-s, s]` with `s = sqrt(6 / (fan_in + fan_out))`, biases zero.
    pub fn build(input_shape: &[usize], specs: &[LayerSpec], seed: u64) -> Result<Self> {
        if input_shape.is_empty() || input_shape.contains(&0) {
            return Err(Error::contract(format!(
                "invalid input shape {input_shape:?}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut shape = input_shape.to_vec();
        let mut layers = Vec::with_capacity(specs.len());
        let mut shapes = Vec::with_capacity(specs.len());
        for (i, spec) in specs.iter().enumerate() {
            if matches!(spec, LayerSpec::Softmax) && i + 1 != specs.len() {
                return Err(Error::contract("softmax must be the last layer"));
            }
            let out = infer_shape(spec, &shape)?;
            let layer = match spec {
                LayerSpec::Conv(c) => {
                    let k: usize = c.kernel.iter().product();
                    let channels = shape[0];
                    let mut fshape = vec![c.filters, channels];
                    fshape.extend(&c.kernel);
                    let limit = (6.0 / ((channels * k + c.filters * k) as f64)).sqrt();
                    Layer::Conv {
                        spec: c.clone(),
                        filters: uniform(&mut rng, &fshape, limit),
                        bias: Tensor::zeros(&[c.filters]),
                    }
                }
                LayerSpec::FullyConnected { outputs } => {
                    let n: usize = shape.iter().product();
                    let limit = (6.0 / ((n + outputs) as f64)).sqrt();
                    Layer::FullyConnected {
                        weights: uniform(&mut rng, &[*outputs, n], limit),
                        bias: Tensor::zeros(&[*outputs]),
                    }
                }
                LayerSpec::Relu => Layer::Relu,
                LayerSpec::MaxPool(p) => Layer::MaxPool(p.clone()),
                LayerSpec::Softmax => Layer::Softmax,
            };
            layers.push(layer);
            shapes.push(out.clone());
            shape = out;
        }
        Ok(Network {
            input_shape: input_shape.to_vec(),
            layers,
            shapes,
            seed,
        })
    }

    /// Reassembles a network from already-initialized layers, validating the
    /// shape chain and parameter shapes.
    pub fn from_layers(input_shape: &[usize], layers: Vec<Layer>, seed: u64) -> Result<Self> {
        let specs: Vec<LayerSpec> = layers.iter().map(Layer::spec).collect();
        let mut net = Network::build(input_shape, &specs, seed)?;
        for (slot, layer) in net.layers.iter_mut().zip(layers) {
            if let (Some((w0, b0)), Some((w1, b1))) = (slot.params(), layer.params()) {
                if w0.shape() != w1.shape() || b0.shape() != b1.shape() {
                    return Err(Error::ShapeMismatch {
                        context: "layer parameters vs layer spec",
                        left: w1.shape().to_vec(),
                        right: w0.shape().to_vec(),
                    });
                }
            }
            *slot = layer;
        }
        Ok(net)
    }

    /// The 4-layer volumetric architecture: two 10-filter 2³ convolution
    /// blocks (conv, max pool, ReLU), a 128-unit fully connected layer and a
    /// 2-way softmax, on `64³` single-channel input.
    pub fn reference_3d(variant: ReferenceVariant, seed: u64) -> Result<Self> {
        let block = |specs: &mut Vec<LayerSpec>| {
            let (conv, pool) = match variant {
                ReferenceVariant::PoolReduces => (
                    ConvSpec::cubic(3, 2, 1, Padding::Same, 10),
                    PoolSpec::cubic(3, 2, 2, Padding::Valid),
                ),
                ReferenceVariant::ConvStrideReduces => (
                    ConvSpec::cubic(3, 2, 2, Padding::Valid, 10),
                    PoolSpec::cubic(3, 2, 1, Padding::Same),
                ),
            };
            specs.extend([
                LayerSpec::Conv(conv),
                LayerSpec::MaxPool(pool),
                LayerSpec::Relu,
            ]);
        };
        let mut specs = Vec::new();
        block(&mut specs);
        block(&mut specs);
        specs.extend([
            LayerSpec::FullyConnected { outputs: 128 },
            LayerSpec::Relu,
            LayerSpec::FullyConnected { outputs: 2 },
            LayerSpec::Softmax,
        ]);
        Network::build(&[1, 64, 64, 64], &specs, seed)
    }

    /// 2D analog of the reference network for `extent²` single-channel
    /// images: two 10-filter 3×3 convolution blocks, FC-128, softmax.
    pub fn desk_2d(extent: usize, classes: usize, seed: u64) -> Result<Self> {
        if extent != 32 && extent != 64 {
            return Err(Error::contract(format!(
                "desk network extent must be 32 or 64, got {extent}"
            )));
        }
        if classes < 2 {
            return Err(Error::contract(format!(
                "need at least 2 classes, got {classes}"
            )));
        }
        let block = [
            LayerSpec::Conv(ConvSpec::cubic(2, 3, 1, Padding::Same, 10)),
            LayerSpec::MaxPool(PoolSpec::cubic(2, 2, 2, Padding::Valid)),
            LayerSpec::Relu,
        ];
        let mut specs = Vec::new();
        specs.extend(block.iter().cloned());
        specs.extend(block.iter().cloned());
        specs.extend([
            LayerSpec::FullyConnected { outputs: 128 },
            LayerSpec::Relu,
            LayerSpec::FullyConnected { outputs: classes },
            LayerSpec::Softmax,
        ]);
        Network::build(&[1, extent, extent], &specs, seed)
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn layer_shapes(&self) -> &[Vec<usize>] {
        &self.shapes
    }

    pub fn output_shape(&self) -> &[usize] {
        self.shapes
            .last()
            .map(Vec::as_slice)
            .unwrap_or(&self.input_shape)
    }

    pub fn class_count(&self) -> usize {
        self.output_shape().iter().product()
    }

    /// Input shape, each snapshot (ReLU) shape, then the output shape.
    pub fn block_shapes(&self) -> Vec<Vec<usize>> {
        let mut out = vec![self.input_shape.clone()];
        for (layer, shape) in self.layers.iter().zip(&self.shapes) {
            if matches!(layer, Layer::Relu) {
                out.push(shape.clone());
            }
        }
        out.push(self.output_shape().to_vec());
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .filter_map(Layer::params)
            .map(|(w, b)| w.len() + b.len())
            .sum()
    }

    pub fn parameters_finite(&self) -> bool {
        self.layers
            .iter()
            .filter_map(Layer::params)
            .all(|(w, b)| w.all_finite() && b.all_finite())
    }

    /// Sets every bias to zero (used for scale-invariance checks).
    pub fn zero_biases(&mut self) {
        for layer in &mut self.layers {
            if let Some((_, b)) = layer.params_mut() {
                b.data_mut().fill(0.0);
            }
        }
    }

    fn check_input(&self, input: &Tensor) -> Result<()> {
        if input.shape() != self.input_shape.as_slice() {
            return Err(Error::ShapeMismatch {
                context: "network input",
                left: input.shape().to_vec(),
                right: self.input_shape.clone(),
            });
        }
        Ok(())
    }

    fn apply(layer: &Layer, x: &Tensor) -> Result<(Tensor, Cache)> {
        Ok(match layer {
            Layer::Conv {
                spec,
                filters,
                bias,
            } => (
                conv_forward(x, filters, bias, spec)?,
                Cache::Input(x.clone()),
            ),
            Layer::Relu => (relu(x), Cache::Input(x.clone())),
            Layer::MaxPool(p) => {
                let (y, c) = maxpool_forward(x, p)?;
                (y, Cache::Pool(c))
            }
            Layer::FullyConnected { weights, bias } => {
                (dense_forward(x, weights, bias)?, Cache::Input(x.clone()))
            }
            Layer::Softmax => (softmax(x), Cache::None),
        })
    }

    /// Class probabilities (or the last layer's output if there is no softmax).
    pub fn forward(&self, input: &Tensor) -> Result<Tensor> {
        self.check_input(input)?;
        let mut x = input.clone();
        for layer in &self.layers {
            x = Self::apply(layer, &x)?.0;
        }
        Ok(x)
    }

    /// Forward pass that also snapshots the activation at every ReLU layer:
    /// its output for [`SnapshotPoint::PostRelu`], its input otherwise.
    pub fn forward_collect(&self, input: &Tensor, point: SnapshotPoint) -> Result<Collected> {
        self.check_input(input)?;
        let mut x = input.clone();
        let mut activations = Vec::new();
        for layer in &self.layers {
            let y = Self::apply(layer, &x)?.0;
            if matches!(layer, Layer::Relu) {
                activations.push(match point {
                    SnapshotPoint::PostRelu => y.clone(),
                    SnapshotPoint::PreRelu => x.clone(),
                });
            }
            x = y;
        }
        Ok(Collected {
            activations,
            probs: x,
        })
    }

    /// Runs every layer before the terminal softmax, keeping caches.
    fn forward_logits(&self, input: &Tensor) -> Result<(Tensor, Vec<Cache>)> {
        self.check_input(input)?;
        let mut x = input.clone();
        let mut caches = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            if matches!(layer, Layer::Softmax) {
                break;
            }
            let (y, c) = Self::apply(layer, &x)?;
            caches.push(c);
            x = y;
        }
        Ok((x, caches))
    }

    /// Softmax cross-entropy loss and parameter gradients for one sample.
    pub fn loss_and_grads(&self, input: &Tensor, class: usize) -> Result<(f64, ParamGrads)> {
        if !matches!(self.layers.last(), Some(Layer::Softmax)) {
            return Err(Error::contract("training needs a terminal softmax layer"));
        }
        let (logits, caches) = self.forward_logits(input)?;
        let out = crate::tensor::softmax_cross_entropy(&logits, class)?;
        let mut grads: ParamGrads = vec![None; self.layers.len()];
        let mut g = out.grad_logits;
        for (i, cache) in caches.iter().enumerate().rev() {
            g = match (&self.layers[i], cache) {
                (Layer::Conv { spec, filters, .. }, Cache::Input(x)) => {
                    let cg = conv_backward(&g, x, filters, spec)?;
                    grads[i] = Some((cg.filters, cg.bias));
                    cg.input
                }
                (Layer::FullyConnected { weights, .. }, Cache::Input(x)) => {
                    let dg = dense_backward(&g, x, weights)?;
                    grads[i] = Some((dg.weights, dg.bias));
                    dg.input
                }
                (Layer::Relu, Cache::Input(x)) => relu_backward(&g, x)?,
                (Layer::MaxPool(_), Cache::Pool(c)) => maxpool_backward(&g, c)?,
                _ => unreachable!("cache kind always matches its layer"),
            };
        }
        Ok((out.loss, grads))
    }
}
