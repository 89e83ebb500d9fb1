//! Randomized finite-difference checks of every layer's backward pass.
//!
//! Each case draws a small random configuration, forms the scalar
//! `L = sum(g * layer(x))` for a random upstream gradient `g`, and compares
//! the library's backward pass against central differences of the f64
//! oracle forward pass.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cent_core::net::{Layer, LayerSpec, Network};
use cent_core::tensor::{
    conv_backward, conv_forward, dense_backward, dense_forward, maxpool_backward, maxpool_forward,
    relu, relu_backward, softmax_cross_entropy, ConvSpec, Padding, PoolSpec,
};
use cent_core::Tensor;

use super::*;

pub const STEP: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerKind {
    Conv,
    Relu,
    MaxPool,
    Dense,
    SoftmaxCrossEntropy,
    Network,
}

pub const ALL_KINDS: [LayerKind; 6] = [
    LayerKind::Conv,
    LayerKind::Relu,
    LayerKind::MaxPool,
    LayerKind::Dense,
    LayerKind::SoftmaxCrossEntropy,
    LayerKind::Network,
];

fn uniform_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    Tensor::from_fn(shape, |_| rng.random_range(-1.0f32..1.0))
}

fn padding(rng: &mut ChaCha8Rng) -> Padding {
    if rng.random_bool(0.5) {
        Padding::Valid
    } else {
        Padding::Same
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn conv_case(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rank = rng.random_range(2..=3);
    let (max_extent, max_kernel) = if rank == 2 { (7, 3) } else { (4, 2) };
    let channels = rng.random_range(1..=if rank == 2 { 3 } else { 2 });
    let filters = rng.random_range(1..=if rank == 2 { 3 } else { 2 });
    let kernel: Vec<usize> = (0..rank)
        .map(|_| rng.random_range(1..=max_kernel))
        .collect();
    let stride: Vec<usize> = (0..rank).map(|_| rng.random_range(1..=2)).collect();
    let spatial: Vec<usize> = kernel
        .iter()
        .map(|&k| rng.random_range(k.max(2)..=max_extent))
        .collect();
    let spec = ConvSpec {
        kernel: kernel.clone(),
        stride: stride.clone(),
        padding: padding(&mut rng),
        filters,
    };
    let mut x_shape = vec![channels];
    x_shape.extend(&spatial);
    let mut w_shape = vec![filters, channels];
    w_shape.extend(&kernel);
    let x = uniform_tensor(&mut rng, &x_shape);
    let w = uniform_tensor(&mut rng, &w_shape);
    let b = uniform_tensor(&mut rng, &[filters]);
    let y = conv_forward(&x, &w, &b, &spec).unwrap();
    let g = uniform_tensor(&mut rng, y.shape());
    let grads = conv_backward(&g, &x, &w, &spec).unwrap();

    let (xs, ws, bs, gs) = (f64s(&x), f64s(&w), f64s(&b), f64s(&g));
    let pad = spec.padding;
    let loss_x = |v: &[f64]| dot(&conv(v, &x_shape, &ws, &w_shape, &bs, &stride, pad).0, &gs);
    let loss_w = |v: &[f64]| dot(&conv(&xs, &x_shape, v, &w_shape, &bs, &stride, pad).0, &gs);
    let loss_b = |v: &[f64]| dot(&conv(&xs, &x_shape, &ws, &w_shape, v, &stride, pad).0, &gs);
    max_gradient_error(&loss_x, &xs, &f64s(&grads.input), STEP)
        .max(max_gradient_error(
            &loss_w,
            &ws,
            &f64s(&grads.filters),
            STEP,
        ))
        .max(max_gradient_error(&loss_b, &bs, &f64s(&grads.bias), STEP))
}

pub fn relu_case(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..=40);
    // magnitudes stay well clear of the kink at 0
    let x = Tensor::from_fn(&[n], |_| {
        let m = rng.random_range(0.01f32..1.0);
        if rng.random_bool(0.5) {
            m
        } else {
            -m
        }
    });
    let g = uniform_tensor(&mut rng, &[n]);
    let analytic = relu_backward(&g, &x).unwrap();
    assert_eq!(f64s(&relu(&x)), super::relu(&f64s(&x)));
    let gs = f64s(&g);
    let loss = |v: &[f64]| dot(&super::relu(v), &gs);
    max_gradient_error(&loss, &f64s(&x), &f64s(&analytic), STEP)
}

pub fn maxpool_case(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rank = rng.random_range(2..=3);
    let channels = rng.random_range(1..=2);
    let window: Vec<usize> = (0..rank).map(|_| rng.random_range(1..=3)).collect();
    let stride: Vec<usize> = (0..rank).map(|_| rng.random_range(1..=3)).collect();
    let max_extent = if rank == 2 { 7 } else { 5 };
    let spatial: Vec<usize> = window
        .iter()
        .map(|&k| rng.random_range(k..=max_extent))
        .collect();
    let spec = PoolSpec {
        window: window.clone(),
        stride: stride.clone(),
        padding: padding(&mut rng),
    };
    let mut shape = vec![channels];
    shape.extend(&spatial);
    // distinct values 0.01 apart, so no window has a tie within the stencil
    let n: usize = shape.iter().product();
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        order.swap(i, rng.random_range(0..=i));
    }
    let x = Tensor::new(
        shape.clone(),
        order.iter().map(|&v| v as f32 * 0.01).collect(),
    )
    .unwrap();
    let (y, cache) = maxpool_forward(&x, &spec).unwrap();
    let xs = f64s(&x);
    assert_eq!(
        f64s(&y),
        maxpool(&xs, &shape, &window, &stride, spec.padding).0
    );
    let g = uniform_tensor(&mut rng, y.shape());
    let analytic = maxpool_backward(&g, &cache).unwrap();
    let gs = f64s(&g);
    let loss = |v: &[f64]| dot(&maxpool(v, &shape, &window, &stride, spec.padding).0, &gs);
    max_gradient_error(&loss, &xs, &f64s(&analytic), STEP)
}

pub fn dense_case(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..=8);
    let m = rng.random_range(1..=6);
    let x = uniform_tensor(&mut rng, &[n]);
    let w = uniform_tensor(&mut rng, &[m, n]);
    let b = uniform_tensor(&mut rng, &[m]);
    let y = dense_forward(&x, &w, &b).unwrap();
    let g = uniform_tensor(&mut rng, y.shape());
    let grads = dense_backward(&g, &x, &w).unwrap();
    let (xs, ws, bs, gs) = (f64s(&x), f64s(&w), f64s(&b), f64s(&g));
    let loss_x = |v: &[f64]| dot(&dense(v, &ws, &bs), &gs);
    let loss_w = |v: &[f64]| dot(&dense(&xs, v, &bs), &gs);
    let loss_b = |v: &[f64]| dot(&dense(&xs, &ws, v), &gs);
    max_gradient_error(&loss_x, &xs, &f64s(&grads.input), STEP)
        .max(max_gradient_error(
            &loss_w,
            &ws,
            &f64s(&grads.weights),
            STEP,
        ))
        .max(max_gradient_error(&loss_b, &bs, &f64s(&grads.bias), STEP))
}

pub fn softmax_case(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = rng.random_range(2..=8);
    let z = Tensor::from_fn(&[k], |_| rng.random_range(-4.0f32..4.0));
    let class = rng.random_range(0..k);
    let out = softmax_cross_entropy(&z, class).unwrap();
    let loss = |v: &[f64]| cross_entropy(v, class);
    max_gradient_error(&loss, &f64s(&z), &f64s(&out.grad_logits), STEP)
}

/// f64 forward pass of a network from its layers, returning the loss.
fn network_loss(
    input_shape: &[usize],
    layers: &[Layer],
    params: &[Vec<f64>],
    x: &[f64],
    class: usize,
) -> f64 {
    let mut v = x.to_vec();
    let mut shape = input_shape.to_vec();
    let mut p = 0;
    for layer in layers {
        match layer {
            Layer::Conv { spec, filters, .. } => {
                let (y, s) = conv(
                    &v,
                    &shape,
                    &params[p],
                    filters.shape(),
                    &params[p + 1],
                    &spec.stride,
                    spec.padding,
                );
                p += 2;
                v = y;
                shape = s;
            }
            Layer::FullyConnected { .. } => {
                v = dense(&v, &params[p], &params[p + 1]);
                p += 2;
                shape = vec![v.len()];
            }
            Layer::Relu => v = super::relu(&v),
            Layer::MaxPool(spec) => {
                let (y, s) = maxpool(&v, &shape, &spec.window, &spec.stride, spec.padding);
                v = y;
                shape = s;
            }
            Layer::Softmax => return cross_entropy(&v, class),
        }
    }
    unreachable!("network ends in softmax")
}

/// Whole-network parameter gradients on a small conv/pool/relu/fc stack.
/// Coordinates whose stencil straddles a ReLU or max kink are detected by
/// disagreement between steps `h` and `h / 2` and skipped; the returned
/// pair is `(max error, checked coordinates)`.
pub fn network_case(seed: u64) -> (f64, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let extent = rng.random_range(4..=6);
    let specs = [
        LayerSpec::Conv(ConvSpec::cubic(
            2,
            rng.random_range(2..=3),
            1,
            Padding::Same,
            2,
        )),
        LayerSpec::MaxPool(PoolSpec::cubic(2, 2, 2, Padding::Same)),
        LayerSpec::Relu,
        LayerSpec::FullyConnected { outputs: 4 },
        LayerSpec::Relu,
        LayerSpec::FullyConnected { outputs: 3 },
        LayerSpec::Softmax,
    ];
    let mut net = Network::build(&[1, extent, extent], &specs, seed).unwrap();
    for layer in net.layers_mut() {
        if let Some((_, b)) = layer.params_mut() {
            b.data_mut()
                .iter_mut()
                .for_each(|v| *v = rng.random_range(-0.2f32..0.2));
        }
    }
    let x = uniform_tensor(&mut rng, &[1, extent, extent]);
    let class = rng.random_range(0..3);
    let (_, grads) = net.loss_and_grads(&x, class).unwrap();

    let params: Vec<Vec<f64>> = net
        .layers()
        .iter()
        .filter_map(|l| l.params())
        .flat_map(|(w, b)| [f64s(w), f64s(b)])
        .collect();
    let analytic: Vec<Vec<f64>> = grads
        .into_iter()
        .flatten()
        .flat_map(|(w, b)| [f64s(&w), f64s(&b)])
        .collect();
    let xs = f64s(&x);
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for (t, values) in params.iter().enumerate() {
        let f = |v: &[f64]| {
            let mut p = params.clone();
            p[t] = v.to_vec();
            network_loss(net.input_shape(), net.layers(), &p, &xs, class)
        };
        for i in 0..values.len() {
            let d1 = central_difference(&f, values, i, STEP);
            let d2 = central_difference(&f, values, i, STEP / 2.0);
            if relative_error(d1, d2, GRAD_FLOOR) > 1e-6 {
                continue;
            }
            checked += 1;
            worst = worst.max(relative_error(analytic[t][i], d1, GRAD_FLOOR));
        }
    }
    (worst, checked)
}

/// Runs `cases` seeded configurations of `kind`; returns the worst error.
pub fn run(kind: LayerKind, cases: u64, base_seed: u64) -> f64 {
    (0..cases)
        .map(|c| {
            let seed = base_seed.wrapping_add(c);
            match kind {
                LayerKind::Conv => conv_case(seed),
                LayerKind::Relu => relu_case(seed),
                LayerKind::MaxPool => maxpool_case(seed),
                LayerKind::Dense => dense_case(seed),
                LayerKind::SoftmaxCrossEntropy => softmax_case(seed),
                LayerKind::Network => network_case(seed).0,
            }
        })
        .fold(0.0, f64::max)
}
