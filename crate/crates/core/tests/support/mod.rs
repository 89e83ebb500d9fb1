//! Independent f64 reference implementations used as test oracles. They
//! follow the textbook definitions directly and share no code with the
//! library.

// Index loops mirror the summation formulas they implement.
#![allow(dead_code, clippy::needless_range_loop)]

pub mod gradcheck;

use cent_core::tensor::Padding;
use cent_core::Tensor;

pub fn f64s(t: &Tensor) -> Vec<f64> {
    t.data().iter().map(|&v| v as f64).collect()
}

/// Every multi-index of `shape`, in row-major order.
pub fn indices(shape: &[usize]) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for &n in shape {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (0..n).map(move |i| {
                    let mut p = prefix.clone();
                    p.push(i);
                    p
                })
            })
            .collect();
    }
    out
}

pub fn flat(shape: &[usize], idx: &[usize]) -> usize {
    idx.iter().zip(shape).fold(0, |acc, (&i, &n)| acc * n + i)
}

/// Output extent and leading padding of one axis.
pub fn axis_geometry(n: usize, k: usize, s: usize, padding: Padding) -> (usize, usize) {
    match padding {
        Padding::Valid => ((n - k) / s + 1, 0),
        Padding::Same => {
            let out = n.div_ceil(s);
            let need = ((out - 1) * s + k) as i64 - n as i64;
            (out, need.max(0) as usize / 2)
        }
    }
}

pub struct Geometry {
    pub out: Vec<usize>,
    pub pad: Vec<usize>,
}

pub fn geometry(spatial: &[usize], k: &[usize], s: &[usize], padding: Padding) -> Geometry {
    let (out, pad) = (0..spatial.len())
        .map(|a| axis_geometry(spatial[a], k[a], s[a], padding))
        .unzip();
    Geometry { out, pad }
}

/// Input position read by output `o` at kernel offset `kk`, if inside.
fn source(
    o: &[usize],
    kk: &[usize],
    s: &[usize],
    pad: &[usize],
    spatial: &[usize],
) -> Option<Vec<usize>> {
    let mut pos = Vec::with_capacity(o.len());
    for a in 0..o.len() {
        let p = (o[a] * s[a] + kk[a]) as i64 - pad[a] as i64;
        if p < 0 || p >= spatial[a] as i64 {
            return None;
        }
        pos.push(p as usize);
    }
    Some(pos)
}

/// Direct-summation convolution: `x` is `[C, spatial..]`, `w` is
/// `[F, C, kernel..]`. Returns `(data, shape)`.
#[allow(clippy::too_many_arguments)]
pub fn conv(
    x: &[f64],
    x_shape: &[usize],
    w: &[f64],
    w_shape: &[usize],
    b: &[f64],
    stride: &[usize],
    padding: Padding,
) -> (Vec<f64>, Vec<usize>) {
    let channels = x_shape[0];
    let spatial = &x_shape[1..];
    let filters = w_shape[0];
    let kernel = &w_shape[2..];
    let g = geometry(spatial, kernel, stride, padding);
    let mut shape = vec![filters];
    shape.extend(&g.out);
    let mut y = vec![0.0; shape.iter().product()];
    for f in 0..filters {
        for o in indices(&g.out) {
            let mut acc = b[f];
            for c in 0..channels {
                for kk in indices(kernel) {
                    if let Some(pos) = source(&o, &kk, stride, &g.pad, spatial) {
                        let mut xi = vec![c];
                        xi.extend(&pos);
                        let mut wi = vec![f, c];
                        wi.extend(&kk);
                        acc += x[flat(x_shape, &xi)] * w[flat(w_shape, &wi)];
                    }
                }
            }
            let mut yi = vec![f];
            yi.extend(&o);
            y[flat(&shape, &yi)] = acc;
        }
    }
    (y, shape)
}

/// Per-window maximum over positions inside the input.
pub fn maxpool(
    x: &[f64],
    x_shape: &[usize],
    window: &[usize],
    stride: &[usize],
    padding: Padding,
) -> (Vec<f64>, Vec<usize>) {
    let spatial = &x_shape[1..];
    let g = geometry(spatial, window, stride, padding);
    let mut shape = vec![x_shape[0]];
    shape.extend(&g.out);
    let mut y = vec![0.0; shape.iter().product()];
    for c in 0..x_shape[0] {
        for o in indices(&g.out) {
            let mut best = f64::NEG_INFINITY;
            for kk in indices(window) {
                if let Some(pos) = source(&o, &kk, stride, &g.pad, spatial) {
                    let mut xi = vec![c];
                    xi.extend(&pos);
                    best = best.max(x[flat(x_shape, &xi)]);
                }
            }
            let mut yi = vec![c];
            yi.extend(&o);
            y[flat(&shape, &yi)] = best;
        }
    }
    (y, shape)
}

pub fn relu(x: &[f64]) -> Vec<f64> {
    x.iter().map(|&v| v.max(0.0)).collect()
}

/// `W x + b` with `W` row-major `[m, n]`.
pub fn dense(x: &[f64], w: &[f64], b: &[f64]) -> Vec<f64> {
    let n = x.len();
    b.iter()
        .enumerate()
        .map(|(i, &bi)| bi + (0..n).map(|j| w[i * n + j] * x[j]).sum::<f64>())
        .collect()
}

/// `-ln softmax(z)[class]` via log-sum-exp.
pub fn cross_entropy(z: &[f64], class: usize) -> f64 {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
    lse - z[class]
}

pub fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|v| v / s).collect()
}

/// Central difference of `f` along coordinate `i` of `x`.
pub fn central_difference(f: &dyn Fn(&[f64]) -> f64, x: &[f64], i: usize, h: f64) -> f64 {
    let mut p = x.to_vec();
    p[i] = x[i] + h;
    let up = f(&p);
    p[i] = x[i] - h;
    let down = f(&p);
    (up - down) / (2.0 * h)
}

/// `|a - n| / max(|a|, |n|, floor)`. The floor keeps near-zero gradients
/// from turning f32 storage rounding into a large relative error.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

pub const GRAD_FLOOR: f64 = 1e-3;

/// Largest relative error between `analytic` and central differences of
/// `f` at every coordinate of `x`.
pub fn max_gradient_error(f: &dyn Fn(&[f64]) -> f64, x: &[f64], analytic: &[f64], h: f64) -> f64 {
    assert_eq!(x.len(), analytic.len());
    (0..x.len())
        .map(|i| relative_error(analytic[i], central_difference(f, x, i, h), GRAD_FLOOR))
        .fold(0.0, f64::max)
}

/// `-sum p log2 p` straight from the definition.
pub fn entropy_bits(counts: &[u64]) -> f64 {
    let n: u64 = counts.iter().sum();
    let mut h = 0.0;
    for &c in counts {
        if c > 0 {
            let p = c as f64 / n as f64;
            h -= p * p.log2();
        }
    }
    h
}

/// `sum_{r,c} p(r,c) log2(p(r,c) / (p(r) p(c)))`.
pub fn mutual_information_bits(table: &[Vec<u64>]) -> f64 {
    let n: u64 = table.iter().flatten().sum();
    let n = n as f64;
    let rows: Vec<f64> = table
        .iter()
        .map(|r| r.iter().sum::<u64>() as f64 / n)
        .collect();
    let cols: Vec<f64> = (0..table[0].len())
        .map(|c| table.iter().map(|r| r[c]).sum::<u64>() as f64 / n)
        .collect();
    let mut mi = 0.0;
    for (r, row) in table.iter().enumerate() {
        for (c, &v) in row.iter().enumerate() {
            if v > 0 {
                let p = v as f64 / n;
                mi += p * (p / (rows[r] * cols[c])).log2();
            }
        }
    }
    mi
}

/// Fraction of (positive, negative) pairs with the positive scored higher,
/// ties counting one half.
pub fn pairwise_auc(scores: &[f64], positive: &[bool]) -> f64 {
    let mut good = 0.0;
    let mut pairs = 0.0;
    for (i, &si) in scores.iter().enumerate() {
        if !positive[i] {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if positive[j] {
                continue;
            }
            pairs += 1.0;
            if si > sj {
                good += 1.0;
            } else if si == sj {
                good += 0.5;
            }
        }
    }
    good / pairs
}

/// Counts of each value of `v` in `[lo, hi]` over equal-width bins, by
/// explicit edge comparison.
pub fn bin_counts(v: &[f64], lo: f64, hi: f64, bins: usize) -> Vec<u64> {
    let mut counts = vec![0u64; bins];
    if hi == lo {
        counts[0] = v.len() as u64;
        return counts;
    }
    let w = (hi - lo) / bins as f64;
    for &x in v {
        let mut b = 0;
        while b + 1 < bins && x >= lo + w * (b + 1) as f64 {
            b += 1;
        }
        counts[b] += 1;
    }
    counts
}
