//! Synthetic texture images whose classes differ in texture statistics.
//!
//! Each image is a sum of three components: Gaussian blobs, a randomly
//! oriented sinusoidal grating and pixel noise. Blob size is tied to the
//! class frequency, so low-frequency classes look smooth and high-frequency
//! classes look textured.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassParams {
    pub name: String,
    /// Standard deviation of the pixel noise.
    pub noise_scale: f64,
    /// Grating frequency in cycles per pixel.
    pub frequency: f64,
    /// Expected blobs per 8-pixel cell.
    pub blob_density: f64,
    /// Laplace instead of Gaussian noise.
    pub heavy_tailed_noise: bool,
}

impl ClassParams {
    pub fn smooth() -> Self {
        ClassParams {
            name: "smooth".into(),
            noise_scale: 0.05,
            frequency: 0.04,
            blob_density: 1.0,
            heavy_tailed_noise: false,
        }
    }

    pub fn textured() -> Self {
        ClassParams {
            name: "textured".into(),
            noise_scale: 0.3,
            frequency: 0.3,
            blob_density: 0.5,
            heavy_tailed_noise: true,
        }
    }

    fn same_generator(&self, other: &ClassParams) -> bool {
        self.noise_scale == other.noise_scale
            && self.frequency == other.frequency
            && self.blob_density == other.blob_density
            && self.heavy_tailed_noise == other.heavy_tailed_noise
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub classes: Vec<ClassParams>,
    /// Edge length in pixels (or voxels).
    pub extent: usize,
    /// 2 for images, 3 for volumes.
    pub dims: usize,
    pub samples_per_class: usize,
    pub seed: u64,
    /// Marks a deliberately uninformative spec whose classes share one
    /// generator.
    pub null_generator: bool,
}

impl SyntheticSpec {
    /// Smooth vs textured 2D images.
    pub fn two_class(extent: usize, samples_per_class: usize, seed: u64) -> Self {
        SyntheticSpec {
            classes: vec![ClassParams::smooth(), ClassParams::textured()],
            extent,
            dims: 2,
            samples_per_class,
            seed,
            null_generator: false,
        }
    }

    /// Two classes drawn from the same (textured) generator.
    pub fn null(extent: usize, samples_per_class: usize, seed: u64) -> Self {
        let mut a = ClassParams::textured();
        a.name = "null_a".into();
        let mut b = ClassParams::textured();
        b.name = "null_b".into();
        SyntheticSpec {
            classes: vec![a, b],
            extent,
            dims: 2,
            samples_per_class,
            seed,
            null_generator: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.classes.len() < 2 {
            return Err(Error::contract("synthetic spec needs at least 2 classes"));
        }
        if self.extent < 4 {
            return Err(Error::contract(format!(
                "extent must be at least 4, got {}",
                self.extent
            )));
        }
        if !(self.dims == 2 || self.dims == 3) {
            return Err(Error::contract(format!(
                "dims must be 2 or 3, got {}",
                self.dims
            )));
        }
        if self.samples_per_class == 0 {
            return Err(Error::contract("samples_per_class must be positive"));
        }
        for c in &self.classes {
            if !(c.noise_scale >= 0.0 && c.frequency > 0.0 && c.blob_density >= 0.0)
                || !(c.noise_scale.is_finite()
                    && c.frequency.is_finite()
                    && c.blob_density.is_finite())
            {
                return Err(Error::contract(format!(
                    "invalid parameters for class `{}`",
                    c.name
                )));
            }
        }
        if !self.null_generator {
            for (i, a) in self.classes.iter().enumerate() {
                for b in &self.classes[i + 1..] {
                    if a.same_generator(b) {
                        return Err(Error::contract(format!(
                            "classes `{}` and `{}` share a generator; set null_generator to allow this",
                            a.name, b.name
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

fn laplace(rng: &mut ChaCha8Rng, scale: f64) -> f64 {
    // Scale b = sigma / sqrt(2) gives standard deviation sigma.
    let b = scale / std::f64::consts::SQRT_2;
    let u: f64 = rng.random::<f64>() - 0.5;
    -b * u.signum() * (1.0 - 2.0 * u.abs()).max(f64::MIN_POSITIVE).ln()
}

fn render(params: &ClassParams, extent: usize, dims: usize, rng: &mut ChaCha8Rng) -> Tensor {
    let e = extent as f64;
    let n = extent.pow(dims as u32);
    let mut img = vec![0f64; n];

    // Coordinates of a flat index, padded to 3 axes (z, y, x).
    let coords = |i: usize| -> [f64; 3] {
        let x = i % extent;
        let y = (i / extent) % extent;
        let z = if dims == 3 { i / (extent * extent) } else { 0 };
        [z as f64, y as f64, x as f64]
    };

    // Grating.
    let freq = params.frequency * rng.random_range(0.85..1.15);
    let mut dir = [0f64; 3];
    for d in dir.iter_mut().skip(3 - dims) {
        *d = rng.sample::<f64, _>(StandardNormal);
    }
    let norm = dir.iter().map(|d| d * d).sum::<f64>().sqrt().max(1e-12);
    let phase = rng.random_range(0.0..std::f64::consts::TAU);
    for (i, v) in img.iter_mut().enumerate() {
        let p = coords(i);
        let proj = (p[0] * dir[0] + p[1] * dir[1] + p[2] * dir[2]) / norm;
        *v += 0.5 * (std::f64::consts::TAU * freq * proj + phase).sin();
    }

    // Blobs, evaluated inside a 3-sigma box.
    let radius = (0.25 / params.frequency).max(1.0);
    let cells = (e / 8.0).powi(dims as i32);
    let blobs = (params.blob_density * cells * rng.random_range(0.75..1.25)).round() as usize;
    let reach = (3.0 * radius).ceil() as isize;
    for _ in 0..blobs {
        let mut c = [0f64; 3];
        for cc in c.iter_mut().skip(3 - dims) {
            *cc = rng.random_range(0.0..e);
        }
        let amp = rng.random_range(0.5..1.5) * if rng.random::<bool>() { 1.0 } else { -1.0 };
        let lo = |a: usize| {
            if a < 3 - dims {
                0
            } else {
                (c[a] as isize - reach).max(0) as usize
            }
        };
        let hi = |a: usize| {
            if a < 3 - dims {
                0
            } else {
                ((c[a] as isize + reach) as usize).min(extent - 1)
            }
        };
        for z in lo(0)..=hi(0) {
            for y in lo(1)..=hi(1) {
                for x in lo(2)..=hi(2) {
                    let d2 = (z as f64 - c[0]).powi(2)
                        + (y as f64 - c[1]).powi(2)
                        + (x as f64 - c[2]).powi(2);
                    let idx = (z * extent + y) * extent + x;
                    img[idx] += amp * (-d2 / (2.0 * radius * radius)).exp();
                }
            }
        }
    }

    // Noise.
    for v in img.iter_mut() {
        *v += if params.heavy_tailed_noise {
            laplace(rng, params.noise_scale)
        } else {
            params.noise_scale * rng.sample::<f64, _>(StandardNormal)
        };
    }

    let mut shape = vec![1];
    shape.extend(std::iter::repeat_n(extent, dims));
    Tensor::new(shape, img.into_iter().map(|v| v as f32).collect()).expect("shape matches")
}

/// Generates `samples_per_class` images per class, interleaved by class
/// (`s00000` is class 0, `s00001` class 1, ...). Each image draws from its
/// own ChaCha stream, so the output is a pure function of the spec.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Dataset> {
    spec.validate()?;
    let k = spec.classes.len();
    let total = k * spec.samples_per_class;
    let mut ids = Vec::with_capacity(total);
    let mut images = Vec::with_capacity(total);
    let mut labels = Vec::with_capacity(total);
    for idx in 0..total {
        let label = idx % k;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(idx as u64);
        images.push(render(
            &spec.classes[label],
            spec.extent,
            spec.dims,
            &mut rng,
        ));
        ids.push(format!("s{idx:05}"));
        labels.push(label);
    }
    Dataset::new(
        ids,
        images,
        labels,
        spec.classes.iter().map(|c| c.name.clone()).collect(),
    )
}
