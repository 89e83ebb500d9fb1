use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_BINS: usize = 256;

/// How the histogram range is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RangeMode {
    /// `[min, max]` of the samples being binned.
    PerSampleMinMax,
    /// A caller-supplied range; out-of-range values land in the edge bins.
    Fixed { lo: f64, hi: f64 },
}

impl RangeMode {
    /// Fixed range spanning every value in `groups`.
    pub fn covering<'a, T, I>(groups: I) -> Result<Self>
    where
        T: Copy + Into<f64> + 'a,
        I: IntoIterator<Item = &'a [T]>,
    {
        let (lo, hi) = min_max(groups.into_iter().flatten().map(|&v| v.into()))?;
        Ok(RangeMode::Fixed { lo, hi })
    }
}

fn min_max(values: impl Iterator<Item = f64>) -> Result<(f64, f64)> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut any = false;
    for v in values {
        if !v.is_finite() {
            return Err(Error::contract(format!("non-finite sample {v}")));
        }
        lo = lo.min(v);
        hi = hi.max(v);
        any = true;
    }
    if !any {
        return Err(Error::contract("cannot bin an empty sample"));
    }
    Ok((lo, hi))
}

/// Equal-width bin assignment over `[lo, hi]`; the upper edge belongs to the
/// last bin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Binning {
    pub lo: f64,
    pub hi: f64,
    pub bins: usize,
}

impl Binning {
    pub fn new(lo: f64, hi: f64, bins: usize) -> Result<Self> {
        if bins < 2 {
            return Err(Error::contract(format!("need at least 2 bins, got {bins}")));
        }
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::contract(format!(
                "invalid histogram range [{lo}, {hi}]"
            )));
        }
        Ok(Binning { lo, hi, bins })
    }

    /// A zero-width range puts everything into bin 0.
    pub fn is_degenerate(&self) -> bool {
        self.hi == self.lo
    }

    #[inline]
    pub fn index(&self, v: f64) -> usize {
        if self.is_degenerate() {
            return 0;
        }
        let t = (v - self.lo) / (self.hi - self.lo) * self.bins as f64;
        if t <= 0.0 {
            0
        } else {
            (t as usize).min(self.bins - 1)
        }
    }

    pub fn accumulate<T: Copy + Into<f64>>(&self, counts: &mut [u64], samples: &[T]) {
        for &s in samples {
            counts[self.index(s.into())] += 1;
        }
    }

    /// Lower and upper edge of bin `i`.
    pub fn edges(&self, i: usize) -> (f64, f64) {
        let w = (self.hi - self.lo) / self.bins as f64;
        (self.lo + w * i as f64, self.lo + w * (i + 1) as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<u64>,
    pub total: u64,
    /// Set when the resolved range has zero width (constant samples).
    pub degenerate: bool,
}

impl Histogram {
    pub fn bin_count(&self) -> usize {
        self.counts.len()
    }

    pub fn from_counts(binning: Binning, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != binning.bins {
            return Err(Error::contract(format!(
                "{} counts for {} bins",
                counts.len(),
                binning.bins
            )));
        }
        Ok(Histogram {
            lo: binning.lo,
            hi: binning.hi,
            total: counts.iter().sum(),
            counts,
            degenerate: binning.is_degenerate(),
        })
    }
}

pub fn make_histogram<T: Copy + Into<f64>>(
    samples: &[T],
    bins: usize,
    range: RangeMode,
) -> Result<Histogram> {
    if samples.is_empty() {
        return Err(Error::contract("cannot bin an empty sample"));
    }
    let (lo, hi) = match range {
        RangeMode::PerSampleMinMax => min_max(samples.iter().map(|&v| v.into()))?,
        RangeMode::Fixed { lo, hi } => {
            if let Some(bad) = samples
                .iter()
                .map(|&v| v.into())
                .find(|v: &f64| !v.is_finite())
            {
                return Err(Error::contract(format!("non-finite sample {bad}")));
            }
            (lo, hi)
        }
    };
    let binning = Binning::new(lo, hi, bins)?;
    let mut counts = vec![0u64; bins];
    binning.accumulate(&mut counts, samples);
    Histogram::from_counts(binning, counts)
}
