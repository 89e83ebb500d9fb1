//! Plug-in Shannon entropy, conditional entropy and mutual information, in bits.

use serde::{Deserialize, Serialize};

use super::histogram::{make_histogram, Histogram, RangeMode};
use crate::error::{Error, Result};

/// `-sum p log2 p` over nonzero counts (`0 log 0 = 0`).
pub fn entropy_of_counts(counts: &[u64]) -> f64 {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let n = total as f64;
    let h = counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum::<f64>();
    // Only rounding can push the sum outside its exact bounds.
    h.clamp(0.0, (counts.len().max(1) as f64).log2())
}

pub fn entropy(hist: &Histogram) -> f64 {
    entropy_of_counts(&hist.counts)
}

/// Class priors `p(c_j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelSpace {
    priors: Vec<f64>,
}

impl LabelSpace {
    pub fn from_priors(priors: Vec<f64>) -> Result<Self> {
        if priors.is_empty() {
            return Err(Error::contract("label space needs at least one class"));
        }
        if priors.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::contract(format!(
                "priors must be non-negative: {priors:?}"
            )));
        }
        let sum: f64 = priors.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::contract(format!("priors sum to {sum}, not 1")));
        }
        Ok(LabelSpace { priors })
    }

    pub fn uniform(classes: usize) -> Result<Self> {
        if classes == 0 {
            return Err(Error::contract("label space needs at least one class"));
        }
        Ok(LabelSpace {
            priors: vec![1.0 / classes as f64; classes],
        })
    }

    /// Empirical frequencies from per-class counts.
    pub fn from_counts(counts: &[usize]) -> Result<Self> {
        let total: usize = counts.iter().sum();
        if total == 0 {
            return Err(Error::contract("label counts are all zero"));
        }
        Ok(LabelSpace {
            priors: counts.iter().map(|&c| c as f64 / total as f64).collect(),
        })
    }

    /// Empirical frequencies of `labels` over `classes` classes.
    pub fn from_labels(labels: &[usize], classes: usize) -> Result<Self> {
        let mut counts = vec![0usize; classes];
        for &l in labels {
            *counts.get_mut(l).ok_or_else(|| {
                Error::contract(format!("label {l} outside {classes} classes"))
            })? += 1;
        }
        Self::from_counts(&counts)
    }

    pub fn classes(&self) -> usize {
        self.priors.len()
    }

    pub fn priors(&self) -> &[f64] {
        &self.priors
    }
}

/// `sum_j p(c_j) H(Y | c_j)` with one histogram per class.
///
/// With a fixed range shared by all classes and empirical priors this is the
/// plug-in estimate of `H(Y|C)`; with [`RangeMode::PerSampleMinMax`] each
/// class is binned over its own range.
pub fn conditional_entropy<T: Copy + Into<f64>>(
    per_class_samples: &[Vec<T>],
    labels: &LabelSpace,
    bins: usize,
    range: RangeMode,
) -> Result<f64> {
    if per_class_samples.len() != labels.classes() {
        return Err(Error::contract(format!(
            "{} sample groups for {} classes",
            per_class_samples.len(),
            labels.classes()
        )));
    }
    let mut h = 0.0;
    for (j, (samples, &p)) in per_class_samples.iter().zip(labels.priors()).enumerate() {
        if samples.is_empty() {
            return Err(Error::contract(format!("class {j} has no samples")));
        }
        h += p * entropy(&make_histogram(samples, bins, range)?);
    }
    Ok(h)
}

/// Joint counts of (class, value) pairs; rows are classes `C`, columns are
/// the values of `Y`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContingencyTable {
    rows: usize,
    cols: usize,
    counts: Vec<u64>,
}

impl ContingencyTable {
    pub fn new(rows: usize, cols: usize, counts: Vec<u64>) -> Result<Self> {
        if rows == 0 || cols == 0 || counts.len() != rows * cols {
            return Err(Error::contract(format!(
                "{} counts do not form a {rows}x{cols} table",
                counts.len()
            )));
        }
        Ok(ContingencyTable { rows, cols, counts })
    }

    pub fn from_rows(rows: &[Vec<u64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::contract("ragged contingency table"));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    /// Tallies `(row, col)` pairs; cardinalities are `max + 1`.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (usize, usize)> + Clone) -> Result<Self> {
        let (mut r, mut c) = (0, 0);
        for (a, b) in pairs.clone() {
            r = r.max(a + 1);
            c = c.max(b + 1);
        }
        let mut t = Self::new(r.max(1), c.max(1), vec![0; r.max(1) * c.max(1)])?;
        for (a, b) in pairs {
            t.counts[a * t.cols + b] += 1;
        }
        Ok(t)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> u64 {
        self.counts[r * self.cols + c]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn row(&self, r: usize) -> &[u64] {
        &self.counts[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<u64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn row_marginals(&self) -> Vec<u64> {
        (0..self.rows).map(|r| self.row(r).iter().sum()).collect()
    }

    pub fn col_marginals(&self) -> Vec<u64> {
        (0..self.cols)
            .map(|c| self.column(c).iter().sum())
            .collect()
    }
}

/// Both algebraic routes to `I(Y;C)`, plus the entropies they are built from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MutualInformation {
    pub h_y: f64,
    pub h_y_given_c: f64,
    pub h_c: f64,
    pub h_c_given_y: f64,
}

impl MutualInformation {
    /// `H(Y) - H(Y|C)`.
    pub fn bits(&self) -> f64 {
        self.h_y - self.h_y_given_c
    }

    /// `H(C) - H(C|Y)`.
    pub fn bits_via_classes(&self) -> f64 {
        self.h_c - self.h_c_given_y
    }
}

fn weighted_row_entropy(marginals: &[u64], total: f64, slice: impl Fn(usize) -> Vec<u64>) -> f64 {
    marginals
        .iter()
        .enumerate()
        .filter(|(_, &m)| m > 0)
        .map(|(i, &m)| m as f64 / total * entropy_of_counts(&slice(i)))
        .sum()
}

pub fn mutual_information(table: &ContingencyTable) -> Result<MutualInformation> {
    let total = table.total();
    if total == 0 {
        return Err(Error::contract("contingency table is all zeros"));
    }
    let n = total as f64;
    let rows = table.row_marginals();
    let cols = table.col_marginals();
    Ok(MutualInformation {
        h_y: entropy_of_counts(&cols),
        h_y_given_c: weighted_row_entropy(&rows, n, |r| table.row(r).to_vec()),
        h_c: entropy_of_counts(&rows),
        h_c_given_y: weighted_row_entropy(&cols, n, |c| table.column(c)),
    })
}

/// `I(Y;C|X) = sum_x p(x) I(Y;C | X=x)` from `(x, y, c)` triples.
pub fn conditional_mutual_information(triples: &[(usize, usize, usize)]) -> Result<f64> {
    if triples.is_empty() {
        return Err(Error::contract("no samples"));
    }
    let xs = triples.iter().map(|t| t.0).max().unwrap() + 1;
    let ys = triples.iter().map(|t| t.1).max().unwrap() + 1;
    let cs = triples.iter().map(|t| t.2).max().unwrap() + 1;
    let mut tables = vec![vec![0u64; cs * ys]; xs];
    for &(x, y, c) in triples {
        tables[x][c * ys + y] += 1;
    }
    let n = triples.len() as f64;
    let mut cmi = 0.0;
    for counts in tables {
        let t = ContingencyTable::new(cs, ys, counts)?;
        let m = t.total();
        if m > 0 {
            cmi += m as f64 / n * mutual_information(&t)?.bits();
        }
    }
    Ok(cmi)
}
