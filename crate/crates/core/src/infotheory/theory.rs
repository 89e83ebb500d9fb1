//! Dataset-level checks: conditioning on class and filter reduces response
//! entropy, the two-way class partition decomposes the conditional entropy,
//! and processing cannot add information (data-processing inequality).
//!
//! All dataset-level entropies here bin every value with one range shared
//! by all classes and filters, so they are plug-in estimates over a common
//! sample space.

use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::cent::{filter_count, filter_values};
use super::entropy::{entropy_of_counts, mutual_information, ContingencyTable};
use super::histogram::Binning;
use crate::dataio::{ActivationDump, ChainSample, Dataset};
use crate::error::{Error, Result};
use crate::net::{Network, SnapshotPoint};

/// Default estimator slack for [`dpi_check`], in bits.
pub const DPI_SLACK: f64 = 0.02;

/// A set of filters within one layer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterSelector {
    pub layer: usize,
    /// `None` selects every filter of the layer.
    pub filters: Option<Vec<usize>>,
}

impl FilterSelector {
    pub fn layer(layer: usize) -> Self {
        FilterSelector {
            layer,
            filters: None,
        }
    }

    pub fn filter(layer: usize, filter: usize) -> Self {
        FilterSelector {
            layer,
            filters: Some(vec![filter]),
        }
    }

    fn resolve(&self, dump: &ActivationDump) -> Result<Vec<usize>> {
        if dump.is_empty() {
            return Err(Error::contract("dataset is empty"));
        }
        dump.validate()?;
        let layer = dump.layers[0].get(self.layer).ok_or_else(|| {
            Error::contract(format!(
                "layer {} out of range ({} layers)",
                self.layer,
                dump.layer_count()
            ))
        })?;
        let n = filter_count(layer);
        let filters = match &self.filters {
            None => (0..n).collect(),
            Some(f) => f.clone(),
        };
        if filters.is_empty() {
            return Err(Error::contract("filter selection is empty"));
        }
        if let Some(&bad) = filters.iter().find(|&&f| f >= n) {
            return Err(Error::contract(format!(
                "filter {bad} out of range ({n} filters)"
            )));
        }
        Ok(filters)
    }
}

/// Shared-range histograms of the selected filters, split by class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseHistograms {
    pub lo: f64,
    pub hi: f64,
    pub bins: usize,
    pub filters: Vec<usize>,
    /// `counts[class][k]` is the histogram of filter `filters[k]`.
    pub counts: Vec<Vec<Vec<u64>>>,
    /// Images per class.
    pub class_sizes: Vec<usize>,
}

impl ResponseHistograms {
    pub fn build(dump: &ActivationDump, selector: &FilterSelector, bins: usize) -> Result<Self> {
        let filters = selector.resolve(dump)?;
        let l = selector.layer;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for layers in &dump.layers {
            for &f in &filters {
                for &v in filter_values(&layers[l], f) {
                    let v = v as f64;
                    if !v.is_finite() {
                        return Err(Error::contract("non-finite activation"));
                    }
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
            }
        }
        let binning = Binning::new(lo, hi, bins)?;
        let classes = dump.class_count();
        let mut counts = vec![vec![vec![0u64; bins]; filters.len()]; classes];
        let mut class_sizes = vec![0usize; classes];
        for (layers, &label) in dump.layers.iter().zip(&dump.labels) {
            class_sizes[label] += 1;
            for (k, &f) in filters.iter().enumerate() {
                binning.accumulate(&mut counts[label][k], filter_values(&layers[l], f));
            }
        }
        Ok(ResponseHistograms {
            lo,
            hi,
            bins,
            filters,
            counts,
            class_sizes,
        })
    }

    fn total_images(&self) -> usize {
        self.class_sizes.iter().sum()
    }

    /// `p(c_j)` as empirical image frequency.
    pub fn class_prior(&self, class: usize) -> f64 {
        self.class_sizes[class] as f64 / self.total_images() as f64
    }

    /// `H(Y | c_j, f_k)`.
    pub fn cell_entropy(&self, class: usize, k: usize) -> f64 {
        entropy_of_counts(&self.counts[class][k])
    }

    /// `H(Y | c_j)` pooling the selected filters.
    pub fn class_entropy(&self, class: usize) -> f64 {
        entropy_of_counts(&sum_counts(self.counts[class].iter()))
    }

    /// `H(Y)` pooling all classes and selected filters.
    pub fn pooled_entropy(&self) -> f64 {
        entropy_of_counts(&sum_counts(self.counts.iter().flatten()))
    }

    /// Long-format CSV `class,filter,bin,lo,hi,count`, one row per bin.
    pub fn to_csv(&self) -> String {
        let binning = Binning {
            lo: self.lo,
            hi: self.hi,
            bins: self.bins,
        };
        let mut s = String::from("class,filter,bin,lo,hi,count\n");
        for (class, hists) in self.counts.iter().enumerate() {
            for (k, counts) in hists.iter().enumerate() {
                for (b, c) in counts.iter().enumerate() {
                    let (lo, hi) = binning.edges(b);
                    writeln!(s, "{class},{},{b},{lo},{hi},{c}", self.filters[k]).unwrap();
                }
            }
        }
        s
    }
}

fn sum_counts<'a>(hists: impl Iterator<Item = &'a Vec<u64>>) -> Vec<u64> {
    let mut acc: Vec<u64> = Vec::new();
    for h in hists {
        if acc.is_empty() {
            acc = vec![0; h.len()];
        }
        for (a, b) in acc.iter_mut().zip(h) {
            *a += b;
        }
    }
    acc
}

/// Entropy of responses at three levels of conditioning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpectedCent {
    /// `H(Y|C,F) = sum_{i,j} p(c_j, f_i) H(Y | c_j, f_i)`, with
    /// `p(c_j, f_i) = p(c_j) / |F|`.
    pub expected: f64,
    /// `H(Y|C)`: per-class entropy of the pooled selected filters.
    pub class_conditional: f64,
    /// `H(Y)`: entropy of every selected response pooled.
    pub pooled: f64,
    pub lo: f64,
    pub hi: f64,
    /// `cells[j][k] = H(Y | c_j, f_k)`.
    pub cells: Vec<Vec<f64>>,
    pub class_priors: Vec<f64>,
}

pub fn expected_cent_from_dump(
    dump: &ActivationDump,
    selector: &FilterSelector,
    bins: usize,
) -> Result<ExpectedCent> {
    let h = ResponseHistograms::build(dump, selector, bins)?;
    let nf = h.filters.len() as f64;
    let classes = dump.class_count();
    let priors: Vec<f64> = (0..classes).map(|j| h.class_prior(j)).collect();
    let cells: Vec<Vec<f64>> = (0..classes)
        .map(|j| (0..h.filters.len()).map(|k| h.cell_entropy(j, k)).collect())
        .collect();
    let expected = (0..classes)
        .filter(|&j| h.class_sizes[j] > 0)
        .map(|j| priors[j] * cells[j].iter().sum::<f64>() / nf)
        .sum();
    let class_conditional = (0..classes)
        .filter(|&j| h.class_sizes[j] > 0)
        .map(|j| priors[j] * h.class_entropy(j))
        .sum();
    Ok(ExpectedCent {
        expected,
        class_conditional,
        pooled: h.pooled_entropy(),
        lo: h.lo,
        hi: h.hi,
        cells,
        class_priors: priors,
    })
}

/// Runs `net` over `data` and evaluates [`expected_cent_from_dump`].
pub fn expected_cent(
    net: &Network,
    data: &Dataset,
    selector: &FilterSelector,
    bins: usize,
) -> Result<ExpectedCent> {
    let dump = ActivationDump::collect(net, data, SnapshotPoint::PostRelu)?;
    expected_cent_from_dump(&dump, selector, bins)
}

/// Two-way split of the class set for one filter (or filter set).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionReport {
    /// `H(Y|C,F)` over all classes.
    pub h_conditional: f64,
    pub p_informative: f64,
    pub p_uninformative: f64,
    /// `H(Y|C',F)`: prior-weighted mean over the informative subset.
    pub h_informative: f64,
    /// `H(Y|C'',F)`.
    pub h_uninformative: f64,
    /// `|H(Y|C,F) - (p(C') H(Y|C',F) + p(C'') H(Y|C'',F))|`.
    pub decomposition_residual: f64,
    /// `H(Y|C',F) < H(Y|C'',F)`; recorded, not enforced.
    pub inequality_holds: bool,
}

pub fn partition_check_from_dump(
    dump: &ActivationDump,
    selector: &FilterSelector,
    informative: &[usize],
    uninformative: &[usize],
    bins: usize,
) -> Result<PartitionReport> {
    let classes = dump.class_count();
    if informative.is_empty() || uninformative.is_empty() {
        return Err(Error::contract(
            "both sides of the partition must be non-empty",
        ));
    }
    let mut seen = vec![false; classes];
    for &c in informative.iter().chain(uninformative) {
        let slot = seen.get_mut(c).ok_or_else(|| {
            Error::contract(format!("class {c} out of range ({classes} classes)"))
        })?;
        if *slot {
            return Err(Error::contract(format!(
                "class {c} appears twice in the partition"
            )));
        }
        *slot = true;
    }
    if seen.iter().any(|s| !s) {
        return Err(Error::contract("partition does not cover every class"));
    }

    let e = expected_cent_from_dump(dump, selector, bins)?;
    let side = |set: &[usize]| -> Result<(f64, f64)> {
        let p: f64 = set.iter().map(|&j| e.class_priors[j]).sum();
        if p == 0.0 {
            return Err(Error::contract(format!("classes {set:?} have no images")));
        }
        let nf = e.cells[0].len() as f64;
        let weighted: f64 = set
            .iter()
            .map(|&j| e.class_priors[j] * e.cells[j].iter().sum::<f64>() / nf)
            .sum();
        Ok((p, weighted / p))
    };
    let (p1, h1) = side(informative)?;
    let (p2, h2) = side(uninformative)?;
    Ok(PartitionReport {
        h_conditional: e.expected,
        p_informative: p1,
        p_uninformative: p2,
        h_informative: h1,
        h_uninformative: h2,
        decomposition_residual: (e.expected - (p1 * h1 + p2 * h2)).abs(),
        inequality_holds: h1 < h2,
    })
}

pub fn partition_check(
    net: &Network,
    data: &Dataset,
    selector: &FilterSelector,
    informative: &[usize],
    uninformative: &[usize],
    bins: usize,
) -> Result<PartitionReport> {
    let dump = ActivationDump::collect(net, data, SnapshotPoint::PostRelu)?;
    partition_check_from_dump(&dump, selector, informative, uninformative, bins)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DpiReport {
    pub i_xc: f64,
    pub i_yc: f64,
    pub slack: f64,
    /// `I(Y;C) <= I(X;C) + slack`.
    pub holds: bool,
}

/// Plug-in check of `I(Y;C) <= I(X;C)` on samples of `X -> Y -> C`.
pub fn dpi_check(samples: &[ChainSample], slack: f64) -> Result<DpiReport> {
    if samples.is_empty() {
        return Err(Error::contract("no chain samples"));
    }
    let xc = ContingencyTable::from_pairs(samples.iter().map(|s| (s.c, s.x)))?;
    let yc = ContingencyTable::from_pairs(samples.iter().map(|s| (s.c, s.y)))?;
    let i_xc = mutual_information(&xc)?.bits();
    let i_yc = mutual_information(&yc)?.bits();
    Ok(DpiReport {
        i_xc,
        i_yc,
        slack,
        holds: i_yc <= i_xc + slack,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;

    fn dump(maps: Vec<(usize, Vec<f32>)>) -> ActivationDump {
        let n = maps.len();
        ActivationDump {
            ids: (0..n).map(|i| format!("i{i}")).collect(),
            labels: maps.iter().map(|m| m.0).collect(),
            class_names: vec!["a".into(), "b".into()],
            layers: maps
                .into_iter()
                .map(|(_, v)| vec![Tensor::new(vec![1, v.len()], v).unwrap()])
                .collect(),
        }
    }

    #[test]
    fn single_class_single_filter_collapses() {
        let d = ActivationDump {
            class_names: vec!["only".into()],
            ..dump(vec![(0, vec![0., 1., 2., 3.]), (0, vec![0., 0., 3., 3.])])
        };
        let e = expected_cent_from_dump(&d, &FilterSelector::layer(0), 4).unwrap();
        // pooled counts over [0, 3] with 4 bins: [3, 1, 1, 3]
        let want = entropy_of_counts(&[3, 1, 1, 3]);
        assert!((e.expected - want).abs() < 1e-12);
        assert!((e.pooled - want).abs() < 1e-12);
    }

    #[test]
    fn equal_priors_average_cells() {
        // class a: 2 values -> 1 bit; class b: 8 values -> 3 bits (8 bins over [0, 7])
        let d = dump(vec![
            (0, vec![0., 7., 0., 7., 0., 7., 0., 7.]),
            (1, (0..8).map(|v| v as f32).collect()),
        ]);
        let e = expected_cent_from_dump(&d, &FilterSelector::layer(0), 8).unwrap();
        assert!((e.cells[0][0] - 1.0).abs() < 1e-12);
        assert!((e.cells[1][0] - 3.0).abs() < 1e-12);
        assert!((e.expected - 2.0).abs() < 1e-12);
        assert!(e.expected <= e.pooled + 1e-12);
    }

    #[test]
    fn partition_must_cover_classes() {
        let d = dump(vec![(0, vec![0., 1.]), (1, vec![1., 2.])]);
        let sel = FilterSelector::layer(0);
        assert!(partition_check_from_dump(&d, &sel, &[0, 1], &[], 4).is_err());
        assert!(partition_check_from_dump(&d, &sel, &[0], &[0], 4).is_err());
        assert!(partition_check_from_dump(&d, &sel, &[0], &[2], 4).is_err());
        let r = partition_check_from_dump(&d, &sel, &[0], &[1], 4).unwrap();
        assert!(r.decomposition_residual < 1e-12);
    }

    #[test]
    fn constant_response_on_uninformative_side_is_the_low_side() {
        // filter responds with spread values to class a, constant to class b
        let d = dump(vec![(0, vec![0., 1., 2., 3.]), (1, vec![0., 0., 0., 0.])]);
        let r = partition_check_from_dump(&d, &FilterSelector::layer(0), &[0], &[1], 4).unwrap();
        assert_eq!(r.h_uninformative, 0.0);
        assert!(r.h_informative > 0.0);
        assert!(!r.inequality_holds);
    }

    #[test]
    fn dpi_identity_and_constant() {
        let s: Vec<ChainSample> = (0..1000)
            .map(|i| ChainSample {
                x: i % 5,
                y: i % 5,
                c: (i % 5) / 3,
            })
            .collect();
        let r = dpi_check(&s, DPI_SLACK).unwrap();
        assert!((r.i_xc - r.i_yc).abs() < 1e-9 && r.holds);
        let s: Vec<ChainSample> = s.iter().map(|t| ChainSample { y: 0, ..*t }).collect();
        let r = dpi_check(&s, DPI_SLACK).unwrap();
        assert_eq!(r.i_yc, 0.0);
        assert!(r.holds);
    }
}
