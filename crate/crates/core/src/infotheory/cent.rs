//! CENT features: entropies of activation histograms, per filter or per layer.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::entropy::entropy;
use super::histogram::{make_histogram, RangeMode, DEFAULT_BINS};
use crate::dataio::ActivationDump;
use crate::error::{Error, FormatError, Result};
use crate::net::{Network, SnapshotPoint};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CentMode {
    /// One value per filter map; a fully connected layer counts as one filter.
    PerFilter,
    /// One value per layer, pooling every activation in it.
    PerLayer,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CentConfig {
    pub mode: CentMode,
    pub bins: usize,
    pub range: RangeMode,
    pub point: SnapshotPoint,
}

impl Default for CentConfig {
    fn default() -> Self {
        CentConfig {
            mode: CentMode::PerLayer,
            bins: DEFAULT_BINS,
            range: RangeMode::PerSampleMinMax,
            point: SnapshotPoint::PostRelu,
        }
    }
}

/// Where a CENT value came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CentSource {
    Filter { layer: usize, filter: usize },
    Layer { layer: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CentVector {
    pub mode: CentMode,
    /// Entropies in bits, in (layer, filter) order.
    pub values: Vec<f64>,
    pub provenance: Vec<CentSource>,
}

/// Entropy of one filter's response map.
pub fn cent_per_filter(map: &Tensor, bins: usize, range: RangeMode) -> Result<f64> {
    Ok(entropy(&make_histogram(map.data(), bins, range)?))
}

/// Entropy of the histogram pooling every activation of a layer.
pub fn cent_per_layer(layer: &Tensor, bins: usize, range: RangeMode) -> Result<f64> {
    Ok(entropy(&make_histogram(layer.data(), bins, range)?))
}

/// Number of filter maps a layer contributes in per-filter mode.
pub fn filter_count(layer: &Tensor) -> usize {
    if layer.rank() >= 2 {
        layer.shape()[0]
    } else {
        1
    }
}

/// Values of filter `f` of a layer (the whole layer if it is rank 1).
pub fn filter_values(layer: &Tensor, f: usize) -> &[f32] {
    if layer.rank() >= 2 {
        layer.outer(f)
    } else {
        layer.data()
    }
}

/// CENT vector from one image's layer activations.
pub fn cent_from_activations(
    layers: &[Tensor],
    mode: CentMode,
    bins: usize,
    range: RangeMode,
) -> Result<CentVector> {
    let mut values = Vec::new();
    let mut provenance = Vec::new();
    for (l, layer) in layers.iter().enumerate() {
        match mode {
            CentMode::PerLayer => {
                values.push(cent_per_layer(layer, bins, range)?);
                provenance.push(CentSource::Layer { layer: l });
            }
            CentMode::PerFilter => {
                for f in 0..filter_count(layer) {
                    let h = entropy(&make_histogram(filter_values(layer, f), bins, range)?);
                    values.push(h);
                    provenance.push(CentSource::Filter {
                        layer: l,
                        filter: f,
                    });
                }
            }
        }
    }
    Ok(CentVector {
        mode,
        values,
        provenance,
    })
}

/// Runs the network on `image` and computes its CENT vector.
pub fn extract_cent_features(
    net: &Network,
    image: &Tensor,
    config: &CentConfig,
) -> Result<CentVector> {
    let collected = net.forward_collect(image, config.point)?;
    cent_from_activations(
        &collected.activations,
        config.mode,
        config.bins,
        config.range,
    )
}

/// CENT feature rows for a labeled set of images.
#[derive(Debug, Clone, PartialEq)]
pub struct CentMatrix {
    pub ids: Vec<String>,
    pub labels: Vec<usize>,
    pub rows: Vec<Vec<f64>>,
    pub provenance: Vec<CentSource>,
}

impl CentMatrix {
    /// Extracts features for every image of a dump (parallel, order kept).
    pub fn from_dump(
        dump: &ActivationDump,
        mode: CentMode,
        bins: usize,
        range: RangeMode,
    ) -> Result<Self> {
        dump.validate()?;
        let vectors = dump
            .layers
            .par_iter()
            .zip(&dump.ids)
            .map(|(layers, id)| {
                cent_from_activations(layers, mode, bins, range).map_err(|e| e.for_image(id))
            })
            .collect::<Result<Vec<_>>>()?;
        let provenance = vectors
            .first()
            .map(|v| v.provenance.clone())
            .unwrap_or_default();
        Ok(CentMatrix {
            ids: dump.ids.clone(),
            labels: dump.labels.clone(),
            rows: vectors.into_iter().map(|v| v.values).collect(),
            provenance,
        })
    }

    pub fn feature_count(&self) -> usize {
        self.rows.first().map_or(self.provenance.len(), Vec::len)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// `image_id,label,feat_0,...,feat_{k-1}`; reals use the shortest
    /// representation that round-trips exactly.
    pub fn to_csv(&self) -> String {
        let k = self.feature_count();
        let mut s = String::from("image_id,label");
        for i in 0..k {
            write!(s, ",feat_{i}").unwrap();
        }
        s.push('\n');
        for ((id, label), row) in self.ids.iter().zip(&self.labels).zip(&self.rows) {
            write!(s, "{id},{label}").unwrap();
            for v in row {
                write!(s, ",{v}").unwrap();
            }
            s.push('\n');
        }
        s
    }

    /// Parses the CSV written by [`CentMatrix::to_csv`]. Provenance is not
    /// stored in the file and comes back empty.
    pub fn from_csv(text: &str) -> Result<Self, FormatError> {
        let mut lines = text
            .lines()
            .filter(|l| !l.trim().is_empty() && !l.starts_with('#'));
        let header = lines
            .next()
            .ok_or_else(|| FormatError::Malformed("empty feature file".into()))?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        if cols.len() < 3 || cols[0] != "image_id" || cols[1] != "label" {
            return Err(FormatError::Malformed(format!(
                "unexpected header `{header}`"
            )));
        }
        for (i, c) in cols[2..].iter().enumerate() {
            if *c != format!("feat_{i}") {
                return Err(FormatError::Malformed(format!(
                    "column `{c}` should be feat_{i}"
                )));
            }
        }
        let k = cols.len() - 2;
        let mut m = CentMatrix {
            ids: Vec::new(),
            labels: Vec::new(),
            rows: Vec::new(),
            provenance: Vec::new(),
        };
        for (n, line) in lines.enumerate() {
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            if f.len() != k + 2 {
                return Err(FormatError::Malformed(format!(
                    "data row {}: {} fields, expected {}",
                    n + 1,
                    f.len(),
                    k + 2
                )));
            }
            let label = f[1].parse().map_err(|_| {
                FormatError::Malformed(format!("data row {}: bad label `{}`", n + 1, f[1]))
            })?;
            let row = f[2..]
                .iter()
                .map(|v| {
                    v.parse::<f64>()
                        .ok()
                        .filter(|x| x.is_finite())
                        .ok_or_else(|| {
                            FormatError::Malformed(format!("data row {}: bad value `{v}`", n + 1))
                        })
                })
                .collect::<Result<Vec<_>, _>>()?;
            m.ids.push(f[0].to_string());
            m.labels.push(label);
            m.rows.push(row);
        }
        Ok(m)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv(&text).map_err(|source| Error::Format {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}
