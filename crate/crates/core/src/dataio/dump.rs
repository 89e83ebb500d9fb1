//! Per-image activation dumps, the exchange format for activations produced
//! by networks outside this crate.
//!
//! A dump directory holds a manifest (`manifest.csv`, same format as dataset
//! manifests) whose `path` column names one sub-directory per image. Each
//! sub-directory contains `layer_000.tnsr`, `layer_001.tnsr`, ... in network
//! order. A rank-1 tensor is a fully connected layer; higher ranks are
//! `[filters, spatial..]`.

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::manifest::{read_manifest, write_manifest, Manifest, ManifestRow};
use super::tensor_file::{load_tensor, save_tensor};
use super::Dataset;
use crate::error::{Error, Result};
use crate::net::{Network, SnapshotPoint};
use crate::tensor::Tensor;

pub const DUMP_MANIFEST: &str = "manifest.csv";

/// Activations of every image in a dataset, in dataset order.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationDump {
    pub ids: Vec<String>,
    pub labels: Vec<usize>,
    pub class_names: Vec<String>,
    /// `layers[i][l]` is layer `l` of image `i`.
    pub layers: Vec<Vec<Tensor>>,
}

impl ActivationDump {
    /// Runs `net` over every image (in parallel, order preserved).
    pub fn collect(net: &Network, data: &Dataset, point: SnapshotPoint) -> Result<Self> {
        let layers = data
            .images
            .par_iter()
            .zip(&data.ids)
            .map(|(img, id)| {
                net.forward_collect(img, point)
                    .map(|c| c.activations)
                    .map_err(|e| e.for_image(id))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ActivationDump {
            ids: data.ids.clone(),
            labels: data.labels.clone(),
            class_names: data.class_names.clone(),
            layers,
        })
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    pub fn class_count(&self) -> usize {
        self.class_names.len()
    }

    pub fn layer_count(&self) -> usize {
        self.layers.first().map_or(0, Vec::len)
    }

    /// Checks that every image has the same layer shapes as the first.
    pub fn validate(&self) -> Result<()> {
        if self.ids.len() != self.layers.len() || self.labels.len() != self.layers.len() {
            return Err(Error::contract(
                "activation dump columns disagree in length",
            ));
        }
        let Some(first) = self.layers.first() else {
            return Ok(());
        };
        for (id, layers) in self.ids.iter().zip(&self.layers) {
            if layers.len() != first.len() {
                return Err(Error::contract(format!(
                    "{} layers, expected {}",
                    layers.len(),
                    first.len()
                ))
                .for_image(id));
            }
            for (l, (a, b)) in layers.iter().zip(first).enumerate() {
                if a.shape() != b.shape() {
                    return Err(Error::contract(format!(
                        "layer {l} has shape {:?}, expected {:?}",
                        a.shape(),
                        b.shape()
                    ))
                    .for_image(id));
                }
            }
        }
        Ok(())
    }
}

fn layer_file(l: usize) -> String {
    format!("layer_{l:03}.tnsr")
}

/// Writes a dump that [`import_activation_dump`] reads back bit-exactly.
pub fn export_activation_dump(dir: impl AsRef<Path>, dump: &ActivationDump) -> Result<PathBuf> {
    dump.validate()?;
    let dir = dir.as_ref();
    let mut rows = Vec::with_capacity(dump.len());
    for ((id, &label), layers) in dump.ids.iter().zip(&dump.labels).zip(&dump.layers) {
        let rel = PathBuf::from(id);
        let image_dir = dir.join(&rel);
        std::fs::create_dir_all(&image_dir).map_err(|e| Error::io(&image_dir, e))?;
        for (l, t) in layers.iter().enumerate() {
            save_tensor(image_dir.join(layer_file(l)), t).map_err(|e| e.for_image(id))?;
        }
        rows.push(ManifestRow {
            image_id: id.clone(),
            path: rel,
            label,
        });
    }
    let path = dir.join(DUMP_MANIFEST);
    write_manifest(
        &path,
        &Manifest {
            classes: dump.class_names.clone(),
            rows,
        },
    )?;
    Ok(path)
}

/// Reads a dump directory (or its manifest file directly).
pub fn import_activation_dump(path: impl AsRef<Path>) -> Result<ActivationDump> {
    let path = path.as_ref();
    let manifest_path = if path.is_dir() {
        path.join(DUMP_MANIFEST)
    } else {
        path.to_path_buf()
    };
    let base = manifest_path
        .parent()
        .unwrap_or(Path::new("."))
        .to_path_buf();
    let m = read_manifest(&manifest_path)?;

    // The first image fixes the layer count; later images must match it.
    let mut expected_layers: Option<usize> = None;
    let mut layers = Vec::with_capacity(m.rows.len());
    for row in &m.rows {
        let image_dir = base.join(&row.path);
        if !image_dir.is_dir() {
            return Err(Error::io(
                &image_dir,
                std::io::Error::new(std::io::ErrorKind::NotFound, "activation directory missing"),
            )
            .for_image(&row.image_id));
        }
        let mut image_layers = Vec::new();
        loop {
            let file = image_dir.join(layer_file(image_layers.len()));
            let wanted = expected_layers.is_some_and(|n| image_layers.len() < n);
            if !wanted && !file.exists() {
                break;
            }
            image_layers.push(load_tensor(&file).map_err(|e| e.for_image(&row.image_id))?);
        }
        if image_layers.is_empty() {
            return Err(Error::contract("no layer_000.tnsr found").for_image(&row.image_id));
        }
        expected_layers.get_or_insert(image_layers.len());
        layers.push(image_layers);
    }

    let dump = ActivationDump {
        ids: m.rows.iter().map(|r| r.image_id.clone()).collect(),
        labels: m.rows.iter().map(|r| r.label).collect(),
        class_names: m.classes,
        layers,
    };
    dump.validate()?;
    Ok(dump)
}
