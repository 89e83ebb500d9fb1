//! Files, manifests and data generators.

mod dump;
mod manifest;
mod markov;
mod synth;
mod tensor_file;

pub use dump::{export_activation_dump, import_activation_dump, ActivationDump};
pub use manifest::{
    load_dataset, read_manifest, save_dataset, write_manifest, Manifest, ManifestRow,
};
pub use markov::{generate_markov_chain, ChainSample, MarkovSpec};
pub use synth::{generate_synthetic, ClassParams, SyntheticSpec};
pub use tensor_file::{
    decode_tensor, encode_tensor, load_tensor, save_tensor, TENSOR_MAGIC, TENSOR_VERSION,
};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Labeled images held in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub ids: Vec<String>,
    pub images: Vec<Tensor>,
    pub labels: Vec<usize>,
    pub class_names: Vec<String>,
}

impl Dataset {
    pub fn new(
        ids: Vec<String>,
        images: Vec<Tensor>,
        labels: Vec<usize>,
        class_names: Vec<String>,
    ) -> Result<Self> {
        if ids.len() != images.len() || images.len() != labels.len() {
            return Err(Error::contract(format!(
                "dataset columns disagree: {} ids, {} images, {} labels",
                ids.len(),
                images.len(),
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= class_names.len()) {
            return Err(Error::contract(format!(
                "label {bad} outside class table of {}",
                class_names.len()
            )));
        }
        Ok(Dataset {
            ids,
            images,
            labels,
            class_names,
        })
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn class_count(&self) -> usize {
        self.class_names.len()
    }

    /// Subset in the given index order.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        Dataset {
            ids: indices.iter().map(|&i| self.ids[i].clone()).collect(),
            images: indices.iter().map(|&i| self.images[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            class_names: self.class_names.clone(),
        }
    }
}
