//! Random-forest classifier: bootstrap-aggregated CART trees with random
//! feature subsets at each split.

mod io;
mod tree;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use io::{
    decode_forest, dump_forest, encode_forest, load_forest, save_forest, FOREST_MAGIC,
    FOREST_VERSION,
};
pub use tree::{DecisionTree, Node, SplitCriterion};

use crate::error::{Error, Result};
use tree::{grow_tree, GrowParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestConfig {
    pub tree_count: usize,
    /// Candidate features per split; `None` means `floor(sqrt(p))`, at least 1.
    pub mtry: Option<usize>,
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    pub seed: u64,
    pub bootstrap: bool,
    pub criterion: SplitCriterion,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            tree_count: 100,
            mtry: None,
            max_depth: None,
            min_leaf: 1,
            seed: 0,
            bootstrap: true,
            criterion: SplitCriterion::Gini,
        }
    }
}

impl ForestConfig {
    pub fn resolved_mtry(&self, feature_count: usize) -> usize {
        self.mtry
            .unwrap_or_else(|| ((feature_count as f64).sqrt().floor() as usize).max(1))
    }

    pub fn validate(&self, feature_count: usize) -> Result<()> {
        if self.tree_count == 0 {
            return Err(Error::contract("tree_count must be at least 1"));
        }
        if self.min_leaf == 0 {
            return Err(Error::contract("min_leaf must be at least 1"));
        }
        let mtry = self.resolved_mtry(feature_count);
        if mtry == 0 || mtry > feature_count {
            return Err(Error::contract(format!(
                "mtry {mtry} outside 1..={feature_count}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<DecisionTree>,
    pub feature_count: usize,
    pub class_count: usize,
    /// Number of internal nodes splitting on each feature, over all trees.
    pub split_counts: Vec<u64>,
    /// Out-of-bag accuracy; `None` without bootstrap or when no row was ever
    /// left out.
    pub oob_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureImportance {
    pub split_counts: Vec<u64>,
    /// Per-tree sum of `samples / root_samples * gain`, averaged over trees.
    pub impurity_decrease: Vec<f64>,
}

fn check_matrix(features: &[Vec<f64>]) -> Result<usize> {
    let p = features.first().map_or(0, Vec::len);
    if p == 0 {
        return Err(Error::contract("feature matrix has no columns"));
    }
    for (i, row) in features.iter().enumerate() {
        if row.len() != p {
            return Err(Error::contract(format!(
                "row {i} has {} features, expected {p}",
                row.len()
            )));
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::contract(format!("row {i} has a non-finite feature")));
        }
    }
    Ok(p)
}

/// Fits a forest with `max(label) + 1` classes.
pub fn fit(features: &[Vec<f64>], labels: &[usize], config: &ForestConfig) -> Result<ForestModel> {
    let classes = labels.iter().max().map_or(0, |m| m + 1);
    fit_with_classes(features, labels, classes, config)
}

/// Fits a forest whose probability vectors have `classes` entries, even if
/// some classes are absent from `labels`.
pub fn fit_with_classes(
    features: &[Vec<f64>],
    labels: &[usize],
    classes: usize,
    config: &ForestConfig,
) -> Result<ForestModel> {
    let n = features.len();
    if n < 2 {
        return Err(Error::contract(format!("need at least 2 rows, got {n}")));
    }
    if labels.len() != n {
        return Err(Error::ShapeMismatch {
            context: "forest labels",
            left: vec![labels.len()],
            right: vec![n],
        });
    }
    let p = check_matrix(features)?;
    if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
        return Err(Error::contract(format!(
            "label {bad} outside {classes} classes"
        )));
    }
    let present = {
        let mut seen = vec![false; classes];
        labels.iter().for_each(|&l| seen[l] = true);
        seen.iter().filter(|&&s| s).count()
    };
    if present < 2 {
        return Err(Error::contract("need at least 2 classes present"));
    }
    config.validate(p)?;

    let params = GrowParams {
        classes,
        mtry: config.resolved_mtry(p),
        max_depth: config.max_depth,
        min_leaf: config.min_leaf,
        criterion: config.criterion,
    };
    let grown: Vec<(DecisionTree, Vec<bool>)> = (0..config.tree_count)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(t as u64);
            let mut in_bag = vec![!config.bootstrap; n];
            let rows: Vec<usize> = if config.bootstrap {
                (0..n)
                    .map(|_| {
                        let r = rng.random_range(0..n);
                        in_bag[r] = true;
                        r
                    })
                    .collect()
            } else {
                (0..n).collect()
            };
            (grow_tree(features, labels, rows, &params, &mut rng), in_bag)
        })
        .collect();

    let oob_accuracy = config
        .bootstrap
        .then(|| oob_accuracy(features, labels, classes, &grown))
        .flatten();
    let trees: Vec<DecisionTree> = grown.into_iter().map(|(t, _)| t).collect();
    let split_counts = count_splits(&trees, p);
    Ok(ForestModel {
        trees,
        feature_count: p,
        class_count: classes,
        split_counts,
        oob_accuracy,
    })
}

fn oob_accuracy(
    x: &[Vec<f64>],
    y: &[usize],
    classes: usize,
    grown: &[(DecisionTree, Vec<bool>)],
) -> Option<f64> {
    let mut scored = 0usize;
    let mut correct = 0usize;
    for (i, row) in x.iter().enumerate() {
        let mut acc = vec![0.0; classes];
        let mut votes = 0;
        for (tree, in_bag) in grown {
            if !in_bag[i] {
                votes += 1;
                for (a, p) in acc.iter_mut().zip(tree.predict_proba(row)) {
                    *a += p;
                }
            }
        }
        if votes > 0 {
            scored += 1;
            if argmax(&acc) == y[i] {
                correct += 1;
            }
        }
    }
    (scored > 0).then(|| correct as f64 / scored as f64)
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

fn count_splits(trees: &[DecisionTree], p: usize) -> Vec<u64> {
    let mut counts = vec![0u64; p];
    for t in trees {
        for node in &t.nodes {
            if let Node::Split { feature, .. } = node {
                counts[*feature] += 1;
            }
        }
    }
    counts
}

impl ForestModel {
    fn check_fitted(&self) -> Result<()> {
        if self.trees.is_empty() {
            return Err(Error::contract("forest has no trees"));
        }
        Ok(())
    }

    /// Mean of the per-tree leaf class distributions.
    pub fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_fitted()?;
        if x.len() != self.feature_count {
            return Err(Error::ShapeMismatch {
                context: "forest input",
                left: vec![x.len()],
                right: vec![self.feature_count],
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::contract("non-finite feature value"));
        }
        let mut acc = vec![0.0; self.class_count];
        for t in &self.trees {
            for (a, p) in acc.iter_mut().zip(t.predict_proba(x)) {
                *a += p;
            }
        }
        let k = self.trees.len() as f64;
        acc.iter_mut().for_each(|a| *a /= k);
        Ok(acc)
    }

    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        Ok(argmax(&self.predict_proba(x)?))
    }

    pub fn internal_node_count(&self) -> usize {
        self.trees.iter().map(DecisionTree::internal_count).sum()
    }
}

pub fn feature_importance(model: &ForestModel) -> Result<FeatureImportance> {
    model.check_fitted()?;
    let p = model.feature_count;
    let mut decrease = vec![0.0; p];
    for t in &model.trees {
        let root = match &t.nodes[0] {
            Node::Split { samples, .. } => *samples as f64,
            Node::Leaf { .. } => continue,
        };
        for node in &t.nodes {
            if let Node::Split {
                feature,
                samples,
                gain,
                ..
            } = node
            {
                decrease[*feature] += *samples as f64 / root * gain;
            }
        }
    }
    let k = model.trees.len() as f64;
    decrease.iter_mut().for_each(|d| *d /= k);
    Ok(FeatureImportance {
        split_counts: count_splits(&model.trees, p),
        impurity_decrease: decrease,
    })
}
