use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::folds::{kfold_split, FoldPlan};
use super::roc::{auc, roc_curve, RocCurve};
use crate::error::{Error, Result};
use crate::forest::{fit_with_classes, ForestConfig};

/// Test-fold predictions kept for auditing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldScores {
    pub test: Vec<usize>,
    pub labels: Vec<usize>,
    /// Class-probability vector per test sample.
    pub probs: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub fold_auc: Vec<f64>,
    pub mean_auc: f64,
    pub folds: Vec<FoldScores>,
    pub class_count: usize,
}

/// AUC for class-probability vectors: the plain AUC of `p(class 1)` with two
/// classes, otherwise the mean one-vs-rest AUC over classes that have both
/// positives and negatives.
pub fn multiclass_auc(probs: &[Vec<f64>], labels: &[usize], classes: usize) -> Result<f64> {
    if classes == 2 {
        let scores: Vec<f64> = probs.iter().map(|p| p[1]).collect();
        let pos: Vec<bool> = labels.iter().map(|&l| l == 1).collect();
        return auc(&scores, &pos);
    }
    let mut sum = 0.0;
    let mut used = 0;
    for c in 0..classes {
        let pos: Vec<bool> = labels.iter().map(|&l| l == c).collect();
        if pos.iter().all(|&p| p) || !pos.iter().any(|&p| p) {
            continue;
        }
        let scores: Vec<f64> = probs.iter().map(|p| p[c]).collect();
        sum += auc(&scores, &pos)?;
        used += 1;
    }
    if used == 0 {
        return Err(Error::contract("test fold contains a single class"));
    }
    Ok(sum / used as f64)
}

impl Metrics {
    /// ROC of fold `i` (binary problems only).
    pub fn fold_roc(&self, i: usize) -> Result<RocCurve> {
        let f = &self.folds[i];
        binary_roc(&f.probs, &f.labels, self.class_count)
    }

    /// ROC over the concatenated test predictions of every fold.
    pub fn pooled_roc(&self) -> Result<RocCurve> {
        let probs: Vec<Vec<f64>> = self.folds.iter().flat_map(|f| f.probs.clone()).collect();
        let labels: Vec<usize> = self.folds.iter().flat_map(|f| f.labels.clone()).collect();
        binary_roc(&probs, &labels, self.class_count)
    }

    /// `fold,auc` per fold, then a `mean` row. `comment` lines are prefixed
    /// with `# `.
    pub fn to_csv(&self, comment: Option<&str>) -> String {
        let mut s = String::new();
        if let Some(c) = comment {
            for line in c.lines() {
                writeln!(s, "# {line}").unwrap();
            }
        }
        s.push_str("fold,auc\n");
        for (i, a) in self.fold_auc.iter().enumerate() {
            writeln!(s, "{i},{a}").unwrap();
        }
        writeln!(s, "mean,{}", self.mean_auc).unwrap();
        s
    }
}

fn binary_roc(probs: &[Vec<f64>], labels: &[usize], classes: usize) -> Result<RocCurve> {
    if classes != 2 {
        return Err(Error::contract(format!(
            "ROC curves need 2 classes, got {classes}"
        )));
    }
    let scores: Vec<f64> = probs.iter().map(|p| p[1]).collect();
    let pos: Vec<bool> = labels.iter().map(|&l| l == 1).collect();
    roc_curve(&scores, &pos)
}

/// Fits on each fold's training rows and scores its test rows.
pub fn cross_validate(
    features: &[Vec<f64>],
    labels: &[usize],
    config: &ForestConfig,
    plan: &FoldPlan,
) -> Result<Metrics> {
    if features.len() != labels.len() {
        return Err(Error::ShapeMismatch {
            context: "cross-validation features vs labels",
            left: vec![features.len()],
            right: vec![labels.len()],
        });
    }
    let classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut fold_auc = Vec::with_capacity(plan.folds.len());
    let mut folds = Vec::with_capacity(plan.folds.len());
    for (i, fold) in plan.folds.iter().enumerate() {
        if fold
            .train
            .iter()
            .chain(&fold.test)
            .any(|&r| r >= labels.len())
        {
            return Err(Error::contract(format!(
                "fold {i} indexes past {} samples",
                labels.len()
            )));
        }
        let x: Vec<Vec<f64>> = fold.train.iter().map(|&r| features[r].clone()).collect();
        let y: Vec<usize> = fold.train.iter().map(|&r| labels[r]).collect();
        let model = fit_with_classes(&x, &y, classes, config)?;
        let probs = fold
            .test
            .iter()
            .map(|&r| model.predict_proba(&features[r]))
            .collect::<Result<Vec<_>>>()?;
        let test_labels: Vec<usize> = fold.test.iter().map(|&r| labels[r]).collect();
        let a = multiclass_auc(&probs, &test_labels, classes)
            .map_err(|e| Error::contract(format!("fold {i}: {e}")))?;
        log::debug!("fold {i}: auc {a:.4}");
        fold_auc.push(a);
        folds.push(FoldScores {
            test: fold.test.clone(),
            labels: test_labels,
            probs,
        });
    }
    let mean_auc = fold_auc.iter().sum::<f64>() / fold_auc.len() as f64;
    Ok(Metrics {
        fold_auc,
        mean_auc,
        folds,
        class_count: classes,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Permutation {
    /// Labels left in place.
    Identity,
    /// Seeded Fisher-Yates shuffle.
    Seeded(u64),
}

impl std::fmt::Display for Permutation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Permutation::Identity => write!(f, "identity"),
            Permutation::Seeded(s) => write!(f, "seeded({s})"),
        }
    }
}

pub fn permute_labels(labels: &[usize], permutation: Permutation) -> Vec<usize> {
    let mut out = labels.to_vec();
    if let Permutation::Seeded(seed) = permutation {
        out.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    out
}

/// Permutes the labels, rebuilds the fold plan on the permuted labels with
/// the plan's own `k`, seed and stratification, then cross-validates.
pub fn permutation_baseline(
    features: &[Vec<f64>],
    labels: &[usize],
    config: &ForestConfig,
    plan: &FoldPlan,
    permutation: Permutation,
) -> Result<Metrics> {
    let permuted = permute_labels(labels, permutation);
    let plan = kfold_split(&permuted, plan.k, plan.seed, plan.stratified)?;
    cross_validate(features, &permuted, config, &plan)
}
