//! Cross-validation, ROC/AUC and the label-permutation control.

mod cv;
mod folds;
mod roc;

pub use cv::{
    cross_validate, multiclass_auc, permutation_baseline, permute_labels, FoldScores, Metrics,
    Permutation,
};
pub use folds::{kfold_split, Fold, FoldPlan};
pub use roc::{auc, mann_whitney_auc, roc_curve, RocCurve, RocPoint};
