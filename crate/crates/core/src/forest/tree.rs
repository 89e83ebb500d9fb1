//! CART tree growth on a (possibly bootstrapped) sample of rows.

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Only splits that lower the weighted impurity by more than this are kept.
pub(crate) const MIN_GAIN: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitCriterion {
    #[default]
    Gini,
    /// Shannon entropy in bits, i.e. information-gain splitting.
    Entropy,
}

impl SplitCriterion {
    pub fn impurity(self, counts: &[u64]) -> f64 {
        let n: u64 = counts.iter().sum();
        if n == 0 {
            return 0.0;
        }
        let n = n as f64;
        match self {
            SplitCriterion::Gini => {
                1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>()
            }
            SplitCriterion::Entropy => counts
                .iter()
                .filter(|&&c| c > 0)
                .map(|&c| {
                    let p = c as f64 / n;
                    -p * p.log2()
                })
                .sum(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        /// Rows (with bootstrap multiplicity) reaching this node.
        samples: u64,
        /// Parent impurity minus weighted child impurity.
        gain: f64,
    },
    Leaf {
        counts: Vec<u64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    /// Root is `nodes[0]`.
    pub nodes: Vec<Node>,
}

impl DecisionTree {
    /// Class counts of the leaf `x` falls into.
    pub fn leaf_counts(&self, x: &[f64]) -> &[u64] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    i = if x[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    }
                }
                Node::Leaf { counts } => return counts,
            }
        }
    }

    /// Normalized class distribution of the leaf `x` falls into.
    pub fn predict_proba(&self, x: &[f64]) -> Vec<f64> {
        let counts = self.leaf_counts(x);
        let n: u64 = counts.iter().sum();
        counts.iter().map(|&c| c as f64 / n as f64).collect()
    }

    pub fn internal_count(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Split { .. }))
            .count()
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.len() - self.internal_count()
    }

    pub fn depth(&self) -> usize {
        let mut best = 0;
        let mut stack = vec![(0usize, 0usize)];
        while let Some((i, d)) = stack.pop() {
            best = best.max(d);
            if let Node::Split { left, right, .. } = self.nodes[i] {
                stack.push((left, d + 1));
                stack.push((right, d + 1));
            }
        }
        best
    }
}

pub(crate) struct GrowParams {
    pub classes: usize,
    pub mtry: usize,
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    pub criterion: SplitCriterion,
}

struct Candidate {
    feature: usize,
    threshold: f64,
    gain: f64,
}

impl Candidate {
    /// Higher gain wins; equal gains go to the lower feature, then the lower threshold.
    fn beats(&self, other: &Candidate) -> bool {
        if self.gain != other.gain {
            return self.gain > other.gain;
        }
        (self.feature, self.threshold) < (other.feature, other.threshold)
    }
}

fn midpoint(a: f64, b: f64) -> f64 {
    let m = a / 2.0 + b / 2.0;
    // keeps a <= m < b even when a and b are adjacent floats
    if m >= b || m < a {
        a
    } else {
        m
    }
}

fn class_counts(rows: &[usize], y: &[usize], classes: usize) -> Vec<u64> {
    let mut c = vec![0u64; classes];
    for &r in rows {
        c[y[r]] += 1;
    }
    c
}

/// Grows one tree on `rows` (indices into `x`/`y`, repeats allowed).
pub(crate) fn grow_tree(
    x: &[Vec<f64>],
    y: &[usize],
    rows: Vec<usize>,
    p: &GrowParams,
    rng: &mut ChaCha8Rng,
) -> DecisionTree {
    let n_features = x.first().map_or(0, Vec::len);
    let mut nodes = Vec::new();
    let mut order: Vec<usize> = (0..n_features).collect();
    let mut scratch: Vec<(f64, usize)> = Vec::with_capacity(rows.len());

    nodes.push(Node::Leaf { counts: vec![] });
    let mut work = vec![(0usize, rows, 0usize)];
    while let Some((slot, rows, depth)) = work.pop() {
        let counts = class_counts(&rows, y, p.classes);
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        let capped = p.max_depth.is_some_and(|d| depth >= d);
        let split = if pure || capped || rows.len() < 2 * p.min_leaf {
            None
        } else {
            best_split(x, y, &rows, &counts, p, rng, &mut order, &mut scratch)
        };
        let Some(best) = split else {
            nodes[slot] = Node::Leaf { counts };
            continue;
        };
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
            .iter()
            .partition(|&&r| x[r][best.feature] <= best.threshold);
        let left = nodes.len();
        nodes.push(Node::Leaf { counts: vec![] });
        let right = nodes.len();
        nodes.push(Node::Leaf { counts: vec![] });
        nodes[slot] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
            samples: rows.len() as u64,
            gain: best.gain,
        };
        // right first so the left subtree is expanded first
        work.push((right, right_rows, depth + 1));
        work.push((left, left_rows, depth + 1));
    }
    DecisionTree { nodes }
}

/// Visits features in random order until `mtry` features that vary within
/// the node have been scored; constant features are skipped without using
/// up the budget.
#[allow(clippy::too_many_arguments)]
fn best_split(
    x: &[Vec<f64>],
    y: &[usize],
    rows: &[usize],
    parent_counts: &[u64],
    p: &GrowParams,
    rng: &mut ChaCha8Rng,
    order: &mut [usize],
    scratch: &mut Vec<(f64, usize)>,
) -> Option<Candidate> {
    let n = rows.len() as f64;
    let parent = p.criterion.impurity(parent_counts);
    order.shuffle(rng);
    let mut scored = 0;
    let mut best: Option<Candidate> = None;
    let mut left = vec![0u64; p.classes];
    let mut right = vec![0u64; p.classes];

    for &f in order.iter() {
        if scored == p.mtry {
            break;
        }
        scratch.clear();
        scratch.extend(rows.iter().map(|&r| (x[r][f], y[r])));
        scratch.sort_by(|a, b| a.0.total_cmp(&b.0));
        if scratch[0].0 == scratch[scratch.len() - 1].0 {
            continue;
        }
        scored += 1;
        left.iter_mut().for_each(|c| *c = 0);
        right.copy_from_slice(parent_counts);
        for i in 0..scratch.len() - 1 {
            let (v, label) = scratch[i];
            left[label] += 1;
            right[label] -= 1;
            let next = scratch[i + 1].0;
            if v == next {
                continue;
            }
            let nl = i + 1;
            let nr = scratch.len() - nl;
            if nl < p.min_leaf || nr < p.min_leaf {
                continue;
            }
            let child = (nl as f64 * p.criterion.impurity(&left)
                + nr as f64 * p.criterion.impurity(&right))
                / n;
            let cand = Candidate {
                feature: f,
                threshold: midpoint(v, next),
                gain: parent - child,
            };
            if best.as_ref().is_none_or(|b| cand.beats(b)) {
                best = Some(cand);
            }
        }
    }
    best.filter(|b| b.gain > MIN_GAIN)
}
