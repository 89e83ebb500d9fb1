use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    /// Ascending.
    pub train: Vec<usize>,
    /// Ascending.
    pub test: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub seed: u64,
    pub stratified: bool,
    pub folds: Vec<Fold>,
}

/// Splits `0..labels.len()` into `k` disjoint test folds.
///
/// Indices are shuffled with a seeded generator and dealt round-robin. With
/// stratification each class is shuffled and dealt in turn, continuing the
/// round-robin where the previous class stopped, so both fold sizes and
/// per-class counts differ by at most one.
pub fn kfold_split(labels: &[usize], k: usize, seed: u64, stratified: bool) -> Result<FoldPlan> {
    let n = labels.len();
    if k < 2 {
        return Err(Error::contract(format!("k must be at least 2, got {k}")));
    }
    if n < k {
        return Err(Error::contract(format!(
            "{n} samples cannot fill {k} folds"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tests: Vec<Vec<usize>> = vec![Vec::new(); k];
    if stratified {
        let classes = labels.iter().max().map_or(0, |m| m + 1);
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); classes];
        for (i, &l) in labels.iter().enumerate() {
            members[l].push(i);
        }
        for (c, m) in members.iter().enumerate() {
            if !m.is_empty() && m.len() < k {
                return Err(Error::contract(format!(
                    "class {c} has {} members, fewer than k = {k}",
                    m.len()
                )));
            }
        }
        let mut next = 0;
        for mut m in members {
            m.shuffle(&mut rng);
            for i in m {
                tests[next].push(i);
                next = (next + 1) % k;
            }
        }
    } else {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        for (pos, i) in order.into_iter().enumerate() {
            tests[pos % k].push(i);
        }
    }
    let folds = tests
        .into_iter()
        .map(|mut test| {
            test.sort_unstable();
            let mut in_test = vec![false; n];
            test.iter().for_each(|&i| in_test[i] = true);
            let train = (0..n).filter(|&i| !in_test[i]).collect();
            Fold { train, test }
        })
        .collect();
    Ok(FoldPlan {
        k,
        seed,
        stratified,
        folds,
    })
}
