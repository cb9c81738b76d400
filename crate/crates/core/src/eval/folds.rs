use std::collections::BTreeMap;
use std::fmt::Debug;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub k: usize,
    pub assignment: BTreeMap<String, usize>,
}

impl FoldAssignment {
    pub fn fold_of(&self, id: &str) -> Option<usize> {
        self.assignment.get(id).copied()
    }

    /// Held-out ids of `fold`, in id order.
    pub fn test_ids(&self, fold: usize) -> Vec<&str> {
        self.assignment
            .iter()
            .filter(|(_, &f)| f == fold)
            .map(|(id, _)| id.as_str())
            .collect()
    }

    pub fn train_ids(&self, fold: usize) -> Vec<&str> {
        self.assignment
            .iter()
            .filter(|(_, &f)| f != fold)
            .map(|(id, _)| id.as_str())
            .collect()
    }
}

/// Stratified k-fold split.
///
/// Ids of each class (in id order) are shuffled with a seeded ChaCha8 stream
/// and dealt round-robin; the dealing position carries over from one class
/// to the next so fold sizes also differ by at most one.
pub fn stratified_folds<L: Ord + Debug>(
    labels: &BTreeMap<String, L>,
    k: usize,
    seed: u64,
) -> Result<FoldAssignment> {
    if k < 2 {
        return Err(Error::Config(format!("k must be at least 2, got {k}")));
    }
    let mut by_class: BTreeMap<&L, Vec<&str>> = BTreeMap::new();
    for (id, label) in labels {
        by_class.entry(label).or_default().push(id);
    }
    for (label, ids) in &by_class {
        if ids.len() < k {
            return Err(Error::Config(format!(
                "class {label:?} has {} member(s), fewer than k={k}",
                ids.len()
            )));
        }
    }
    Ok(deal(by_class.into_values(), k, seed))
}

fn deal<'a>(classes: impl Iterator<Item = Vec<&'a str>>, k: usize, seed: u64) -> FoldAssignment {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment = BTreeMap::new();
    let mut next = 0usize;
    for mut ids in classes {
        ids.shuffle(&mut rng);
        for id in ids {
            assignment.insert(id.to_string(), next % k);
            next += 1;
        }
    }
    FoldAssignment { k, assignment }
}
