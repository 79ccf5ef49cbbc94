use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::dataset::Dataset;
use crate::error::{Error, Result};
use crate::rng;

/// A partition of row indices into test folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitIndices {
    pub folds: Vec<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl SplitIndices {
    /// Checks the partition laws against `n` rows: at least two folds, every
    /// fold nonempty, folds disjoint, union equal to `0..n`.
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.folds.len() < 2 {
            return Err(Error::invalid("a split needs at least two folds"));
        }
        let mut seen = vec![false; n];
        for (f, fold) in self.folds.iter().enumerate() {
            if fold.is_empty() {
                return Err(Error::invalid(format!("fold {f} is empty")));
            }
            for &r in fold {
                if r >= n {
                    return Err(Error::invalid(format!("fold {f} holds row {r} >= {n}")));
                }
                if std::mem::replace(&mut seen[r], true) {
                    return Err(Error::invalid(format!("row {r} appears in two folds")));
                }
            }
        }
        if let Some(r) = seen.iter().position(|s| !s) {
            return Err(Error::invalid(format!("row {r} is in no fold")));
        }
        Ok(())
    }

    /// Rows outside fold `f`.
    pub fn complement(&self, f: usize) -> Vec<usize> {
        let mut rows: Vec<usize> = self
            .folds
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != f)
            .flat_map(|(_, fold)| fold.iter().copied())
            .collect();
        rows.sort_unstable();
        rows
    }
}

/// Number of training rows: `round(fraction * n)`, halves rounded toward train.
pub fn train_size(n: usize, fraction: f64) -> usize {
    (fraction * n as f64).round() as usize
}

/// Seeded row partition into (train, test) index lists, each sorted ascending.
pub fn train_test_indices(
    n: usize,
    train_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::invalid(format!(
            "train fraction {train_fraction} outside (0, 1)"
        )));
    }
    let n_train = train_size(n, train_fraction);
    if n_train == 0 || n_train >= n {
        return Err(Error::invalid(format!(
            "fraction {train_fraction} of {n} rows leaves an empty side"
        )));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng::seeded(seed));
    let mut train = perm[..n_train].to_vec();
    let mut test = perm[n_train..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

pub fn train_test_split(
    ds: &Dataset,
    train_fraction: f64,
    seed: u64,
) -> Result<(Dataset, Dataset)> {
    let (train, test) = train_test_indices(ds.n_rows(), train_fraction, seed)?;
    Ok((ds.select_rows(&train)?, ds.select_rows(&test)?))
}
