use std::str::FromStr;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{metrics, Dataset};
use crate::error::{Error, Result};
use crate::models::Predict;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImportanceMetric {
    Rmse,
    R2,
}

impl ImportanceMetric {
    fn score(self, y: &[f64], yhat: &[f64]) -> Result<f64> {
        match self {
            ImportanceMetric::Rmse => metrics::rmse(y, yhat),
            ImportanceMetric::R2 => metrics::r_squared(y, yhat),
        }
    }

    /// Loss of accuracy, positive when permuting hurts.
    fn loss(self, baseline: f64, permuted: f64) -> f64 {
        match self {
            ImportanceMetric::Rmse => permuted - baseline,
            ImportanceMetric::R2 => baseline - permuted,
        }
    }
}

impl FromStr for ImportanceMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rmse" => Ok(ImportanceMetric::Rmse),
            "r2" | "r²" => Ok(ImportanceMetric::R2),
            other => Err(Error::invalid(format!(
                "unknown metric `{other}` (expected rmse or r2)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureImportance {
    pub name: String,
    pub baseline: f64,
    pub permuted_mean: f64,
    /// Sample sd over repeats; 0 for a single repeat.
    pub permuted_sd: f64,
    pub importance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceReport {
    pub metric: ImportanceMetric,
    pub n_repeats: usize,
    pub seed: u64,
    /// Dataset feature order.
    pub features: Vec<FeatureImportance>,
}

impl ImportanceReport {
    /// Features by decreasing importance; ties keep dataset order.
    pub fn ranked(&self) -> Vec<&FeatureImportance> {
        let mut v: Vec<&FeatureImportance> = self.features.iter().collect();
        v.sort_by(|a, b| b.importance.total_cmp(&a.importance));
        v
    }

    pub fn top_k(&self, k: usize) -> Vec<String> {
        self.ranked()
            .into_iter()
            .take(k)
            .map(|f| f.name.clone())
            .collect()
    }

    pub fn get(&self, name: &str) -> Option<&FeatureImportance> {
        self.features.iter().find(|f| f.name == name)
    }
}

/// Shuffles each dataset feature in turn, `n_repeats` times, with feature
/// `j` drawing from stream `(seed, j)`.
pub fn permutation_importance(
    model: &dyn Predict,
    ds: &Dataset,
    metric: ImportanceMetric,
    n_repeats: usize,
    seed: u64,
) -> Result<ImportanceReport> {
    if n_repeats == 0 {
        return Err(Error::invalid("n_repeats must be at least 1"));
    }
    for f in model.features() {
        ds.schema().require_feature(&f)?;
    }
    let y = ds.response();
    let baseline = metric.score(y, &model.predict(ds)?)?;
    let names = ds.feature_names();
    let features = names
        .par_iter()
        .enumerate()
        .map(|(j, name)| -> Result<FeatureImportance> {
            let mut stream = rng::stream(seed, j as u64);
            let column = ds.column(name)?;
            let mut perm: Vec<usize> = (0..ds.n_rows()).collect();
            let mut scores = Vec::with_capacity(n_repeats);
            for _ in 0..n_repeats {
                perm.shuffle(&mut stream);
                let shuffled = ds.replace_column(name, column.gather(&perm))?;
                scores.push(metric.score(y, &model.predict(&shuffled)?)?);
            }
            let permuted_mean = metrics::mean(&scores);
            let permuted_sd = if n_repeats > 1 {
                let ss: f64 = scores.iter().map(|s| (s - permuted_mean).powi(2)).sum();
                (ss / (n_repeats - 1) as f64).sqrt()
            } else {
                0.0
            };
            Ok(FeatureImportance {
                name: name.clone(),
                baseline,
                permuted_mean,
                permuted_sd,
                importance: metric.loss(baseline, permuted_mean),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ImportanceReport {
        metric,
        n_repeats,
        seed,
        features,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Column, FeatureSchema, Schema};
    use crate::models::{fit_forest, fit_tree, ForestParams, Mtry, TreeParams};
    use rand::Rng;

    fn frame(n: usize, seed: u64, duplicate: bool) -> Dataset {
        let mut r = rng::seeded(seed);
        let a: Vec<f64> = (0..n).map(|_| r.gen()).collect();
        let noise: Vec<f64> = (0..n).map(|_| r.gen()).collect();
        let y: Vec<f64> = a.iter().map(|v| 4.0 * v + 0.05 * r.gen::<f64>()).collect();
        let mut schema = vec![FeatureSchema::numeric("a"), FeatureSchema::numeric("noise")];
        let mut cols = vec![Column::Numeric(a.clone()), Column::Numeric(noise)];
        if duplicate {
            schema.push(FeatureSchema::numeric("a_copy"));
            cols.push(Column::Numeric(a));
        }
        schema.push(FeatureSchema::response("y"));
        cols.push(Column::Numeric(y));
        Dataset::new(Schema::new(schema).unwrap(), cols, "imp").unwrap()
    }

    #[test]
    fn unused_features_score_exactly_zero() {
        let ds = frame(80, 1, false);
        let stump = fit_tree(
            &ds,
            &["a".into(), "noise".into()],
            TreeParams {
                max_depth: Some(1),
                ..Default::default()
            },
        )
        .unwrap();
        assert!(stump.tree.split_features().iter().all(|&f| f == 0));
        let rep = permutation_importance(&stump, &ds, ImportanceMetric::Rmse, 5, 3).unwrap();
        assert_eq!(rep.get("noise").unwrap().importance, 0.0);
        assert!(rep.get("a").unwrap().importance > 0.0);

        let only_a = fit_tree(&ds, &["a".into()], TreeParams::default()).unwrap();
        let rep = permutation_importance(&only_a, &ds, ImportanceMetric::R2, 3, 3).unwrap();
        assert_eq!(rep.get("noise").unwrap().importance, 0.0);
        assert_eq!(rep.top_k(1), vec!["a".to_string()]);
    }

    #[test]
    fn duplicated_signal_splits_importance() {
        let params = ForestParams {
            n_trees: 40,
            mtry: Mtry::Count(1),
            seed: 5,
            ..Default::default()
        };
        let single = frame(150, 2, false);
        let f1 = fit_forest(&single, &["a".into(), "noise".into()], params).unwrap();
        let before = permutation_importance(&f1, &single, ImportanceMetric::Rmse, 10, 1).unwrap();
        let dup = frame(150, 2, true);
        let f2 = fit_forest(&dup, &["a".into(), "noise".into(), "a_copy".into()], params).unwrap();
        let after = permutation_importance(&f2, &dup, ImportanceMetric::Rmse, 10, 1).unwrap();
        let single_imp = before.get("a").unwrap().importance;
        for name in ["a", "a_copy"] {
            assert!(after.get(name).unwrap().importance < single_imp, "{name}");
        }
    }

    #[test]
    fn metric_names_and_repeat_validation() {
        assert_eq!(
            "r2".parse::<ImportanceMetric>().unwrap(),
            ImportanceMetric::R2
        );
        assert!("mae".parse::<ImportanceMetric>().is_err());
        let ds = frame(20, 0, false);
        let t = fit_tree(&ds, &["a".into()], TreeParams::default()).unwrap();
        assert!(permutation_importance(&t, &ds, ImportanceMetric::Rmse, 0, 0).is_err());
    }
}
