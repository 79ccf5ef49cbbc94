use serde::{Deserialize, Serialize};

use super::{percent_change, FitMetrics};
use crate::data::{train_test_indices, Dataset};
use crate::error::{Error, Result};
use crate::explain::{permutation_importance, ImportanceMetric, ImportanceReport};
use crate::models::{Family, Predict};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OmissionConfig {
    pub physics: Vec<String>,
    pub omit: String,
    pub family: Family,
    #[serde(default = "default_split")]
    pub split_fraction: f64,
    #[serde(default = "default_k")]
    pub k: usize,
    pub seed: u64,
    /// Minimum excess of B's train-test R² gap over A's.
    #[serde(default = "default_margin")]
    pub overfit_margin: f64,
    /// Minimum relative test-RMSE improvement of C over B.
    #[serde(default = "default_compensation")]
    pub compensation_threshold: f64,
    #[serde(default = "default_repeats")]
    pub importance_repeats: usize,
}

fn default_split() -> f64 {
    0.7
}
fn default_k() -> usize {
    5
}
fn default_margin() -> f64 {
    0.10
}
fn default_compensation() -> f64 {
    0.05
}
fn default_repeats() -> usize {
    10
}

impl OmissionConfig {
    pub fn new(physics: &[&str], omit: &str, family: Family, seed: u64) -> Self {
        OmissionConfig {
            physics: physics.iter().map(|s| s.to_string()).collect(),
            omit: omit.into(),
            family,
            split_fraction: default_split(),
            k: default_k(),
            seed,
            overfit_margin: default_margin(),
            compensation_threshold: default_compensation(),
            importance_repeats: default_repeats(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantResult {
    pub name: String,
    pub features: Vec<String>,
    pub train: FitMetrics,
    pub test: FitMetrics,
    /// Test rows in split order, for predicted-vs-actual plots.
    pub test_actual: Vec<f64>,
    pub test_predicted: Vec<f64>,
}

impl VariantResult {
    /// Train R² minus test R².
    pub fn r2_gap(&self) -> f64 {
        self.train.r2 - self.test.r2
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Delta {
    pub test_r2_pct: f64,
    pub test_rmse_pct: f64,
}

impl Delta {
    fn between(from: &VariantResult, to: &VariantResult) -> Self {
        Delta {
            test_r2_pct: percent_change(from.test.r2, to.test.r2),
            test_rmse_pct: percent_change(from.test.rmse, to.test.rmse),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OmissionAuditReport {
    pub config: OmissionConfig,
    pub train_rows: Vec<usize>,
    pub test_rows: Vec<usize>,
    /// Physics features only.
    pub a: VariantResult,
    /// Every feature except the omitted one.
    pub b: VariantResult,
    /// Top-k features of B refit.
    pub c: VariantResult,
    pub b_vs_a: Delta,
    pub c_vs_a: Delta,
    pub c_vs_b: Delta,
    /// Permutation importance of B on its training rows.
    pub b_importance: ImportanceReport,
    pub gap_excess: f64,
    pub rmse_improvement_c_over_b: f64,
    pub overfit_signature: bool,
    pub compensation_failed: bool,
}

struct Split {
    train: Dataset,
    test: Dataset,
}

fn fit_variant(
    name: &str,
    family: &Family,
    features: Vec<String>,
    split: &Split,
) -> Result<(VariantResult, Box<dyn Predict>)> {
    let model = family
        .spec(split.train.schema().response_name(), &features)?
        .fit(&split.train)?;
    let train_hat = model.predict(&split.train)?;
    let test_hat = model.predict(&split.test)?;
    let result = VariantResult {
        name: name.into(),
        features,
        train: FitMetrics::compute(split.train.response(), &train_hat)?,
        test: FitMetrics::compute(split.test.response(), &test_hat)?,
        test_actual: split.test.response().to_vec(),
        test_predicted: test_hat,
    };
    Ok((result, Box::new(model)))
}

/// Fits the physics-only, all-but-omitted and top-k variants on one shared
/// split. Every stochastic step is driven by `config.seed`.
pub fn omission_audit(ds: &Dataset, config: &OmissionConfig) -> Result<OmissionAuditReport> {
    if !config.physics.contains(&config.omit) {
        return Err(Error::invalid(format!(
            "omitted feature `{}` is not a physics feature",
            config.omit
        )));
    }
    for f in &config.physics {
        ds.schema().require_feature(f)?;
    }
    let b_features: Vec<String> = ds
        .feature_names()
        .into_iter()
        .filter(|f| *f != config.omit)
        .collect();
    if config.k == 0 || config.k > b_features.len() {
        return Err(Error::invalid(format!(
            "k = {} must be between 1 and the {} features of variant B",
            config.k,
            b_features.len()
        )));
    }
    let family = config.family.clone().with_seed(config.seed);
    let (train_rows, test_rows) =
        train_test_indices(ds.n_rows(), config.split_fraction, config.seed)?;
    let split = Split {
        train: ds.select_rows(&train_rows)?,
        test: ds.select_rows(&test_rows)?,
    };

    let (a, b) = rayon::join(
        || fit_variant("A", &family, config.physics.clone(), &split),
        || fit_variant("B", &family, b_features.clone(), &split),
    );
    let (a, _) = a?;
    let (b, b_model) = b?;
    let b_importance = permutation_importance(
        b_model.as_ref(),
        &split.train,
        ImportanceMetric::Rmse,
        config.importance_repeats,
        config.seed,
    )?;
    let top: Vec<String> = b_importance
        .ranked()
        .into_iter()
        .filter(|f| f.name != config.omit)
        .take(config.k)
        .map(|f| f.name.clone())
        .collect();
    let c_features: Vec<String> = b_features
        .iter()
        .filter(|f| top.contains(f))
        .cloned()
        .collect();
    let (c, _) = fit_variant("C", &family, c_features, &split)?;

    let gap_excess = b.r2_gap() - a.r2_gap();
    let rmse_improvement_c_over_b = (b.test.rmse - c.test.rmse) / b.test.rmse;
    Ok(OmissionAuditReport {
        b_vs_a: Delta::between(&a, &b),
        c_vs_a: Delta::between(&a, &c),
        c_vs_b: Delta::between(&b, &c),
        overfit_signature: gap_excess >= config.overfit_margin,
        compensation_failed: rmse_improvement_c_over_b < config.compensation_threshold,
        gap_excess,
        rmse_improvement_c_over_b,
        config: config.clone(),
        train_rows,
        test_rows,
        a,
        b,
        c,
        b_importance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::ForestParams;
    use crate::synthgen::{gen_wall_dataset, WallGenSpec};

    fn small_rf() -> Family {
        Family::Rf {
            params: ForestParams {
                n_trees: 30,
                ..Default::default()
            },
        }
    }

    #[test]
    fn variants_share_rows_and_respect_omission() {
        let ds = gen_wall_dataset(&WallGenSpec::default()).unwrap();
        let cfg = OmissionConfig::new(&["lambda_b", "nu_max"], "nu_max", small_rf(), 4);
        let rep = omission_audit(&ds, &cfg).unwrap();
        assert_eq!(rep.train_rows.len() + rep.test_rows.len(), 164);
        for v in [&rep.a, &rep.b, &rep.c] {
            assert_eq!(v.test_actual.len(), rep.test_rows.len());
        }
        assert!(!rep.b.features.contains(&"nu_max".to_string()));
        assert!(!rep.c.features.contains(&"nu_max".to_string()));
        assert_eq!(rep.c.features.len(), 5);
        assert_eq!(rep.b_importance.features.len(), 11);
        assert_eq!(omission_audit(&ds, &cfg).unwrap(), rep);
    }

    #[test]
    fn invalid_configs() {
        let ds = gen_wall_dataset(&WallGenSpec::default()).unwrap();
        let cfg = OmissionConfig::new(&["lambda_b", "nu_max"], "s_db", small_rf(), 0);
        assert!(omission_audit(&ds, &cfg).is_err());
        let cfg = OmissionConfig {
            k: 11,
            ..OmissionConfig::new(&["lambda_b", "nu_max"], "nu_max", small_rf(), 0)
        };
        assert!(omission_audit(&ds, &cfg).is_err());
    }
}
