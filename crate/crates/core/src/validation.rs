//! Traditional k-fold and grouped (leave-one-combination-out)
//! cross-validation, and the contrast between the two.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{group_rows, metrics, Dataset, GroupKey, SplitIndices};
use crate::error::{Error, Result};
use crate::models::{tune, Learner, ModelSpec, Predict, Search, SearchSpace};
use crate::rng;

/// Grouped plans with more combinations than this are merged into this many folds.
pub const DEFAULT_GROUP_CAP: usize = 50;

/// Seeded k-fold split; the first `n mod k` folds hold one extra row.
pub fn kfold_split(n: usize, k: usize, seed: u64) -> Result<SplitIndices> {
    if k < 2 || k > n {
        return Err(Error::invalid(format!(
            "k = {k} must satisfy 2 <= k <= n = {n}"
        )));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng::seeded(seed));
    let (base, extra) = (n / k, n % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        let mut fold = perm[start..start + size].to_vec();
        fold.sort_unstable();
        folds.push(fold);
        start += size;
    }
    Ok(SplitIndices {
        folds,
        seed: Some(seed),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "lowercase")]
pub enum FoldLabel {
    Index(usize),
    Group(GroupKey),
    /// Several combinations sharing a fold after capping.
    Merged(Vec<GroupKey>),
}

impl std::fmt::Display for FoldLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FoldLabel::Index(i) => write!(f, "fold {i}"),
            FoldLabel::Group(k) => write!(f, "{k}"),
            FoldLabel::Merged(keys) => write!(f, "{} merged groups", keys.len()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupedSplit {
    pub split: SplitIndices,
    pub labels: Vec<FoldLabel>,
}

/// One fold per unique combination of `features`.
pub fn grouped_split(ds: &Dataset, features: &[String]) -> Result<GroupedSplit> {
    grouped_split_capped(ds, features, DEFAULT_GROUP_CAP, 0)
}

/// Like [`grouped_split`], but when there are more than `cap` combinations
/// whole groups are dealt into `cap` folds: groups are shuffled with
/// `seed`, ordered by size (largest first) and each placed in the currently
/// smallest fold. No group ever straddles two folds.
pub fn grouped_split_capped(
    ds: &Dataset,
    features: &[String],
    cap: usize,
    seed: u64,
) -> Result<GroupedSplit> {
    let groups = group_rows(ds, features)?;
    if groups.len() < 2 {
        return Err(Error::invalid(format!(
            "grouped cross-validation needs at least two combinations of {features:?}, found {}",
            groups.len()
        )));
    }
    if cap < 2 {
        return Err(Error::invalid("group cap must be at least 2"));
    }
    if groups.len() <= cap {
        let (labels, folds) = groups
            .into_iter()
            .map(|(k, rows)| (FoldLabel::Group(k), rows))
            .unzip();
        return Ok(GroupedSplit {
            split: SplitIndices { folds, seed: None },
            labels,
        });
    }

    let mut order: Vec<usize> = (0..groups.len()).collect();
    order.shuffle(&mut rng::seeded(seed));
    order.sort_by_key(|&g| std::cmp::Reverse(groups[g].1.len()));
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); cap];
    let mut sizes = vec![0usize; cap];
    for g in order {
        let target = (0..cap).min_by_key(|&f| (sizes[f], f)).expect("cap >= 2");
        sizes[target] += groups[g].1.len();
        members[target].push(g);
    }
    let mut folds = Vec::with_capacity(cap);
    let mut labels = Vec::with_capacity(cap);
    for mut m in members {
        m.sort_unstable();
        let mut rows: Vec<usize> = m
            .iter()
            .flat_map(|&g| groups[g].1.iter().copied())
            .collect();
        rows.sort_unstable();
        folds.push(rows);
        labels.push(FoldLabel::Merged(
            m.iter().map(|&g| groups[g].0.clone()).collect(),
        ));
    }
    Ok(GroupedSplit {
        split: SplitIndices {
            folds,
            seed: Some(seed),
        },
        labels,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CvPlan {
    RandomKfold {
        k: usize,
        seed: u64,
    },
    Grouped {
        features: Vec<String>,
        #[serde(default = "default_cap")]
        cap: usize,
        #[serde(default)]
        seed: u64,
    },
}

fn default_cap() -> usize {
    DEFAULT_GROUP_CAP
}

impl CvPlan {
    pub fn kfold(k: usize, seed: u64) -> Self {
        CvPlan::RandomKfold { k, seed }
    }

    pub fn grouped(features: &[String]) -> Self {
        CvPlan::Grouped {
            features: features.to_vec(),
            cap: DEFAULT_GROUP_CAP,
            seed: 0,
        }
    }

    pub fn folds(&self, ds: &Dataset) -> Result<GroupedSplit> {
        match self {
            CvPlan::RandomKfold { k, seed } => {
                let split = kfold_split(ds.n_rows(), *k, *seed)?;
                let labels = (0..split.folds.len()).map(FoldLabel::Index).collect();
                Ok(GroupedSplit { split, labels })
            }
            CvPlan::Grouped {
                features,
                cap,
                seed,
            } => grouped_split_capped(ds, features, *cap, *seed),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub rmse: f64,
    pub median_abs_error: f64,
    /// Absent when the held-out response is constant or a single row.
    pub r2: Option<f64>,
}

impl Metrics {
    pub fn compute(y: &[f64], yhat: &[f64]) -> Result<Self> {
        Ok(Metrics {
            rmse: metrics::rmse(y, yhat)?,
            median_abs_error: metrics::median_abs_error(y, yhat)?,
            r2: metrics::r_squared(y, yhat).ok(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub label: FoldLabel,
    pub n: usize,
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OofPrediction {
    pub row: usize,
    pub y: f64,
    pub yhat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub model_id: String,
    pub plan: CvPlan,
    pub folds: Vec<FoldResult>,
    /// Over all out-of-fold predictions at once.
    pub pooled: Metrics,
    /// Ordered by row.
    pub predictions: Vec<OofPrediction>,
}

impl CvResult {
    pub fn recompute_pooled(&self) -> Result<Metrics> {
        let y: Vec<f64> = self.predictions.iter().map(|p| p.y).collect();
        let yhat: Vec<f64> = self.predictions.iter().map(|p| p.yhat).collect();
        Metrics::compute(&y, &yhat)
    }
}

/// Refits the learner from scratch on every training complement.
pub fn cross_validate<L: Learner>(learner: &L, ds: &Dataset, plan: &CvPlan) -> Result<CvResult> {
    let GroupedSplit { split, labels } = plan.folds(ds)?;
    split.validate(ds.n_rows())?;
    let per_fold: Vec<Result<Vec<f64>>> = (0..split.folds.len())
        .into_par_iter()
        .map(|f| {
            let run = || -> Result<Vec<f64>> {
                let train = ds.select_rows(&split.complement(f))?;
                let test = ds.select_rows(&split.folds[f])?;
                learner.fit(&train)?.predict(&test)
            };
            run().map_err(|e| Error::Fold {
                fold: labels[f].to_string(),
                source: Box::new(e),
            })
        })
        .collect();

    let y = ds.response();
    let mut yhat = vec![f64::NAN; ds.n_rows()];
    let mut folds = Vec::with_capacity(split.folds.len());
    for ((rows, label), preds) in split.folds.iter().zip(labels).zip(per_fold) {
        let preds = preds?;
        let fold_y: Vec<f64> = rows.iter().map(|&r| y[r]).collect();
        for (&r, &p) in rows.iter().zip(&preds) {
            yhat[r] = p;
        }
        folds.push(FoldResult {
            label,
            n: rows.len(),
            metrics: Metrics::compute(&fold_y, &preds)?,
        });
    }
    let predictions: Vec<OofPrediction> = (0..ds.n_rows())
        .map(|row| OofPrediction {
            row,
            y: y[row],
            yhat: yhat[row],
        })
        .collect();
    Ok(CvResult {
        model_id: learner.id(),
        plan: plan.clone(),
        folds,
        pooled: Metrics::compute(y, &yhat)?,
        predictions,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupErrors {
    pub key: GroupKey,
    pub n: usize,
    pub traditional_abs_errors: Vec<f64>,
    pub adapted_abs_errors: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContrastReport {
    pub model_id: String,
    pub group_features: Vec<String>,
    pub traditional: CvResult,
    pub adapted: CvResult,
    /// Adapted over traditional pooled RMSE; `None` when traditional is 0
    /// and adapted is not.
    pub rmse_ratio: Option<f64>,
    pub mae_ratio: Option<f64>,
    /// One entry per unique combination, in combination order.
    pub groups: Vec<GroupErrors>,
}

fn ratio(adapted: f64, traditional: f64) -> Option<f64> {
    if traditional > 0.0 {
        Some(adapted / traditional)
    } else if adapted == 0.0 {
        Some(1.0)
    } else {
        None
    }
}

pub fn cv_contrast<L: Learner>(
    learner: &L,
    ds: &Dataset,
    group_features: &[String],
    k: usize,
    seed: u64,
) -> Result<ContrastReport> {
    cv_contrast_capped(learner, ds, group_features, k, seed, DEFAULT_GROUP_CAP)
}

pub fn cv_contrast_capped<L: Learner>(
    learner: &L,
    ds: &Dataset,
    group_features: &[String],
    k: usize,
    seed: u64,
    cap: usize,
) -> Result<ContrastReport> {
    let traditional = cross_validate(learner, ds, &CvPlan::kfold(k, seed))?;
    let adapted = cross_validate(
        learner,
        ds,
        &CvPlan::Grouped {
            features: group_features.to_vec(),
            cap,
            seed,
        },
    )?;
    let abs = |r: &CvResult, row: usize| (r.predictions[row].y - r.predictions[row].yhat).abs();
    let groups = group_rows(ds, group_features)?
        .into_iter()
        .map(|(key, rows)| GroupErrors {
            n: rows.len(),
            traditional_abs_errors: rows.iter().map(|&r| abs(&traditional, r)).collect(),
            adapted_abs_errors: rows.iter().map(|&r| abs(&adapted, r)).collect(),
            key,
        })
        .collect();
    Ok(ContrastReport {
        model_id: learner.id(),
        group_features: group_features.to_vec(),
        rmse_ratio: ratio(adapted.pooled.rmse, traditional.pooled.rmse),
        mae_ratio: ratio(
            adapted.pooled.median_abs_error,
            traditional.pooled.median_abs_error,
        ),
        traditional,
        adapted,
        groups,
    })
}

/// Tunes on whatever data it is given, then fits the winner. Used as the
/// learner inside cross-validation this gives nested tuning.
#[derive(Debug, Clone)]
pub struct TunedLearner {
    pub template: ModelSpec,
    pub space: SearchSpace,
    pub search: Search,
    pub folds: usize,
    pub seed: u64,
}

impl Learner for TunedLearner {
    type Model = crate::models::FittedModel;

    fn fit(&self, ds: &Dataset) -> Result<Self::Model> {
        let best = tune(
            &self.template,
            &self.space,
            self.search,
            ds,
            self.folds,
            self.seed,
        )?
        .best;
        best.fit(ds)
    }

    fn id(&self) -> String {
        format!("tuned({})", self.template.id())
    }
}
