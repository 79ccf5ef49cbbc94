use itertools::Itertools;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::FitMetrics;
use crate::data::{metrics, train_test_indices, Dataset};
use crate::error::{Error, Result};
use crate::explain::{
    background_sample, explanation_consistency, shapley_summary, ConsistencyReport, ShapleyMode,
    ShapleySummary, DEFAULT_BACKGROUND,
};
use crate::models::{Family, Predict};
use crate::rng;

pub const DEFAULT_SUBSET_CAP: usize = 5_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnderspecConfig {
    pub anchors: Vec<String>,
    pub candidates: Vec<String>,
    /// Total features per subset, anchors included.
    pub m: usize,
    pub epsilon: f64,
    /// Margin by which a subset must beat every permutation null (and the
    /// anchors-only model) to count as meeting the evaluation criterion.
    #[serde(default = "default_min_gain")]
    pub min_gain: f64,
    pub family: Family,
    #[serde(default = "default_split")]
    pub split_fraction: f64,
    pub seed: u64,
    #[serde(default = "default_cap")]
    pub cap: usize,
    /// Shapley summaries are attached to at most this many top-class subsets.
    #[serde(default = "default_explained")]
    pub max_explained: usize,
    #[serde(default = "default_shapley_samples")]
    pub shapley_samples: usize,
}

fn default_min_gain() -> f64 {
    0.05
}
fn default_split() -> f64 {
    0.7
}
fn default_cap() -> usize {
    DEFAULT_SUBSET_CAP
}
fn default_explained() -> usize {
    6
}
fn default_shapley_samples() -> usize {
    256
}

impl UnderspecConfig {
    pub fn new(
        anchors: &[&str],
        candidates: &[&str],
        m: usize,
        epsilon: f64,
        family: Family,
        seed: u64,
    ) -> Self {
        UnderspecConfig {
            anchors: anchors.iter().map(|s| s.to_string()).collect(),
            candidates: candidates.iter().map(|s| s.to_string()).collect(),
            m,
            epsilon,
            min_gain: default_min_gain(),
            family,
            split_fraction: default_split(),
            seed,
            cap: default_cap(),
            max_explained: default_explained(),
            shapley_samples: default_shapley_samples(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetResult {
    pub features: Vec<String>,
    pub train: FitMetrics,
    pub test: FitMetrics,
    /// Same subset refit with the candidate columns row-permuted.
    pub null_test: FitMetrics,
    /// Test R² reaches the report's eligibility threshold.
    pub eligible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetExplanation {
    pub subset: usize,
    pub summary: ShapleySummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairConsistency {
    pub a: usize,
    pub b: usize,
    /// Features both subsets share; the comparison is restricted to them.
    pub common: Vec<String>,
    pub report: ConsistencyReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnderspecReport {
    pub config: UnderspecConfig,
    /// Test metrics of the anchors-only model (train mean when there are no anchors).
    pub anchors_only: FitMetrics,
    /// Best null (or anchors-only) test R² plus `min_gain`.
    pub eligibility_threshold: f64,
    /// Enumeration order: lexicographic over candidate positions.
    pub subsets: Vec<SubsetResult>,
    /// Indices into `subsets`. Each class holds a leader and every remaining
    /// subset within `epsilon` test R² below it, so members differ pairwise
    /// by at most `epsilon`. Classes are ordered by leader.
    pub classes: Vec<Vec<usize>>,
    /// Eligible members of the first class.
    pub near_equivalent: Vec<usize>,
    pub explanations: Vec<SubsetExplanation>,
    pub consistency: Vec<PairConsistency>,
    pub underspecified: bool,
}

/// Groups subsets greedily by descending test R²; ties keep enumeration order.
pub fn near_equivalence_classes(r2: &[f64], epsilon: f64) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..r2.len()).collect();
    order.sort_by(|&a, &b| r2[b].total_cmp(&r2[a]));
    let mut classes = Vec::new();
    let mut start = 0;
    while start < order.len() {
        let leader = r2[order[start]];
        let end = start
            + order[start..]
                .iter()
                .take_while(|&&i| leader - r2[i] <= epsilon)
                .count();
        classes.push(order[start..end].to_vec());
        start = end;
    }
    classes
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

fn restrict(summary: &ShapleySummary, common: &[String]) -> ShapleySummary {
    ShapleySummary {
        features: summary
            .features
            .iter()
            .filter(|f| common.contains(&f.name))
            .cloned()
            .collect(),
        ..summary.clone()
    }
}

/// Fits every anchor-containing subset of size `m` on one shared split and
/// flags underspecification when the best near-equivalence class holds at
/// least two subsets whose candidates carry real signal. A subset qualifies
/// when its test R² exceeds, by `min_gain`, the best test R² reached by any
/// subset refit on row-permuted candidate columns. Taking the maximum over
/// all nulls offsets the selection of the top class on the same test rows.
pub fn underspec_search(ds: &Dataset, config: &UnderspecConfig) -> Result<UnderspecReport> {
    let anchors = &config.anchors;
    if config.m < anchors.len() {
        return Err(Error::invalid(format!(
            "m = {} is smaller than the {} anchors",
            config.m,
            anchors.len()
        )));
    }
    if config.m == 0 {
        return Err(Error::invalid("m must be at least 1"));
    }
    if !(config.epsilon >= 0.0) || !(config.min_gain >= 0.0) {
        return Err(Error::invalid("epsilon and min_gain must be non-negative"));
    }
    for f in anchors.iter().chain(&config.candidates) {
        ds.schema().require_feature(f)?;
    }
    if let Some(f) = config.candidates.iter().find(|c| anchors.contains(c)) {
        return Err(Error::invalid(format!(
            "`{f}` is both an anchor and a candidate"
        )));
    }
    if config.candidates.iter().duplicates().next().is_some()
        || anchors.iter().duplicates().next().is_some()
    {
        return Err(Error::invalid("anchors and candidates must not repeat"));
    }
    let extra = config.m - anchors.len();
    let count = binomial(config.candidates.len(), extra);
    if count > config.cap as u128 {
        return Err(Error::SubsetCapExceeded {
            count,
            cap: config.cap,
        });
    }
    if count == 0 {
        return Err(Error::invalid(format!(
            "cannot choose {extra} of {} candidates",
            config.candidates.len()
        )));
    }

    let family = config.family.clone().with_seed(config.seed);
    let (train_rows, test_rows) =
        train_test_indices(ds.n_rows(), config.split_fraction, config.seed)?;
    let train = ds.select_rows(&train_rows)?;
    let test = ds.select_rows(&test_rows)?;
    let response = ds.schema().response_name();

    let fit = |features: &[String], train: &Dataset| -> Result<(FitMetrics, FitMetrics)> {
        let model = family.spec(response, features)?.fit(train)?;
        Ok((
            FitMetrics::compute(train.response(), &model.predict(train)?)?,
            FitMetrics::compute(test.response(), &model.predict(&test)?)?,
        ))
    };
    let anchors_only = if anchors.is_empty() {
        let mean = metrics::mean(train.response());
        FitMetrics::compute(test.response(), &vec![mean; test.n_rows()])?
    } else {
        fit(anchors, &train)?.1
    };

    let feature_sets: Vec<Vec<String>> = config
        .candidates
        .iter()
        .combinations(extra)
        .map(|chosen| anchors.iter().chain(chosen).cloned().collect())
        .collect();
    let subsets = feature_sets
        .into_par_iter()
        .enumerate()
        .map(|(i, features)| {
            let (train_m, test_m) = fit(&features, &train)?;
            // candidate block shuffled jointly: keeps its own structure, drops any link to y
            let mut perm: Vec<usize> = (0..train.n_rows()).collect();
            perm.shuffle(&mut rng::stream(config.seed, i as u64));
            let mut null_train = train.clone();
            for f in &features[anchors.len()..] {
                null_train = null_train.replace_column(f, train.column(f)?.gather(&perm))?;
            }
            let (_, null_m) = fit(&features, &null_train)?;
            Ok(SubsetResult {
                eligible: false,
                features,
                train: train_m,
                test: test_m,
                null_test: null_m,
            })
        })
        .collect::<Result<Vec<SubsetResult>>>()?;
    let mut subsets = subsets;
    let eligibility_threshold = subsets
        .iter()
        .map(|s| s.null_test.r2)
        .fold(anchors_only.r2, f64::max)
        + config.min_gain;
    for s in &mut subsets {
        s.eligible = s.test.r2 >= eligibility_threshold;
    }

    let r2: Vec<f64> = subsets.iter().map(|s| s.test.r2).collect();
    let classes = near_equivalence_classes(&r2, config.epsilon);
    let near_equivalent: Vec<usize> = classes[0]
        .iter()
        .copied()
        .filter(|&i| subsets[i].eligible)
        .collect();

    let background = background_sample(&train, DEFAULT_BACKGROUND, config.seed)?;
    let explanations = near_equivalent
        .iter()
        .take(config.max_explained)
        .map(|&i| -> Result<SubsetExplanation> {
            let features = &subsets[i].features;
            let model = family.spec(response, features)?.fit(&train)?;
            let mode = ShapleyMode::auto(features.len(), config.shapley_samples, config.seed);
            Ok(SubsetExplanation {
                subset: i,
                summary: shapley_summary(&model, &test, &background, mode)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut consistency = Vec::new();
    for [x, y] in explanations.iter().array_combinations() {
        let common: Vec<String> = subsets[x.subset]
            .features
            .iter()
            .filter(|f| subsets[y.subset].features.contains(f))
            .cloned()
            .collect();
        if common.is_empty() {
            continue;
        }
        consistency.push(PairConsistency {
            a: x.subset,
            b: y.subset,
            report: explanation_consistency(
                &restrict(&x.summary, &common),
                &restrict(&y.summary, &common),
            )?,
            common,
        });
    }

    Ok(UnderspecReport {
        config: config.clone(),
        anchors_only,
        eligibility_threshold,
        underspecified: near_equivalent.len() >= 2,
        subsets,
        classes,
        near_equivalent,
        explanations,
        consistency,
    })
}
