//! Grid and random hyperparameter search scored by k-fold out-of-fold RMSE.

use std::cmp::Ordering;

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ForestParams, Learner, ModelSpec, Mtry, Predict, SvrParams, TreeParams};
use crate::data::{metrics, Dataset};
use crate::error::{Error, Result};
use crate::rng;
use crate::validation::kfold_split;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum SearchSpace {
    /// Linear models have no hyperparameters: a single-point space.
    Lm,
    Tree {
        max_depth: Vec<Option<usize>>,
        min_leaf: Vec<usize>,
        mtry: Vec<Mtry>,
    },
    Rf {
        n_trees: Vec<usize>,
        max_depth: Vec<Option<usize>>,
        min_leaf: Vec<usize>,
        mtry: Vec<Mtry>,
    },
    Svr {
        c: Vec<f64>,
        gamma: Vec<f64>,
        epsilon: Vec<f64>,
    },
}

impl SearchSpace {
    /// A modest default space for the family of `spec`.
    pub fn default_for(spec: &ModelSpec) -> SearchSpace {
        match spec {
            ModelSpec::Lm { .. } => SearchSpace::Lm,
            ModelSpec::Tree { .. } => SearchSpace::Tree {
                max_depth: vec![Some(4), Some(8), None],
                min_leaf: vec![1, 5, 10],
                mtry: vec![Mtry::ALL],
            },
            ModelSpec::Rf { .. } => SearchSpace::Rf {
                n_trees: vec![50, 100],
                max_depth: vec![Some(8), None],
                min_leaf: vec![1, 3, 5],
                mtry: vec![Mtry::THIRD, Mtry::ALL],
            },
            ModelSpec::Svr { params, .. } => SearchSpace::Svr {
                c: vec![0.1, 1.0, 10.0, 100.0],
                gamma: vec![0.01, 0.1, 1.0],
                epsilon: vec![params.epsilon],
            },
        }
    }

    /// Every grid point applied to the template, in row-major order.
    pub fn candidates(&self, template: &ModelSpec) -> Result<Vec<ModelSpec>> {
        let out: Vec<ModelSpec> = match (self, template) {
            (SearchSpace::Lm, ModelSpec::Lm { .. }) => vec![template.clone()],
            (
                SearchSpace::Tree {
                    max_depth,
                    min_leaf,
                    mtry,
                },
                ModelSpec::Tree { features, params },
            ) => {
                let mut v = Vec::new();
                for &d in max_depth {
                    for &l in min_leaf {
                        for &m in mtry {
                            v.push(ModelSpec::Tree {
                                features: features.clone(),
                                params: TreeParams {
                                    max_depth: d,
                                    min_leaf: l,
                                    mtry: m,
                                    ..*params
                                },
                            });
                        }
                    }
                }
                v
            }
            (
                SearchSpace::Rf {
                    n_trees,
                    max_depth,
                    min_leaf,
                    mtry,
                },
                ModelSpec::Rf { features, params },
            ) => {
                let mut v = Vec::new();
                for &t in n_trees {
                    for &d in max_depth {
                        for &l in min_leaf {
                            for &m in mtry {
                                v.push(ModelSpec::Rf {
                                    features: features.clone(),
                                    params: ForestParams {
                                        n_trees: t,
                                        max_depth: d,
                                        min_leaf: l,
                                        mtry: m,
                                        ..*params
                                    },
                                });
                            }
                        }
                    }
                }
                v
            }
            (SearchSpace::Svr { c, gamma, epsilon }, ModelSpec::Svr { features, params }) => {
                let mut v = Vec::new();
                for &ci in c {
                    for &g in gamma {
                        for &e in epsilon {
                            v.push(ModelSpec::Svr {
                                features: features.clone(),
                                params: SvrParams {
                                    c: ci,
                                    gamma: g,
                                    epsilon: e,
                                    ..*params
                                },
                            });
                        }
                    }
                }
                v
            }
            _ => {
                return Err(Error::invalid(format!(
                    "search space does not match model family `{}`",
                    template.family_name()
                )))
            }
        };
        if out.is_empty() {
            return Err(Error::EmptySearchSpace);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Search {
    Grid,
    Random { n_draws: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneTrial {
    pub spec: ModelSpec,
    pub fold_rmse: Vec<f64>,
    pub mean_rmse: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    pub best: ModelSpec,
    pub best_index: usize,
    pub folds: usize,
    pub seed: u64,
    pub trials: Vec<TuneTrial>,
}

/// Orders candidates by simplicity: fewer trees, then shallower, then smaller C.
fn complexity(spec: &ModelSpec) -> (usize, usize, f64) {
    let depth = |d: Option<usize>| d.unwrap_or(usize::MAX);
    match spec {
        ModelSpec::Lm { .. } => (0, 0, 0.0),
        ModelSpec::Tree { params, .. } => (0, depth(params.max_depth), 0.0),
        ModelSpec::Rf { params, .. } => (params.n_trees, depth(params.max_depth), 0.0),
        ModelSpec::Svr { params, .. } => (0, 0, params.c),
    }
}

fn evaluate(spec: &ModelSpec, ds: &Dataset, folds: &crate::data::SplitIndices) -> Result<Vec<f64>> {
    (0..folds.folds.len())
        .map(|f| {
            let train = ds.select_rows(&folds.complement(f))?;
            let test = ds.select_rows(&folds.folds[f])?;
            let model = Learner::fit(spec, &train)?;
            metrics::rmse(test.response(), &model.predict(&test)?)
        })
        .collect()
}

pub fn tune(
    template: &ModelSpec,
    space: &SearchSpace,
    search: Search,
    ds: &Dataset,
    folds: usize,
    seed: u64,
) -> Result<TuneResult> {
    if folds < 2 {
        return Err(Error::invalid("tuning needs at least two folds"));
    }
    let grid = space.candidates(template)?;
    let chosen: Vec<ModelSpec> = match search {
        Search::Grid => grid,
        Search::Random { n_draws: 0 } => return Err(Error::EmptySearchSpace),
        Search::Random { n_draws } => {
            let k = n_draws.min(grid.len());
            index::sample(&mut rng::stream(seed, 1), grid.len(), k)
                .into_iter()
                .map(|i| grid[i].clone())
                .collect()
        }
    };
    let split = kfold_split(ds.n_rows(), folds, seed)?;
    let trials: Vec<TuneTrial> = chosen
        .into_par_iter()
        .map(|spec| match evaluate(&spec, ds, &split) {
            Ok(fold_rmse) => TuneTrial {
                mean_rmse: Some(metrics::mean(&fold_rmse)),
                fold_rmse,
                spec,
                error: None,
            },
            Err(e) => TuneTrial {
                spec,
                fold_rmse: vec![],
                mean_rmse: None,
                error: Some(e.to_string()),
            },
        })
        .collect();

    let mut best: Option<usize> = None;
    for (i, t) in trials.iter().enumerate() {
        let Some(score) = t.mean_rmse else { continue };
        let better = match best {
            None => true,
            Some(b) => {
                let bs = trials[b].mean_rmse.expect("best has a score");
                match score.total_cmp(&bs) {
                    Ordering::Less => true,
                    Ordering::Greater => false,
                    Ordering::Equal => {
                        let (ci, cb) = (complexity(&t.spec), complexity(&trials[b].spec));
                        (ci.0, ci.1).cmp(&(cb.0, cb.1)).then(ci.2.total_cmp(&cb.2))
                            == Ordering::Less
                    }
                }
            }
        };
        if better {
            best = Some(i);
        }
    }
    let best_index = best.ok_or(Error::AllCandidatesFailed(trials.len()))?;
    Ok(TuneResult {
        best: trials[best_index].spec.clone(),
        best_index,
        folds,
        seed,
        trials,
    })
}
