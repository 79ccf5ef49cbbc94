use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::encode::FeatureEncoder;
use super::tree::{check_params, grow_tree, Mtry, TreeNodes};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    #[serde(default = "default_n_trees")]
    pub n_trees: usize,
    #[serde(default = "default_mtry")]
    pub mtry: Mtry,
    #[serde(default)]
    pub max_depth: Option<usize>,
    #[serde(default = "default_min_leaf")]
    pub min_leaf: usize,
    #[serde(default = "default_bootstrap")]
    pub bootstrap: bool,
    #[serde(default)]
    pub seed: u64,
}

fn default_n_trees() -> usize {
    100
}
fn default_mtry() -> Mtry {
    Mtry::THIRD
}
fn default_min_leaf() -> usize {
    1
}
fn default_bootstrap() -> bool {
    true
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: default_n_trees(),
            mtry: default_mtry(),
            max_depth: None,
            min_leaf: default_min_leaf(),
            bootstrap: true,
            seed: 0,
        }
    }
}

/// Bagged ensemble of regression trees; tree `i` draws from stream `(seed, i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub params: ForestParams,
    pub encoder: FeatureEncoder,
    pub trees: Vec<TreeNodes>,
}

impl RandomForest {
    pub fn fit(ds: &Dataset, features: &[String], params: ForestParams) -> Result<Self> {
        check_params(ds.n_rows(), features, params.min_leaf)?;
        if params.n_trees == 0 {
            return Err(Error::invalid("a forest needs at least one tree"));
        }
        let encoder = FeatureEncoder::learn(ds, features)?;
        let x = encoder.encode(ds)?;
        let y = ds.response();
        let n = ds.n_rows();
        let mtry = params.mtry.resolve(x.cols);
        let trees = (0..params.n_trees)
            .into_par_iter()
            .map(|i| {
                let mut stream = rng::stream(params.seed, i as u64);
                let rows: Vec<usize> = if params.bootstrap {
                    (0..n).map(|_| stream.gen_range(0..n)).collect()
                } else {
                    (0..n).collect()
                };
                grow_tree(&x, y, rows, params.max_depth, params.min_leaf, mtry, stream)
            })
            .collect();
        Ok(RandomForest {
            params,
            encoder,
            trees,
        })
    }

    pub fn predict(&self, ds: &Dataset) -> Result<Vec<f64>> {
        let x = self.encoder.encode(ds)?;
        let k = self.trees.len() as f64;
        Ok((0..x.rows)
            .into_par_iter()
            .map(|i| {
                let row = x.row(i);
                self.trees.iter().map(|t| t.predict_row(row)).sum::<f64>() / k
            })
            .collect())
    }
}

pub fn fit_forest(ds: &Dataset, features: &[String], params: ForestParams) -> Result<RandomForest> {
    RandomForest::fit(ds, features, params)
}
