//! Model families behind one fit/predict contract.

mod encode;
mod forest;
mod linear;
mod svr;
mod tree;
mod tune;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::formula::{Formula, Transform};

pub use encode::{FeatureEncoder, Matrix};
pub use forest::{fit_forest, ForestParams, RandomForest};
pub use linear::{fit_ols, LinearModel, OlsFit};
pub use svr::{fit_svr, KernelSvr, Standardizer, SupportVector, SvrParams};
pub use tree::{fit_tree, Mtry, MtryRule, Node, RegressionTree, TreeNodes, TreeParams};
pub use tune::{tune, Search, SearchSpace, TuneResult, TuneTrial};

/// Anything that maps dataset rows to predictions on the response scale.
pub trait Predict: Send + Sync {
    fn predict(&self, ds: &Dataset) -> Result<Vec<f64>>;

    /// Dataset features the predictions may depend on.
    fn features(&self) -> Vec<String>;
}

/// Something that produces a fresh fitted model from training data.
pub trait Learner: Send + Sync {
    type Model: Predict;

    fn fit(&self, ds: &Dataset) -> Result<Self::Model>;

    fn id(&self) -> String;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum ModelSpec {
    Lm {
        formula: Formula,
    },
    Tree {
        features: Vec<String>,
        params: TreeParams,
    },
    Rf {
        features: Vec<String>,
        params: ForestParams,
    },
    Svr {
        features: Vec<String>,
        params: SvrParams,
    },
}

impl ModelSpec {
    pub fn family_name(&self) -> &'static str {
        match self {
            ModelSpec::Lm { .. } => "lm",
            ModelSpec::Tree { .. } => "tree",
            ModelSpec::Rf { .. } => "rf",
            ModelSpec::Svr { .. } => "svr",
        }
    }

    /// Feature names read by the model.
    pub fn features(&self) -> Vec<String> {
        match self {
            ModelSpec::Lm { formula } => formula.predictors(),
            ModelSpec::Tree { features, .. }
            | ModelSpec::Rf { features, .. }
            | ModelSpec::Svr { features, .. } => features.clone(),
        }
    }

    pub fn validate(&self, ds: &Dataset) -> Result<()> {
        let features = self.features();
        if features.is_empty() && !matches!(self, ModelSpec::Lm { .. }) {
            return Err(Error::invalid("empty feature list"));
        }
        for f in &features {
            ds.schema().require_feature(f)?;
        }
        Ok(())
    }

    pub fn fit(&self, ds: &Dataset) -> Result<FittedModel> {
        self.validate(ds)?;
        Ok(match self {
            ModelSpec::Lm { formula } => FittedModel::Linear(LinearModel::fit(formula, ds)?),
            ModelSpec::Tree { features, params } => {
                FittedModel::Tree(RegressionTree::fit(ds, features, *params)?)
            }
            ModelSpec::Rf { features, params } => {
                FittedModel::Forest(RandomForest::fit(ds, features, *params)?)
            }
            ModelSpec::Svr { features, params } => {
                FittedModel::Svr(KernelSvr::fit(ds, features, *params)?)
            }
        })
    }
}

impl Learner for ModelSpec {
    type Model = FittedModel;

    fn fit(&self, ds: &Dataset) -> Result<FittedModel> {
        ModelSpec::fit(self, ds)
    }

    fn id(&self) -> String {
        match self {
            ModelSpec::Lm { formula } => format!("lm[{formula}]"),
            ModelSpec::Tree { features, .. } => format!("tree[{}]", features.join(",")),
            ModelSpec::Rf { features, params } => {
                let mtry = match params.mtry {
                    Mtry::Count(k) => k.to_string(),
                    Mtry::Rule(MtryRule::All) => "all".into(),
                    Mtry::Rule(MtryRule::Third) => "third".into(),
                };
                format!("rf[mtry={mtry}; {}]", features.join(","))
            }
            ModelSpec::Svr { features, .. } => format!("svr[{}]", features.join(",")),
        }
    }
}

/// A model family with its hyperparameters but no feature set yet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum Family {
    Lm {
        #[serde(default)]
        log_response: bool,
    },
    Tree {
        #[serde(default)]
        params: TreeParams,
    },
    Rf {
        #[serde(default)]
        params: ForestParams,
    },
    Svr {
        #[serde(default)]
        params: SvrParams,
    },
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Lm { .. } => "lm",
            Family::Tree { .. } => "tree",
            Family::Rf { .. } => "rf",
            Family::Svr { .. } => "svr",
        }
    }

    /// Sets the model's own seed; families without randomness are unchanged.
    pub fn with_seed(mut self, seed: u64) -> Self {
        match &mut self {
            Family::Tree { params } => params.seed = seed,
            Family::Rf { params } => params.seed = seed,
            Family::Lm { .. } | Family::Svr { .. } => {}
        }
        self
    }

    /// Concrete spec over `features`; linear models get main effects only.
    pub fn spec(&self, response: &str, features: &[String]) -> Result<ModelSpec> {
        Ok(match self {
            Family::Lm { log_response } => ModelSpec::Lm {
                formula: Formula::new(
                    response,
                    if *log_response {
                        Transform::Log
                    } else {
                        Transform::Identity
                    },
                    features.to_vec(),
                    vec![],
                    true,
                )?,
            },
            Family::Tree { params } => ModelSpec::Tree {
                features: features.to_vec(),
                params: *params,
            },
            Family::Rf { params } => ModelSpec::Rf {
                features: features.to_vec(),
                params: *params,
            },
            Family::Svr { params } => ModelSpec::Svr {
                features: features.to_vec(),
                params: *params,
            },
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum FittedModel {
    #[serde(rename = "lm")]
    Linear(LinearModel),
    Tree(RegressionTree),
    #[serde(rename = "rf")]
    Forest(RandomForest),
    Svr(KernelSvr),
}

macro_rules! encoded_predict {
    ($($t:ty),*) => {$(
        impl Predict for $t {
            fn predict(&self, ds: &Dataset) -> Result<Vec<f64>> {
                <$t>::predict(self, ds)
            }

            fn features(&self) -> Vec<String> {
                self.encoder.feature_names()
            }
        }
    )*};
}

encoded_predict!(RegressionTree, RandomForest, KernelSvr);

impl Predict for LinearModel {
    fn predict(&self, ds: &Dataset) -> Result<Vec<f64>> {
        LinearModel::predict(self, ds)
    }

    fn features(&self) -> Vec<String> {
        self.formula().predictors()
    }
}

impl FittedModel {
    fn inner(&self) -> &dyn Predict {
        match self {
            FittedModel::Linear(m) => m,
            FittedModel::Tree(m) => m,
            FittedModel::Forest(m) => m,
            FittedModel::Svr(m) => m,
        }
    }
}

impl Predict for FittedModel {
    fn predict(&self, ds: &Dataset) -> Result<Vec<f64>> {
        self.inner().predict(ds)
    }

    fn features(&self) -> Vec<String> {
        self.inner().features()
    }
}

pub fn predict(model: &dyn Predict, ds: &Dataset) -> Result<Vec<f64>> {
    model.predict(ds)
}

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Versioned on-disk form of a fitted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub format_version: u32,
    pub response: String,
    pub model: FittedModel,
}

impl ModelDocument {
    pub fn new(response: impl Into<String>, model: FittedModel) -> Self {
        ModelDocument {
            format_version: MODEL_FORMAT_VERSION,
            response: response.into(),
            model,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDocument = serde_json::from_str(text)?;
        if doc.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::invalid(format!(
                "unsupported model format version {}",
                doc.format_version
            )));
        }
        Ok(doc)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Column, FeatureSchema, Schema};
    use crate::formula::parse_formula;

    fn frame() -> Dataset {
        let schema = Schema::new(vec![
            FeatureSchema::numeric("t"),
            FeatureSchema::categorical("bc"),
            FeatureSchema::response("y"),
        ])
        .unwrap();
        let t: Vec<f64> = (0..24).map(|i| (i % 6) as f64).collect();
        let bc: Vec<String> = (0..24)
            .map(|i| ["fixed", "pinned"][i % 2].to_string())
            .collect();
        let y: Vec<f64> = (0..24)
            .map(|i| 1.0 + t[i] * 2.0 + if i % 2 == 0 { 0.5 } else { 0.0 })
            .collect();
        Dataset::new(
            schema,
            vec![
                Column::Numeric(t),
                Column::Categorical(bc),
                Column::Numeric(y),
            ],
            "m",
        )
        .unwrap()
    }

    fn all_specs() -> Vec<ModelSpec> {
        let f = vec!["t".to_string(), "bc".to_string()];
        vec![
            ModelSpec::Lm {
                formula: parse_formula("log(y) ~ t + bc").unwrap(),
            },
            ModelSpec::Tree {
                features: f.clone(),
                params: TreeParams::default(),
            },
            ModelSpec::Rf {
                features: f.clone(),
                params: ForestParams {
                    n_trees: 5,
                    ..Default::default()
                },
            },
            ModelSpec::Svr {
                features: f,
                params: SvrParams::default(),
            },
        ]
    }

    #[test]
    fn serialized_models_reload_with_identical_predictions() {
        let ds = frame();
        for spec in all_specs() {
            let model = spec.fit(&ds).unwrap();
            let doc = ModelDocument::new("y", model.clone());
            let back = ModelDocument::from_json(&doc.to_json().unwrap()).unwrap();
            assert_eq!(
                back.model.predict(&ds).unwrap(),
                model.predict(&ds).unwrap(),
                "{}",
                spec.id()
            );
        }
    }

    #[test]
    fn unseen_level_is_an_error_for_every_family() {
        let ds = frame();
        let bad = ds
            .replace_column("bc", Column::Categorical(vec!["fixed-free".into(); 24]))
            .unwrap();
        for spec in all_specs() {
            let model = spec.fit(&ds).unwrap();
            assert!(
                matches!(model.predict(&bad), Err(Error::UnseenLevel { .. })),
                "{}",
                spec.id()
            );
        }
    }

    #[test]
    fn spec_validation() {
        let ds = frame();
        let spec = Family::Rf {
            params: ForestParams::default(),
        }
        .spec("y", &["nope".to_string()])
        .unwrap();
        assert!(matches!(spec.fit(&ds), Err(Error::UnknownFeature(_))));
        let doc = r#"{"format_version": 99, "response": "y", "model": {}}"#;
        assert!(ModelDocument::from_json(doc).is_err());
    }
}
