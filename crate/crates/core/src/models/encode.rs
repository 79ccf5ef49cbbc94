use serde::{Deserialize, Serialize};

use crate::data::{Column, Dataset};
use crate::error::{Error, Result};

/// Dense row-major matrix of encoded features.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum EncodedFeature {
    Numeric {
        name: String,
    },
    /// One indicator column per level, levels sorted.
    Categorical {
        name: String,
        levels: Vec<String>,
    },
}

/// Maps dataset features onto numeric columns; categoricals become full
/// one-hot blocks (no reference level is dropped).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureEncoder {
    features: Vec<EncodedFeature>,
}

impl FeatureEncoder {
    pub fn learn(ds: &Dataset, features: &[String]) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::invalid("empty feature list"));
        }
        let mut seen = std::collections::HashSet::new();
        let features = features
            .iter()
            .map(|name| {
                if !seen.insert(name) {
                    return Err(Error::invalid(format!("feature `{name}` listed twice")));
                }
                ds.schema().require_feature(name)?;
                Ok(match ds.column(name)? {
                    Column::Numeric(_) => EncodedFeature::Numeric { name: name.clone() },
                    Column::Categorical(v) => {
                        let mut levels = v.clone();
                        levels.sort();
                        levels.dedup();
                        EncodedFeature::Categorical {
                            name: name.clone(),
                            levels,
                        }
                    }
                })
            })
            .collect::<Result<_>>()?;
        Ok(FeatureEncoder { features })
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.features
            .iter()
            .map(|f| match f {
                EncodedFeature::Numeric { name } | EncodedFeature::Categorical { name, .. } => {
                    name.clone()
                }
            })
            .collect()
    }

    pub fn column_names(&self) -> Vec<String> {
        self.features
            .iter()
            .flat_map(|f| match f {
                EncodedFeature::Numeric { name } => vec![name.clone()],
                EncodedFeature::Categorical { name, levels } => {
                    levels.iter().map(|l| format!("{name}[{l}]")).collect()
                }
            })
            .collect()
    }

    pub fn n_columns(&self) -> usize {
        self.features
            .iter()
            .map(|f| match f {
                EncodedFeature::Numeric { .. } => 1,
                EncodedFeature::Categorical { levels, .. } => levels.len(),
            })
            .sum()
    }

    pub fn encode(&self, ds: &Dataset) -> Result<Matrix> {
        let rows = ds.n_rows();
        let cols = self.n_columns();
        let mut data = vec![0.0; rows * cols];
        let mut offset = 0;
        for f in &self.features {
            match f {
                EncodedFeature::Numeric { name } => {
                    let v = ds.numeric(name)?;
                    for (i, x) in v.iter().enumerate() {
                        data[i * cols + offset] = *x;
                    }
                    offset += 1;
                }
                EncodedFeature::Categorical { name, levels } => {
                    let v = match ds.column(name)? {
                        Column::Categorical(v) => v,
                        Column::Numeric(_) => {
                            return Err(Error::SchemaMismatch(format!(
                                "feature `{name}` was categorical at fit time"
                            )))
                        }
                    };
                    for (i, s) in v.iter().enumerate() {
                        let k = levels.binary_search(s).map_err(|_| Error::UnseenLevel {
                            feature: name.clone(),
                            level: s.clone(),
                        })?;
                        data[i * cols + offset + k] = 1.0;
                    }
                    offset += levels.len();
                }
            }
        }
        Ok(Matrix { rows, cols, data })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{FeatureSchema, Schema};

    #[test]
    fn one_hot_keeps_every_level() {
        let schema = Schema::new(vec![
            FeatureSchema::numeric("x"),
            FeatureSchema::categorical("bc"),
            FeatureSchema::response("y"),
        ])
        .unwrap();
        let ds = Dataset::new(
            schema,
            vec![
                Column::Numeric(vec![1.5, 2.5]),
                Column::Categorical(vec!["pinned".into(), "fixed".into()]),
                Column::Numeric(vec![0.0, 1.0]),
            ],
            "t",
        )
        .unwrap();
        let enc = FeatureEncoder::learn(&ds, &["bc".into(), "x".into()]).unwrap();
        assert_eq!(enc.column_names(), vec!["bc[fixed]", "bc[pinned]", "x"]);
        let m = enc.encode(&ds).unwrap();
        assert_eq!(m.data, vec![0.0, 1.0, 1.5, 1.0, 0.0, 2.5]);
        assert!(FeatureEncoder::learn(&ds, &[]).is_err());
        assert!(FeatureEncoder::learn(&ds, &["y".into()]).is_err());
        let bad = ds
            .replace_column(
                "bc",
                Column::Categorical(vec!["fixed-free".into(), "fixed".into()]),
            )
            .unwrap();
        assert!(matches!(enc.encode(&bad), Err(Error::UnseenLevel { .. })));
    }
}
