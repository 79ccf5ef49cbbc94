use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::dataset::{Dataset, Value};
use crate::error::{Error, Result};

/// The value tuple shared by every row of one group.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GroupKey {
    pub features: Vec<String>,
    pub values: Vec<Value>,
}

impl fmt::Display for GroupKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (name, v)) in self.features.iter().zip(&self.values).enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{name}={v}")?;
        }
        Ok(())
    }
}

fn validate_features(ds: &Dataset, features: &[String]) -> Result<()> {
    if features.is_empty() {
        return Err(Error::invalid("grouping needs at least one feature"));
    }
    for f in features {
        ds.schema().require_feature(f)?;
    }
    Ok(())
}

/// Rows of each distinct value tuple, ordered lexicographically by tuple.
pub fn group_rows(ds: &Dataset, features: &[String]) -> Result<Vec<(GroupKey, Vec<usize>)>> {
    validate_features(ds, features)?;
    let cols: Vec<_> = features
        .iter()
        .map(|f| ds.column(f))
        .collect::<Result<_>>()?;
    let mut groups: BTreeMap<Vec<Value>, Vec<usize>> = BTreeMap::new();
    for row in 0..ds.n_rows() {
        let key: Vec<Value> = cols.iter().map(|c| c.value(row)).collect();
        groups.entry(key).or_default().push(row);
    }
    Ok(groups
        .into_iter()
        .map(|(values, rows)| {
            (
                GroupKey {
                    features: features.to_vec(),
                    values,
                },
                rows,
            )
        })
        .collect())
}

/// Distinct combinations of `features` with their row counts.
pub fn unique_combinations(ds: &Dataset, features: &[String]) -> Result<Vec<(GroupKey, usize)>> {
    Ok(group_rows(ds, features)?
        .into_iter()
        .map(|(k, rows)| (k, rows.len()))
        .collect())
}
