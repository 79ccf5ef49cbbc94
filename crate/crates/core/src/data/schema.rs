use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Numeric,
    Categorical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Feature,
    Response,
}

/// One column of a table: its name, value kind, role and optional units.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub name: String,
    pub kind: Kind,
    pub role: Role,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub units: Option<String>,
}

impl FeatureSchema {
    pub fn numeric(name: impl Into<String>) -> Self {
        FeatureSchema {
            name: name.into(),
            kind: Kind::Numeric,
            role: Role::Feature,
            units: None,
        }
    }

    pub fn categorical(name: impl Into<String>) -> Self {
        FeatureSchema {
            name: name.into(),
            kind: Kind::Categorical,
            role: Role::Feature,
            units: None,
        }
    }

    pub fn response(name: impl Into<String>) -> Self {
        FeatureSchema {
            name: name.into(),
            kind: Kind::Numeric,
            role: Role::Response,
            units: None,
        }
    }

    pub fn with_units(mut self, units: impl Into<String>) -> Self {
        self.units = Some(units.into());
        self
    }
}

/// Validated column list: unique nonempty names, exactly one numeric response.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<FeatureSchema>", into = "Vec<FeatureSchema>")]
pub struct Schema {
    columns: Vec<FeatureSchema>,
    response: usize,
}

impl Schema {
    pub fn new(columns: Vec<FeatureSchema>) -> Result<Self> {
        let mut seen = HashSet::new();
        for c in &columns {
            if c.name.trim().is_empty() {
                return Err(Error::Schema("column name is empty".into()));
            }
            if !seen.insert(c.name.as_str()) {
                return Err(Error::Schema(format!("duplicate column `{}`", c.name)));
            }
        }
        let responses: Vec<usize> = columns
            .iter()
            .enumerate()
            .filter(|(_, c)| c.role == Role::Response)
            .map(|(i, _)| i)
            .collect();
        let response = match responses.as_slice() {
            [one] => *one,
            [] => return Err(Error::Schema("no response column".into())),
            _ => return Err(Error::Schema("more than one response column".into())),
        };
        if columns[response].kind != Kind::Numeric {
            return Err(Error::Schema(format!(
                "response `{}` must be numeric",
                columns[response].name
            )));
        }
        Ok(Schema { columns, response })
    }

    pub fn columns(&self) -> &[FeatureSchema] {
        &self.columns
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn response_index(&self) -> usize {
        self.response
    }

    pub fn response_name(&self) -> &str {
        &self.columns[self.response].name
    }

    /// Feature (non-response) names in schema order.
    pub fn feature_names(&self) -> Vec<String> {
        self.columns
            .iter()
            .filter(|c| c.role == Role::Feature)
            .map(|c| c.name.clone())
            .collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn get(&self, name: &str) -> Result<&FeatureSchema> {
        self.index_of(name)
            .map(|i| &self.columns[i])
            .ok_or_else(|| Error::UnknownFeature(name.to_string()))
    }

    /// Checks that `name` is a feature column (not the response).
    pub fn require_feature(&self, name: &str) -> Result<usize> {
        match self.index_of(name) {
            Some(i) if i != self.response => Ok(i),
            _ => Err(Error::UnknownFeature(name.to_string())),
        }
    }

    /// Reads a JSON sidecar: an array of `{name, kind, role, units}` objects.
    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }
}

impl TryFrom<Vec<FeatureSchema>> for Schema {
    type Error = Error;

    fn try_from(columns: Vec<FeatureSchema>) -> Result<Self> {
        Schema::new(columns)
    }
}

impl From<Schema> for Vec<FeatureSchema> {
    fn from(s: Schema) -> Self {
        s.columns
    }
}
