use std::cmp::Ordering;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::schema::{Kind, Schema};
use crate::error::{Error, Result};

/// A single cell value. Ordered numerically (total order) or lexicographically.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Num(f64),
    Cat(String),
}

impl PartialEq for Value {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Value {}

impl PartialOrd for Value {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Value {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Value::Num(a), Value::Num(b)) => a.total_cmp(b),
            (Value::Cat(a), Value::Cat(b)) => a.cmp(b),
            (Value::Num(_), Value::Cat(_)) => Ordering::Less,
            (Value::Cat(_), Value::Num(_)) => Ordering::Greater,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Num(x) => write!(f, "{x}"),
            Value::Cat(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Column {
    Numeric(Vec<f64>),
    Categorical(Vec<String>),
}

impl Column {
    pub fn len(&self) -> usize {
        match self {
            Column::Numeric(v) => v.len(),
            Column::Categorical(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn kind(&self) -> Kind {
        match self {
            Column::Numeric(_) => Kind::Numeric,
            Column::Categorical(_) => Kind::Categorical,
        }
    }

    pub fn value(&self, row: usize) -> Value {
        match self {
            Column::Numeric(v) => Value::Num(v[row]),
            Column::Categorical(v) => Value::Cat(v[row].clone()),
        }
    }

    pub fn gather(&self, rows: &[usize]) -> Column {
        match self {
            Column::Numeric(v) => Column::Numeric(rows.iter().map(|&r| v[r]).collect()),
            Column::Categorical(v) => {
                Column::Categorical(rows.iter().map(|&r| v[r].clone()).collect())
            }
        }
    }

    pub fn as_numeric(&self) -> Option<&[f64]> {
        match self {
            Column::Numeric(v) => Some(v),
            Column::Categorical(_) => None,
        }
    }
}

/// Immutable, column-typed table with exactly one numeric response.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    schema: Arc<Schema>,
    columns: Vec<Column>,
    provenance: String,
}

impl Dataset {
    pub fn new(
        schema: Schema,
        columns: Vec<Column>,
        provenance: impl Into<String>,
    ) -> Result<Self> {
        Self::with_shared_schema(Arc::new(schema), columns, provenance.into())
    }

    fn with_shared_schema(
        schema: Arc<Schema>,
        columns: Vec<Column>,
        provenance: String,
    ) -> Result<Self> {
        if columns.len() != schema.len() {
            return Err(Error::SchemaMismatch(format!(
                "{} columns for a {}-column schema",
                columns.len(),
                schema.len()
            )));
        }
        let n = columns[0].len();
        if n == 0 {
            return Err(Error::NoRows(provenance));
        }
        for (spec, col) in schema.columns().iter().zip(&columns) {
            if col.kind() != spec.kind {
                return Err(Error::SchemaMismatch(format!(
                    "column `{}` declared {:?} but holds {:?} values",
                    spec.name,
                    spec.kind,
                    col.kind()
                )));
            }
            if col.len() != n {
                return Err(Error::LengthMismatch {
                    left: n,
                    right: col.len(),
                });
            }
            if let Column::Numeric(v) = col {
                if let Some(row) = v.iter().position(|x| !x.is_finite()) {
                    return Err(Error::Parse {
                        row: row + 2,
                        column: spec.name.clone(),
                        message: format!("non-finite value {}", v[row]),
                    });
                }
            }
        }
        Ok(Dataset {
            schema,
            columns,
            provenance,
        })
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    pub fn n_rows(&self) -> usize {
        self.columns[0].len()
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column(&self, name: &str) -> Result<&Column> {
        self.schema
            .index_of(name)
            .map(|i| &self.columns[i])
            .ok_or_else(|| Error::UnknownFeature(name.to_string()))
    }

    pub fn numeric(&self, name: &str) -> Result<&[f64]> {
        self.column(name)?
            .as_numeric()
            .ok_or_else(|| Error::NotNumeric(name.to_string()))
    }

    pub fn response(&self) -> &[f64] {
        self.columns[self.schema.response_index()]
            .as_numeric()
            .expect("response is numeric by schema invariant")
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.schema.feature_names()
    }

    pub fn value(&self, row: usize, name: &str) -> Result<Value> {
        Ok(self.column(name)?.value(row))
    }

    /// New dataset made of `rows` (in the given order, repeats allowed).
    pub fn select_rows(&self, rows: &[usize]) -> Result<Dataset> {
        if rows.is_empty() {
            return Err(Error::NoRows(self.provenance.clone()));
        }
        let columns = self.columns.iter().map(|c| c.gather(rows)).collect();
        Ok(Dataset {
            schema: Arc::clone(&self.schema),
            columns,
            provenance: self.provenance.clone(),
        })
    }

    /// Copy of this dataset with one column swapped out.
    pub fn replace_column(&self, name: &str, column: Column) -> Result<Dataset> {
        let idx = self
            .schema
            .index_of(name)
            .ok_or_else(|| Error::UnknownFeature(name.to_string()))?;
        let mut columns = self.columns.clone();
        columns[idx] = column;
        Self::with_shared_schema(Arc::clone(&self.schema), columns, self.provenance.clone())
    }

    /// Same data under a different provenance tag.
    pub fn with_provenance(mut self, provenance: impl Into<String>) -> Self {
        self.provenance = provenance.into();
        self
    }

    /// Reads a CSV file whose header must name exactly the schema's columns
    /// (in any order). Row numbers in errors are 1-based file lines, the
    /// header being row 1.
    pub fn load_csv(path: impl AsRef<Path>, schema: Schema) -> Result<Dataset> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(file, schema, &path.display().to_string())
    }

    pub fn read_csv<R: Read>(reader: R, schema: Schema, source: &str) -> Result<Dataset> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(false)
            .from_reader(reader);
        let header: Vec<String> = rdr
            .headers()
            .map_err(|e| Error::Parse {
                row: 1,
                column: String::new(),
                message: e.to_string(),
            })?
            .iter()
            .map(|h| h.trim().to_string())
            .collect();

        let mut position = Vec::with_capacity(schema.len());
        for spec in schema.columns() {
            match header.iter().position(|h| *h == spec.name) {
                Some(p) => position.push(p),
                None => {
                    return Err(Error::SchemaMismatch(format!(
                        "header of {source} lacks declared column `{}`",
                        spec.name
                    )))
                }
            }
        }
        if let Some(extra) = header.iter().find(|h| schema.index_of(h).is_none()) {
            return Err(Error::SchemaMismatch(format!(
                "header of {source} has undeclared column `{extra}`"
            )));
        }
        if header.len() != schema.len() {
            return Err(Error::SchemaMismatch(format!(
                "duplicate header names in {source}"
            )));
        }

        let mut columns: Vec<Column> = schema
            .columns()
            .iter()
            .map(|c| match c.kind {
                Kind::Numeric => Column::Numeric(Vec::new()),
                Kind::Categorical => Column::Categorical(Vec::new()),
            })
            .collect();

        for (i, record) in rdr.records().enumerate() {
            let row = i + 2;
            let record = record.map_err(|e| Error::Parse {
                row,
                column: String::new(),
                message: e.to_string(),
            })?;
            for ((spec, col), &p) in schema
                .columns()
                .iter()
                .zip(columns.iter_mut())
                .zip(&position)
            {
                let cell = record.get(p).unwrap_or("").trim();
                if cell.is_empty() {
                    return Err(Error::EmptyCell {
                        row,
                        column: spec.name.clone(),
                    });
                }
                match col {
                    Column::Numeric(v) => {
                        let x: f64 = cell.parse().map_err(|_| Error::Parse {
                            row,
                            column: spec.name.clone(),
                            message: format!("`{cell}` is not a number"),
                        })?;
                        if !x.is_finite() {
                            return Err(Error::Parse {
                                row,
                                column: spec.name.clone(),
                                message: format!("`{cell}` is not finite"),
                            });
                        }
                        v.push(x);
                    }
                    Column::Categorical(v) => v.push(cell.to_string()),
                }
            }
        }
        if columns[0].is_empty() {
            return Err(Error::NoRows(source.to_string()));
        }
        Dataset::new(schema, columns, source)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let to_err = |e: csv::Error| Error::invalid(format!("csv write failed: {e}"));
        w.write_record(self.schema.columns().iter().map(|c| c.name.as_str()))
            .map_err(to_err)?;
        for row in 0..self.n_rows() {
            let cells: Vec<String> = self
                .columns
                .iter()
                .map(|c| match c {
                    Column::Numeric(v) => format!("{}", v[row]),
                    Column::Categorical(v) => v[row].clone(),
                })
                .collect();
            w.write_record(&cells).map_err(to_err)?;
        }
        w.flush()
            .map_err(|e| Error::invalid(format!("csv flush failed: {e}")))
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv output is utf-8")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::schema::FeatureSchema;

    fn schema_t_vcr() -> Schema {
        Schema::new(vec![
            FeatureSchema::numeric("t"),
            FeatureSchema::response("Vcr"),
        ])
        .unwrap()
    }

    fn read(text: &str, schema: Schema) -> Result<Dataset> {
        Dataset::read_csv(text.as_bytes(), schema, "inline")
    }

    #[test]
    fn minimal_file_loads() {
        let ds = read("t,Vcr\n1.0,5.0\n2.0,9.0", schema_t_vcr()).unwrap();
        assert_eq!(ds.n_rows(), 2);
        assert_eq!(ds.numeric("t").unwrap(), &[1.0, 2.0]);
        assert_eq!(ds.response(), &[5.0, 9.0]);
    }

    #[test]
    fn header_order_may_differ_and_scientific_notation_parses() {
        let ds = read("Vcr,t\n5e3,1.5E-1\n", schema_t_vcr()).unwrap();
        assert_eq!(ds.numeric("t").unwrap(), &[0.15]);
        assert_eq!(ds.response(), &[5000.0]);
    }

    #[test]
    fn missing_declared_column_is_a_schema_mismatch() {
        let schema = Schema::new(vec![
            FeatureSchema::numeric("t"),
            FeatureSchema::numeric("Lsl"),
            FeatureSchema::response("Vcr"),
        ])
        .unwrap();
        let err = read("t,Vcr\n1,2\n", schema).unwrap_err();
        assert!(
            matches!(err, Error::SchemaMismatch(ref m) if m.contains("Lsl")),
            "{err}"
        );
    }

    #[test]
    fn non_numeric_cell_names_row_and_column() {
        let err = read("t,Vcr\nabc,5.0\n", schema_t_vcr()).unwrap_err();
        match err {
            Error::Parse { row, column, .. } => {
                assert_eq!(row, 2);
                assert_eq!(column, "t");
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn empty_cell_and_zero_rows_rejected() {
        let err = read("t,Vcr\n1,2\n,3\n", schema_t_vcr()).unwrap_err();
        assert!(matches!(err, Error::EmptyCell { row: 3, ref column } if column == "t"));
        assert!(matches!(
            read("t,Vcr\n", schema_t_vcr()),
            Err(Error::NoRows(_))
        ));
        assert!(matches!(
            read("t,Vcr\nnan,1\n", schema_t_vcr()),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let schema = Schema::new(vec![
            FeatureSchema::numeric("t"),
            FeatureSchema::categorical("bc"),
            FeatureSchema::response("y"),
        ])
        .unwrap();
        let ds = Dataset::new(
            schema.clone(),
            vec![
                Column::Numeric(vec![0.1, 1e-7, 123456.789]),
                Column::Categorical(vec!["a,b".into(), "fixed".into(), "pinned".into()]),
                Column::Numeric(vec![1.0 / 3.0, 2.5, -0.0]),
            ],
            "mem",
        )
        .unwrap();
        let text = ds.to_csv_string();
        let back = read(&text, schema).unwrap();
        assert_eq!(back.columns(), ds.columns());
        assert_eq!(back.to_csv_string(), text);
    }
}
