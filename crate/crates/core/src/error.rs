use std::path::PathBuf;

use thiserror::Error;

/// Every failure the toolkit reports.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid schema: {0}")]
    Schema(String),

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("empty cell at row {row}, column {column}")]
    EmptyCell { row: usize, column: String },

    #[error("no data rows in {0}")]
    NoRows(String),

    #[error("unknown feature `{0}`")]
    UnknownFeature(String),

    #[error("feature `{0}` is not numeric")]
    NotNumeric(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("empty input")]
    Empty,

    #[error("undefined variance: response is constant")]
    UndefinedVariance,

    #[error("formula syntax error at byte {offset}: {message}")]
    FormulaSyntax { offset: usize, message: String },

    #[error("invalid formula: {0}")]
    FormulaInvalid(String),

    #[error("log transform requires positive response, found {value} at row {row}")]
    NonPositiveResponse { row: usize, value: f64 },

    #[error("singular design: column `{column}` is linearly dependent on earlier columns")]
    SingularDesign { column: String },

    #[error("unseen level `{level}` for categorical feature `{feature}`")]
    UnseenLevel { feature: String, level: String },

    #[error(
        "svr did not converge after {iterations} iterations (max KKT violation {violation:.3e})"
    )]
    NotConverged { iterations: usize, violation: f64 },

    #[error("fold {fold} failed: {source}")]
    Fold {
        fold: String,
        #[source]
        source: Box<Error>,
    },

    #[error("every tuning candidate failed ({0} tried)")]
    AllCandidatesFailed(usize),

    #[error("empty search space")]
    EmptySearchSpace,

    #[error("exact shapley needs p <= {max}, got {p}")]
    TooManyFeatures { p: usize, max: usize },

    #[error("enumeration of {count} subsets exceeds cap {cap}; shrink the candidate pool or raise the cap")]
    SubsetCapExceeded { count: u128, cap: usize },

    #[error("correlation spec is not positive semidefinite (min eigenvalue {0:.3e})")]
    NotPsd(f64),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
