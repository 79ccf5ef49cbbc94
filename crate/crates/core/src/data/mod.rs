//! Tabular data: schema, ingestion, splitting, grouping and error metrics.

mod dataset;
mod groups;
pub mod metrics;
mod schema;
mod split;

pub use dataset::{Column, Dataset, Value};
pub use groups::{group_rows, unique_combinations, GroupKey};
pub use metrics::{median_abs_error, r_squared, rmse};
pub use schema::{FeatureSchema, Kind, Role, Schema};
pub use split::{train_size, train_test_indices, train_test_split, SplitIndices};
