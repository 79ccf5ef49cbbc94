//! Permutation importance, Shapley attributions and their comparison.

mod consistency;
mod importance;
mod shapley;

pub use consistency::{explanation_consistency, ConsistencyReport, TrendComparison};
pub use importance::{
    permutation_importance, FeatureImportance, ImportanceMetric, ImportanceReport,
};
pub use shapley::{
    background_sample, sample_rows, shapley_summary, shapley_values, FeatureSummary,
    ShapleyExplanation, ShapleyMode, ShapleySummary, DEFAULT_BACKGROUND, EXACT_MAX_FEATURES,
    SAMPLED_MAX_FEATURES,
};
