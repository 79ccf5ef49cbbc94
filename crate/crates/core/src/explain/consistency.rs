use serde::{Deserialize, Serialize};

use super::shapley::ShapleySummary;
use crate::data::metrics;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrendComparison {
    pub name: String,
    pub sign_a: i8,
    pub sign_b: i8,
    pub agree: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    /// Spearman correlation of mean |φ| across features, in `[-1, 1]`.
    pub rank_correlation: f64,
    /// In the feature order of the first summary.
    pub trends: Vec<TrendComparison>,
    pub disagreements: Vec<String>,
}

/// Compares two summaries over the same feature set (order may differ).
pub fn explanation_consistency(
    a: &ShapleySummary,
    b: &ShapleySummary,
) -> Result<ConsistencyReport> {
    let mut names_a: Vec<&str> = a.features.iter().map(|f| f.name.as_str()).collect();
    let mut names_b: Vec<&str> = b.features.iter().map(|f| f.name.as_str()).collect();
    names_a.sort_unstable();
    names_b.sort_unstable();
    if names_a != names_b || a.features.is_empty() {
        return Err(Error::SchemaMismatch(format!(
            "explanations cover different features: {names_a:?} vs {names_b:?}"
        )));
    }
    let paired: Vec<_> = a
        .features
        .iter()
        .map(|fa| (fa, b.feature(&fa.name).expect("same feature set")))
        .collect();
    let imp_a: Vec<f64> = paired.iter().map(|(fa, _)| fa.mean_abs_phi).collect();
    let imp_b: Vec<f64> = paired.iter().map(|(_, fb)| fb.mean_abs_phi).collect();
    let rank_correlation = match metrics::spearman(&imp_a, &imp_b)? {
        Some(r) => r,
        None if metrics::average_ranks(&imp_a) == metrics::average_ranks(&imp_b) => 1.0,
        None => 0.0,
    };
    let trends: Vec<TrendComparison> = paired
        .iter()
        .map(|(fa, fb)| TrendComparison {
            name: fa.name.clone(),
            sign_a: fa.trend_sign,
            sign_b: fb.trend_sign,
            agree: fa.trend_sign == fb.trend_sign,
        })
        .collect();
    let disagreements = trends
        .iter()
        .filter(|t| !t.agree)
        .map(|t| t.name.clone())
        .collect();
    Ok(ConsistencyReport {
        rank_correlation,
        trends,
        disagreements,
    })
}
