//! Deployment audits: overfit gap, variable omission, underspecification.

mod omission;
mod overfit;
mod underspec;

use serde::{Deserialize, Serialize};

use crate::data::metrics;
use crate::error::Result;

pub use omission::{omission_audit, Delta, OmissionAuditReport, OmissionConfig, VariantResult};
pub use overfit::{
    classify, compare_overfit, overfit_gap, OverfitComparison, OverfitReport, OverfitThresholds,
    Verdict,
};
pub use underspec::{
    near_equivalence_classes, underspec_search, PairConsistency, SubsetExplanation, SubsetResult,
    UnderspecConfig, UnderspecReport, DEFAULT_SUBSET_CAP,
};

/// RMSE and R² of one fitted model on one set of rows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitMetrics {
    pub rmse: f64,
    pub r2: f64,
}

impl FitMetrics {
    pub fn compute(y: &[f64], yhat: &[f64]) -> Result<Self> {
        Ok(FitMetrics {
            rmse: metrics::rmse(y, yhat)?,
            r2: metrics::r_squared(y, yhat)?,
        })
    }
}

/// `100 (to - from) / |from|`.
pub fn percent_change(from: f64, to: f64) -> f64 {
    100.0 * (to - from) / from.abs()
}
