use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::validation::ContrastReport;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverfitThresholds {
    /// Ratios strictly above this are fragile.
    pub fragile: f64,
    /// Ratios at or below this are stable.
    pub stable: f64,
}

impl Default for OverfitThresholds {
    fn default() -> Self {
        OverfitThresholds {
            fragile: 2.0,
            stable: 1.5,
        }
    }
}

impl OverfitThresholds {
    pub fn validate(&self) -> Result<()> {
        if !(self.stable > 0.0 && self.stable <= self.fragile && self.fragile.is_finite()) {
            return Err(Error::invalid(
                "thresholds must satisfy 0 < stable <= fragile",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    GeneralizationFragile,
    Stable,
    Inconclusive,
}

/// Verdict for an adapted/traditional RMSE ratio; `None` is an unbounded ratio.
pub fn classify(ratio: Option<f64>, thresholds: &OverfitThresholds) -> Verdict {
    match ratio {
        None => Verdict::GeneralizationFragile,
        Some(r) if r > thresholds.fragile => Verdict::GeneralizationFragile,
        Some(r) if r <= thresholds.stable => Verdict::Stable,
        Some(_) => Verdict::Inconclusive,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverfitReport {
    pub model_id: String,
    pub traditional_rmse: f64,
    pub adapted_rmse: f64,
    pub rmse_ratio: Option<f64>,
    pub thresholds: OverfitThresholds,
    pub verdict: Verdict,
    pub generalization_fragile: bool,
    pub stable: bool,
}

pub fn overfit_gap(
    contrast: &ContrastReport,
    thresholds: OverfitThresholds,
) -> Result<OverfitReport> {
    thresholds.validate()?;
    let verdict = classify(contrast.rmse_ratio, &thresholds);
    Ok(OverfitReport {
        model_id: contrast.model_id.clone(),
        traditional_rmse: contrast.traditional.pooled.rmse,
        adapted_rmse: contrast.adapted.pooled.rmse,
        rmse_ratio: contrast.rmse_ratio,
        thresholds,
        verdict,
        generalization_fragile: verdict == Verdict::GeneralizationFragile,
        stable: verdict == Verdict::Stable,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverfitComparison {
    pub reports: Vec<OverfitReport>,
    /// Lowest pooled RMSE under each plan; first wins ties.
    pub traditional_winner: String,
    pub adapted_winner: String,
    /// The two plans rank a different model first.
    pub ranking_flips: bool,
}

pub fn compare_overfit(
    contrasts: &[ContrastReport],
    thresholds: OverfitThresholds,
) -> Result<OverfitComparison> {
    if contrasts.is_empty() {
        return Err(Error::Empty);
    }
    let reports = contrasts
        .iter()
        .map(|c| overfit_gap(c, thresholds))
        .collect::<Result<Vec<_>>>()?;
    let best = |key: fn(&OverfitReport) -> f64| {
        reports
            .iter()
            .reduce(|a, b| if key(b) < key(a) { b } else { a })
            .map(|r| r.model_id.clone())
            .expect("nonempty")
    };
    let traditional_winner = best(|r| r.traditional_rmse);
    let adapted_winner = best(|r| r.adapted_rmse);
    Ok(OverfitComparison {
        ranking_flips: traditional_winner != adapted_winner,
        reports,
        traditional_winner,
        adapted_winner,
    })
}
