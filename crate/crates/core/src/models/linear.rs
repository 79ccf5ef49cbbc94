//! Ordinary least squares through a Householder QR factorization.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::{metrics, Dataset};
use crate::error::{Error, Result};
use crate::formula::{DesignEncoding, DesignMatrix, Formula, Transform};

/// Relative size below which a pivot of R marks a dependent column.
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OlsFit {
    pub column_names: Vec<String>,
    pub coefficients: Vec<f64>,
    /// Train RMSE on the fitting (possibly log) scale.
    pub train_rmse: f64,
    pub train_r2: Option<f64>,
}

pub fn fit_ols(dm: &DesignMatrix) -> Result<OlsFit> {
    let (n, p) = (dm.n_rows, dm.n_cols());
    if p == 0 {
        return Err(Error::invalid("design matrix has no columns"));
    }
    if n < p {
        return Err(Error::SingularDesign {
            column: dm.column_names[n.min(p - 1)].clone(),
        });
    }
    let x = DMatrix::from_row_slice(n, p, &dm.values);
    let y = DVector::from_column_slice(&dm.response);
    let norms: Vec<f64> = (0..p).map(|j| x.column(j).norm()).collect();
    let qr = x.clone().qr();
    let r = qr.r();
    for j in 0..p {
        if r[(j, j)].abs() <= RANK_TOL * norms[j].max(f64::MIN_POSITIVE) {
            return Err(Error::SingularDesign {
                column: dm.column_names[j].clone(),
            });
        }
    }
    let qty = qr.q().transpose() * &y;
    let beta = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::SingularDesign {
            column: dm.column_names[p - 1].clone(),
        })?;
    let fitted = &x * &beta;
    let coefficients: Vec<f64> = beta.iter().copied().collect();
    let fitted: Vec<f64> = fitted.iter().copied().collect();
    Ok(OlsFit {
        column_names: dm.column_names.clone(),
        train_rmse: metrics::rmse(&dm.response, &fitted)?,
        train_r2: metrics::r_squared(&dm.response, &fitted).ok(),
        coefficients,
    })
}

/// A fitted linear model together with the encoding of its formula.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub encoding: DesignEncoding,
    pub fit: OlsFit,
}

impl LinearModel {
    pub fn fit(formula: &Formula, ds: &Dataset) -> Result<Self> {
        let encoding = DesignEncoding::learn(formula, ds)?;
        let dm = encoding.design(ds)?;
        Ok(LinearModel {
            fit: fit_ols(&dm)?,
            encoding,
        })
    }

    pub fn formula(&self) -> &Formula {
        self.encoding.formula()
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.fit.coefficients
    }

    /// Linear predictor on the fitting scale.
    pub fn linear_predictor(&self, ds: &Dataset) -> Result<Vec<f64>> {
        let (_, values) = self.encoding.predictors(ds)?;
        let beta = &self.fit.coefficients;
        Ok(values
            .chunks_exact(beta.len())
            .map(|row| row.iter().zip(beta).map(|(x, b)| x * b).sum())
            .collect())
    }

    /// Predictions on the original response scale (log models exponentiated).
    pub fn predict(&self, ds: &Dataset) -> Result<Vec<f64>> {
        let eta = self.linear_predictor(ds)?;
        Ok(match self.formula().transform {
            Transform::Identity => eta,
            Transform::Log => eta.into_iter().map(f64::exp).collect(),
        })
    }
}
