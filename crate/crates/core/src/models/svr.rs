//! Epsilon-insensitive support vector regression with an RBF kernel.
//!
//! The dual is solved by sequential minimal optimization over the `2n`
//! stacked variables `[alpha; alpha*]`, choosing the maximal violating
//! pair at every step and stopping once the largest KKT violation falls
//! to `tol`. Features are standardized with training statistics first.

use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::encode::{FeatureEncoder, Matrix};
use crate::data::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvrParams {
    #[serde(default = "default_c")]
    pub c: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    /// Defaults to `100_000 * n`.
    #[serde(default)]
    pub max_iter: Option<usize>,
}

fn default_c() -> f64 {
    1.0
}
fn default_gamma() -> f64 {
    0.1
}
fn default_epsilon() -> f64 {
    0.1
}
fn default_tol() -> f64 {
    1e-3
}

impl Default for SvrParams {
    fn default() -> Self {
        SvrParams {
            c: default_c(),
            gamma: default_gamma(),
            epsilon: default_epsilon(),
            tol: default_tol(),
            max_iter: None,
        }
    }
}

impl SvrParams {
    fn validate(&self) -> Result<()> {
        let ok = self.c > 0.0
            && self.gamma > 0.0
            && self.epsilon >= 0.0
            && self.tol > 0.0
            && self.c.is_finite()
            && self.gamma.is_finite()
            && self.epsilon.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "svr needs C > 0, gamma > 0, epsilon >= 0, tol > 0 (got {self:?})"
            )))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    fn fit(x: &Matrix) -> Self {
        let n = x.rows as f64;
        let mut mean = vec![0.0; x.cols];
        let mut scale = vec![0.0; x.cols];
        for j in 0..x.cols {
            let m = (0..x.rows).map(|i| x.get(i, j)).sum::<f64>() / n;
            let var = (0..x.rows).map(|i| (x.get(i, j) - m).powi(2)).sum::<f64>() / n;
            mean[j] = m;
            scale[j] = if var > 0.0 { var.sqrt() } else { 1.0 };
        }
        Standardizer { mean, scale }
    }

    fn apply(&self, x: &mut Matrix) {
        for i in 0..x.rows {
            for j in 0..x.cols {
                let v = &mut x.data[i * x.cols + j];
                *v = (*v - self.mean[j]) / self.scale[j];
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportVector {
    /// `alpha_i - alpha*_i`, within `[-C, C]`.
    pub coef: f64,
    /// Standardized feature row.
    pub x: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSvr {
    pub params: SvrParams,
    pub encoder: FeatureEncoder,
    pub standardizer: Standardizer,
    pub support: Vec<SupportVector>,
    pub bias: f64,
    pub iterations: usize,
    /// Max KKT violation (maximal violating pair gap) at termination.
    pub final_violation: f64,
}

fn rbf(gamma: f64, a: &[f64], b: &[f64]) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-gamma * d2).exp()
}

/// Kernel rows over the training points, cached up to a memory budget.
struct KernelRows<'a> {
    x: &'a Matrix,
    gamma: f64,
    cache: HashMap<usize, Arc<Vec<f64>>>,
    order: std::collections::VecDeque<usize>,
    capacity: usize,
}

const KERNEL_CACHE_ENTRIES: usize = 1 << 23;

impl<'a> KernelRows<'a> {
    fn new(x: &'a Matrix, gamma: f64) -> Self {
        KernelRows {
            x,
            gamma,
            cache: HashMap::new(),
            order: Default::default(),
            capacity: (KERNEL_CACHE_ENTRIES / x.rows.max(1)).max(2),
        }
    }

    fn row(&mut self, i: usize) -> Arc<Vec<f64>> {
        if let Some(r) = self.cache.get(&i) {
            return Arc::clone(r);
        }
        let xi = self.x.row(i);
        let r: Arc<Vec<f64>> = Arc::new(
            (0..self.x.rows)
                .map(|j| rbf(self.gamma, xi, self.x.row(j)))
                .collect(),
        );
        if self.cache.len() >= self.capacity {
            if let Some(old) = self.order.pop_front() {
                self.cache.remove(&old);
            }
        }
        self.cache.insert(i, Arc::clone(&r));
        self.order.push_back(i);
        r
    }
}

struct DualSolution {
    coef: Vec<f64>,
    bias: f64,
    iterations: usize,
    violation: f64,
}

fn solve_dual(x: &Matrix, y: &[f64], p: &SvrParams) -> Result<DualSolution> {
    let n = x.rows;
    let l = 2 * n;
    let c = p.c;
    let max_iter = p.max_iter.unwrap_or(100_000usize.saturating_mul(n));
    // sign[t] = +1 for alpha, -1 for alpha*
    let sign = |t: usize| if t < n { 1.0 } else { -1.0 };
    let mut alpha = vec![0.0; l];
    let mut grad: Vec<f64> = (0..l)
        .map(|t| {
            if t < n {
                p.epsilon - y[t]
            } else {
                p.epsilon + y[t - n]
            }
        })
        .collect();
    let mut kernel = KernelRows::new(x, p.gamma);

    let mut iterations = 0;
    let violation = loop {
        // maximal violating pair
        let mut gmax = f64::NEG_INFINITY;
        let mut gmin = f64::INFINITY;
        let (mut i, mut j) = (usize::MAX, usize::MAX);
        for t in 0..l {
            let s = sign(t);
            let v = -s * grad[t];
            let up = if s > 0.0 {
                alpha[t] < c
            } else {
                alpha[t] > 0.0
            };
            let low = if s > 0.0 {
                alpha[t] > 0.0
            } else {
                alpha[t] < c
            };
            if up && v > gmax {
                gmax = v;
                i = t;
            }
            if low && v < gmin {
                gmin = v;
                j = t;
            }
        }
        let gap = gmax - gmin;
        if i == usize::MAX || j == usize::MAX || gap <= p.tol {
            break gap.max(0.0);
        }
        if iterations >= max_iter {
            return Err(Error::NotConverged {
                iterations,
                violation: gap,
            });
        }
        iterations += 1;

        let ki = kernel.row(i % n);
        let kj = kernel.row(j % n);
        let (si, sj) = (sign(i), sign(j));
        let q = |a_sign: f64, b_sign: f64, k: f64| a_sign * b_sign * k;
        let qii = 1.0;
        let qjj = 1.0;
        let qij = q(si, sj, ki[j % n]);
        let (old_i, old_j) = (alpha[i], alpha[j]);

        if si != sj {
            let mut quad = qii + qjj + 2.0 * qij;
            if quad <= 0.0 {
                quad = 1e-12;
            }
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let mut quad = qii + qjj - 2.0 * qij;
            if quad <= 0.0 {
                quad = 1e-12;
            }
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }

        let di = alpha[i] - old_i;
        let dj = alpha[j] - old_j;
        for t in 0..l {
            let st = sign(t);
            let k_ti = ki[t % n];
            let k_tj = kj[t % n];
            grad[t] += q(st, si, k_ti) * di + q(st, sj, k_tj) * dj;
        }
    };

    // bias: average over free variables, else midpoint of the feasible interval
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut free, mut free_sum) = (0usize, 0.0);
    for t in 0..l {
        let s = sign(t);
        let yg = s * grad[t];
        if alpha[t] >= c {
            if s < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if s > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            free_sum += yg;
        }
    }
    let rho = if free > 0 {
        free_sum / free as f64
    } else {
        0.5 * (ub + lb)
    };
    let coef = (0..n).map(|i| alpha[i] - alpha[i + n]).collect();
    Ok(DualSolution {
        coef,
        bias: -rho,
        iterations,
        violation,
    })
}

impl KernelSvr {
    pub fn fit(ds: &Dataset, features: &[String], params: SvrParams) -> Result<Self> {
        params.validate()?;
        if ds.n_rows() < 2 {
            return Err(Error::invalid("svr needs at least two rows"));
        }
        let encoder = FeatureEncoder::learn(ds, features)?;
        let mut x = encoder.encode(ds)?;
        let standardizer = Standardizer::fit(&x);
        standardizer.apply(&mut x);
        let sol = solve_dual(&x, ds.response(), &params)?;
        let support = sol
            .coef
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != 0.0)
            .map(|(i, c)| SupportVector {
                coef: *c,
                x: x.row(i).to_vec(),
            })
            .collect();
        Ok(KernelSvr {
            params,
            encoder,
            standardizer,
            support,
            bias: sol.bias,
            iterations: sol.iterations,
            final_violation: sol.violation,
        })
    }

    pub fn predict(&self, ds: &Dataset) -> Result<Vec<f64>> {
        let mut x = self.encoder.encode(ds)?;
        self.standardizer.apply(&mut x);
        Ok((0..x.rows)
            .map(|i| {
                let row = x.row(i);
                self.support
                    .iter()
                    .map(|sv| sv.coef * rbf(self.params.gamma, &sv.x, row))
                    .sum::<f64>()
                    + self.bias
            })
            .collect())
    }
}

pub fn fit_svr(ds: &Dataset, features: &[String], params: SvrParams) -> Result<KernelSvr> {
    KernelSvr::fit(ds, features, params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{metrics, Column, FeatureSchema, Schema};

    fn frame(cols: Vec<(&str, Vec<f64>)>, y: Vec<f64>) -> Dataset {
        let mut schema: Vec<FeatureSchema> = cols
            .iter()
            .map(|(n, _)| FeatureSchema::numeric(*n))
            .collect();
        schema.push(FeatureSchema::response("y"));
        let mut columns: Vec<Column> = cols.into_iter().map(|(_, v)| Column::Numeric(v)).collect();
        columns.push(Column::Numeric(y));
        Dataset::new(Schema::new(schema).unwrap(), columns, "t").unwrap()
    }

    fn t() -> Vec<String> {
        vec!["t".to_string()]
    }

    /// Checks every training sample against the epsilon-KKT conditions
    /// using only predictions and coefficients.
    fn max_sample_kkt_violation(model: &KernelSvr, ds: &Dataset, coefs: &[f64]) -> f64 {
        let pred = model.predict(ds).unwrap();
        let (c, eps) = (model.params.c, model.params.epsilon);
        let mut worst: f64 = 0.0;
        for ((y, f), a) in ds.response().iter().zip(&pred).zip(coefs) {
            let r = y - f;
            let v = if *a == 0.0 {
                (r.abs() - eps).max(0.0)
            } else if *a >= c {
                (eps - r).max(0.0)
            } else if *a <= -c {
                (eps + r).max(0.0)
            } else if *a > 0.0 {
                (r - eps).abs()
            } else {
                (r + eps).abs()
            };
            worst = worst.max(v);
        }
        worst
    }

    fn training_coefs(model: &KernelSvr, ds: &Dataset) -> Vec<f64> {
        // map support rows back to training rows through the standardized encoding
        let mut x = model.encoder.encode(ds).unwrap();
        model.standardizer.apply(&mut x);
        (0..x.rows)
            .map(|i| {
                model
                    .support
                    .iter()
                    .find(|sv| sv.x.as_slice() == x.row(i))
                    .map_or(0.0, |sv| sv.coef)
            })
            .collect()
    }

    #[test]
    fn wide_tube_gives_constant_model() {
        let tt: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let y: Vec<f64> = tt.iter().map(|v| (v * 0.3).sin() + 2.0).collect();
        let mean = metrics::mean(&y);
        let eps = y.iter().map(|v| (v - mean).abs()).fold(0.0, f64::max);
        let ds = frame(vec![("t", tt)], y.clone());
        let m = fit_svr(
            &ds,
            &t(),
            SvrParams {
                epsilon: eps,
                c: 5.0,
                gamma: 1.0,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(m.support.is_empty());
        let ymax = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let ymin = y.iter().copied().fold(f64::INFINITY, f64::min);
        // every constant c with |y_i - c| <= eps is feasible
        assert!(
            m.bias >= ymax - eps - 1e-12 && m.bias <= ymin + eps + 1e-12,
            "{}",
            m.bias
        );
        assert!(ymax - eps <= mean && mean <= ymin + eps);
    }

    #[test]
    fn constant_response() {
        let ds = frame(vec![("t", vec![1.0, 2.0, 3.0, 4.0])], vec![7.5; 4]);
        let m = fit_svr(&ds, &t(), SvrParams::default()).unwrap();
        assert!(m.support.is_empty());
        assert_eq!(m.bias, 7.5);
        let m0 = fit_svr(
            &ds,
            &t(),
            SvrParams {
                epsilon: 0.0,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(m0.support.is_empty());
        assert_eq!(m0.bias, 7.5);
    }

    #[test]
    fn fits_a_sine() {
        let tt: Vec<f64> = (0..100)
            .map(|i| i as f64 * 2.0 * std::f64::consts::PI / 99.0)
            .collect();
        let y: Vec<f64> = tt.iter().map(|v| v.sin()).collect();
        let ds = frame(vec![("t", tt)], y.clone());
        let params = SvrParams {
            c: 10.0,
            gamma: 1.0,
            epsilon: 0.01,
            ..Default::default()
        };
        let m = fit_svr(&ds, &t(), params).unwrap();
        let rmse = metrics::rmse(&y, &m.predict(&ds).unwrap()).unwrap();
        assert!(rmse < 0.05, "rmse {rmse}");
        assert!(m.final_violation <= params.tol);
        let coefs = training_coefs(&m, &ds);
        assert!(coefs.iter().all(|a| a.abs() <= params.c));
        let v = max_sample_kkt_violation(&m, &ds, &coefs);
        assert!(v <= params.tol, "per-sample kkt {v}");
    }

    #[test]
    fn box_constraint_binds_with_small_c() {
        let tt: Vec<f64> = (0..40).map(|i| i as f64 / 4.0).collect();
        let y: Vec<f64> = tt
            .iter()
            .map(|v| 5.0 * v.cos() + if (*v as usize) % 3 == 0 { 3.0 } else { 0.0 })
            .collect();
        let ds = frame(vec![("t", tt)], y);
        let params = SvrParams {
            c: 0.5,
            gamma: 2.0,
            epsilon: 0.05,
            ..Default::default()
        };
        let m = fit_svr(&ds, &t(), params).unwrap();
        assert!(m.support.iter().any(|sv| sv.coef.abs() == params.c));
        assert!(m.support.iter().all(|sv| sv.coef.abs() <= params.c));
        let coefs = training_coefs(&m, &ds);
        assert!(max_sample_kkt_violation(&m, &ds, &coefs) <= params.tol);
    }

    #[test]
    fn iteration_cap_reports_violation() {
        let tt: Vec<f64> = (0..30).map(|i| i as f64).collect();
        let y: Vec<f64> = tt.iter().map(|v| v.sin()).collect();
        let ds = frame(vec![("t", tt)], y);
        let err = fit_svr(
            &ds,
            &t(),
            SvrParams {
                max_iter: Some(2),
                epsilon: 0.0,
                c: 100.0,
                gamma: 5.0,
                ..Default::default()
            },
        )
        .unwrap_err();
        assert!(
            matches!(err, Error::NotConverged { iterations: 2, violation } if violation > 1e-3)
        );
        assert!(fit_svr(
            &ds,
            &t(),
            SvrParams {
                c: 0.0,
                ..Default::default()
            }
        )
        .is_err());
    }
}
