//! Seeded synthetic datasets with known generating laws.
//!
//! The grid generator mimics a factorial experiment: two design variables
//! on a small level grid, a log-linear response with their interaction,
//! and independent nuisance measurements. The wall generator draws a drift
//! response from a slenderness term and an axial-load term, with the other
//! design ratios optionally correlated to them.

use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{Column, Dataset, FeatureSchema, Schema};
use crate::error::{Error, Result};
use crate::rng;

/// Nominal sampling interval of a feature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub low: f64,
    pub high: f64,
}

impl Range {
    pub const fn new(low: f64, high: f64) -> Self {
        Range { low, high }
    }

    fn validate(&self, name: &str) -> Result<()> {
        if !(self.low.is_finite() && self.high.is_finite() && self.low < self.high) {
            return Err(Error::invalid(format!(
                "range for `{name}` must satisfy low < high"
            )));
        }
        Ok(())
    }

    fn center(&self) -> f64 {
        0.5 * (self.low + self.high)
    }

    /// Scale that maps a unit-variance draw onto the range's uniform spread.
    fn spread(&self) -> f64 {
        (self.high - self.low) / 12f64.sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedRange {
    pub name: String,
    pub low: f64,
    pub high: f64,
}

impl NamedRange {
    fn new(name: &str, low: f64, high: f64) -> Self {
        NamedRange {
            name: name.into(),
            low,
            high,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Counts {
    Balanced(usize),
    /// `counts[i][j]` rows at the i-th `t` level and j-th `Lsl` level.
    Matrix(Vec<Vec<usize>>),
}

/// Coefficients of the log-scale mean `b0 + b1 t + b2 Lsl + b3 t Lsl`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridLaw {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub b3: f64,
}

impl GridLaw {
    pub fn log_mean(&self, t: f64, lsl: f64) -> f64 {
        self.b0 + self.b1 * t + self.b2 * lsl + self.b3 * t * lsl
    }
}

pub const GRID_RESPONSE: &str = "Vcr";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridGenSpec {
    pub t_levels: Vec<f64>,
    pub lsl_levels: Vec<f64>,
    pub counts: Counts,
    pub law: GridLaw,
    /// Standard deviation of the log-scale noise.
    pub noise_sd: f64,
    pub nuisance: Vec<NamedRange>,
    pub seed: u64,
}

impl Default for GridGenSpec {
    /// The calibrated configuration used by the acceptance suite.
    fn default() -> Self {
        GridGenSpec {
            t_levels: vec![1.0, 1.5, 2.0],
            lsl_levels: vec![600.0, 900.0, 1200.0],
            counts: Counts::Matrix(vec![
                vec![400, 380, 412],
                vec![390, 395, 385],
                vec![405, 375, 370],
            ]),
            law: GridLaw {
                b0: 9.0,
                b1: 1.6,
                b2: -0.001,
                b3: 0.0001,
            },
            noise_sd: 0.06,
            nuisance: vec![
                NamedRange::new("D", 100.0, 300.0),
                NamedRange::new("B", 40.0, 90.0),
                NamedRange::new("B1", 10.0, 25.0),
                NamedRange::new("Wsl", 20.0, 60.0),
                NamedRange::new("Ssl", 100.0, 400.0),
                NamedRange::new("Bsl", 50.0, 150.0),
                NamedRange::new("N", 1.0, 4.0),
                NamedRange::new("n", 2.0, 8.0),
                NamedRange::new("fy", 230.0, 550.0),
                NamedRange::new("r", 1.0, 5.0),
                NamedRange::new("a_h", 0.5, 3.0),
                NamedRange::new("hst", 100.0, 400.0),
            ],
            seed: 0,
        }
    }
}

fn distinct(levels: &[f64], name: &str) -> Result<()> {
    if levels.is_empty() || levels.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid(format!(
            "{name} needs at least one finite level"
        )));
    }
    let mut s = levels.to_vec();
    s.sort_by(f64::total_cmp);
    if s.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::invalid(format!("{name} contains repeated levels")));
    }
    Ok(())
}

impl GridGenSpec {
    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn count(&self, i: usize, j: usize) -> usize {
        match &self.counts {
            Counts::Balanced(c) => *c,
            Counts::Matrix(m) => m[i][j],
        }
    }

    pub fn n_rows(&self) -> usize {
        (0..self.t_levels.len())
            .flat_map(|i| (0..self.lsl_levels.len()).map(move |j| (i, j)))
            .map(|(i, j)| self.count(i, j))
            .sum()
    }

    pub fn schema(&self) -> Result<Schema> {
        let mut cols = vec![
            FeatureSchema::numeric("t").with_units("mm"),
            FeatureSchema::numeric("Lsl").with_units("mm"),
        ];
        cols.extend(
            self.nuisance
                .iter()
                .map(|r| FeatureSchema::numeric(&r.name)),
        );
        cols.push(FeatureSchema::response(GRID_RESPONSE).with_units("N"));
        Schema::new(cols)
    }

    pub fn validate(&self) -> Result<()> {
        distinct(&self.t_levels, "t_levels")?;
        distinct(&self.lsl_levels, "lsl_levels")?;
        match &self.counts {
            Counts::Balanced(0) => return Err(Error::invalid("counts must be at least 1")),
            Counts::Balanced(_) => {}
            Counts::Matrix(m) => {
                if m.len() != self.t_levels.len()
                    || m.iter().any(|r| r.len() != self.lsl_levels.len())
                {
                    return Err(Error::invalid(
                        "counts matrix must be |t_levels| x |lsl_levels|",
                    ));
                }
                if m.iter().flatten().any(|&c| c == 0) {
                    return Err(Error::invalid("counts must be at least 1"));
                }
            }
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return Err(Error::invalid("noise_sd must be finite and non-negative"));
        }
        for r in &self.nuisance {
            Range::new(r.low, r.high).validate(&r.name)?;
        }
        self.schema().map(|_| ())
    }
}

/// Rows ordered by `t` level, then `Lsl` level; nuisance features are
/// independent uniforms and the response is log-normal around the law.
pub fn gen_grid_dataset(spec: &GridGenSpec) -> Result<Dataset> {
    spec.validate()?;
    let n = spec.n_rows();
    let mut r = rng::seeded(spec.seed);
    let noise = Normal::new(0.0, spec.noise_sd).map_err(|e| Error::invalid(e.to_string()))?;
    let mut t = Vec::with_capacity(n);
    let mut lsl = Vec::with_capacity(n);
    let mut nuisance: Vec<Vec<f64>> = vec![Vec::with_capacity(n); spec.nuisance.len()];
    let mut y = Vec::with_capacity(n);
    for (i, &tv) in spec.t_levels.iter().enumerate() {
        for (j, &lv) in spec.lsl_levels.iter().enumerate() {
            for _ in 0..spec.count(i, j) {
                t.push(tv);
                lsl.push(lv);
                for (col, range) in nuisance.iter_mut().zip(&spec.nuisance) {
                    col.push(r.gen_range(range.low..range.high));
                }
                y.push((spec.law.log_mean(tv, lv) + noise.sample(&mut r)).exp());
            }
        }
    }
    let mut columns = vec![Column::Numeric(t), Column::Numeric(lsl)];
    columns.extend(nuisance.into_iter().map(Column::Numeric));
    columns.push(Column::Numeric(y));
    Dataset::new(
        spec.schema()?,
        columns,
        format!("gen_grid(seed={})", spec.seed),
    )
}

pub const WALL_RESPONSE: &str = "drift";
/// The two features in the drift law.
pub const WALL_PHYSICS: [&str; 2] = ["lambda_b", "nu_max"];
pub const WALL_FEATURES: [&str; 11] = [
    "lambda_b",
    "nu_max",
    "s_db",
    "Ash_ratio",
    "P_fcAg",
    "hx_b",
    "rho_lBE",
    "rho_tw",
    "c_lw",
    "lBE_lw",
    "fu_fy",
];
/// Generated drift never falls below this.
pub const MIN_DRIFT: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub a: String,
    pub b: String,
    pub rho: f64,
}

impl Correlation {
    pub fn new(a: &str, b: &str, rho: f64) -> Self {
        Correlation {
            a: a.into(),
            b: b.into(),
            rho,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WallGenSpec {
    pub n: usize,
    pub alpha: f64,
    pub noise_sd: f64,
    /// One entry per wall feature, in `WALL_FEATURES` order.
    pub ranges: Vec<NamedRange>,
    /// Target correlations between features; unlisted pairs are 0.
    pub correlations: Vec<Correlation>,
    pub seed: u64,
}

impl Default for WallGenSpec {
    fn default() -> Self {
        WallGenSpec {
            n: 164,
            alpha: 50.0,
            noise_sd: 0.15,
            ranges: vec![
                NamedRange::new("lambda_b", 5.0, 60.0),
                NamedRange::new("nu_max", 1.0, 10.0),
                NamedRange::new("s_db", 3.0, 12.0),
                NamedRange::new("Ash_ratio", 0.3, 2.0),
                NamedRange::new("P_fcAg", 0.02, 0.35),
                NamedRange::new("hx_b", 0.3, 1.0),
                NamedRange::new("rho_lBE", 0.01, 0.06),
                NamedRange::new("rho_tw", 0.002, 0.012),
                NamedRange::new("c_lw", 0.1, 0.4),
                NamedRange::new("lBE_lw", 0.05, 0.3),
                NamedRange::new("fu_fy", 1.2, 1.6),
            ],
            correlations: vec![
                Correlation::new("c_lw", "lambda_b", 0.4),
                Correlation::new("lBE_lw", "lambda_b", 0.3),
                Correlation::new("P_fcAg", "nu_max", 0.3),
            ],
            seed: 0,
        }
    }
}

impl WallGenSpec {
    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// One-factor structure: every non-physics feature correlates `rho`
    /// with `nu_max` and `rho²` with each other.
    pub fn with_nuisance_correlation(mut self, rho: f64) -> Self {
        let nuisance = &WALL_FEATURES[2..];
        self.correlations = nuisance
            .iter()
            .map(|f| Correlation::new(f, "nu_max", rho))
            .collect();
        for (i, a) in nuisance.iter().enumerate() {
            for b in &nuisance[i + 1..] {
                self.correlations.push(Correlation::new(a, b, rho * rho));
            }
        }
        self
    }

    pub fn schema(&self) -> Result<Schema> {
        let mut cols: Vec<FeatureSchema> = WALL_FEATURES
            .iter()
            .map(|f| FeatureSchema::numeric(*f))
            .collect();
        cols.push(FeatureSchema::response(WALL_RESPONSE).with_units("%"));
        Schema::new(cols)
    }

    fn range(&self, j: usize) -> Range {
        let r = &self.ranges[j];
        Range::new(r.low, r.high)
    }

    /// The full target correlation matrix in `WALL_FEATURES` order.
    pub fn correlation_matrix(&self) -> Result<DMatrix<f64>> {
        let p = WALL_FEATURES.len();
        let index = |name: &str| {
            WALL_FEATURES
                .iter()
                .position(|f| *f == name)
                .ok_or_else(|| Error::UnknownFeature(name.into()))
        };
        let mut c = DMatrix::identity(p, p);
        for corr in &self.correlations {
            let (a, b) = (index(&corr.a)?, index(&corr.b)?);
            if a == b || !(-1.0..=1.0).contains(&corr.rho) {
                return Err(Error::invalid(format!(
                    "correlation {}~{} must join two features with |rho| <= 1",
                    corr.a, corr.b
                )));
            }
            c[(a, b)] = corr.rho;
            c[(b, a)] = corr.rho;
        }
        let min_eig = SymmetricEigen::new(c.clone()).eigenvalues.min();
        if min_eig < -1e-10 {
            return Err(Error::NotPsd(min_eig));
        }
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::invalid("n must be at least 2"));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::invalid("alpha must be positive"));
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return Err(Error::invalid("noise_sd must be finite and non-negative"));
        }
        let names: Vec<&str> = self.ranges.iter().map(|r| r.name.as_str()).collect();
        if names != WALL_FEATURES {
            return Err(Error::invalid(format!(
                "ranges must list {WALL_FEATURES:?} in order"
            )));
        }
        for (j, name) in WALL_FEATURES.iter().enumerate() {
            self.range(j).validate(name)?;
        }
        self.correlation_matrix().map(|_| ())
    }

    pub fn law(&self, lambda_b: f64, nu: f64) -> f64 {
        3.85 - lambda_b / self.alpha - nu / 10.0
    }
}

/// Lower-triangular factor of a PSD matrix; singular matrices get a
/// vanishing diagonal jitter.
fn factor(c: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let p = c.nrows();
    for jitter in [0.0, 1e-12, 1e-10, 1e-8] {
        let m = c + DMatrix::identity(p, p) * jitter;
        if let Some(ch) = m.cholesky() {
            return Ok(ch.l());
        }
    }
    Err(Error::NotPsd(
        SymmetricEigen::new(c.clone()).eigenvalues.min(),
    ))
}

/// Features are unit-variance uniforms mixed through the Cholesky factor of
/// the target correlation matrix, then mapped affinely onto their ranges.
/// Features with no correlation to earlier ones stay exactly uniform.
pub fn gen_wall_dataset(spec: &WallGenSpec) -> Result<Dataset> {
    spec.validate()?;
    let l = factor(&spec.correlation_matrix()?)?;
    let p = WALL_FEATURES.len();
    let mut r = rng::seeded(spec.seed);
    let noise = Normal::new(0.0, spec.noise_sd).map_err(|e| Error::invalid(e.to_string()))?;
    let half = 3f64.sqrt();
    let mut cols: Vec<Vec<f64>> = vec![Vec::with_capacity(spec.n); p];
    let mut drift = Vec::with_capacity(spec.n);
    let mut z = vec![0.0; p];
    for _ in 0..spec.n {
        for v in z.iter_mut() {
            *v = r.gen_range(-half..half);
        }
        for (j, col) in cols.iter_mut().enumerate() {
            let x: f64 = (0..=j).map(|k| l[(j, k)] * z[k]).sum();
            let range = spec.range(j);
            col.push(range.center() + range.spread() * x);
        }
        let last = cols[0].len() - 1;
        let d = spec.law(cols[0][last], cols[1][last]) + noise.sample(&mut r);
        drift.push(d.max(MIN_DRIFT));
    }
    let mut columns: Vec<Column> = cols.into_iter().map(Column::Numeric).collect();
    columns.push(Column::Numeric(drift));
    Dataset::new(
        spec.schema()?,
        columns,
        format!("gen_wall(seed={})", spec.seed),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{metrics, unique_combinations};
    use crate::formula::parse_formula;
    use crate::models::{fit_ols, LinearModel};

    #[test]
    fn balanced_grid_has_nine_groups_of_ten() {
        let spec = GridGenSpec {
            counts: Counts::Balanced(10),
            ..Default::default()
        };
        let ds = gen_grid_dataset(&spec).unwrap();
        assert_eq!(ds.n_rows(), 90);
        let groups = unique_combinations(&ds, &["t".into(), "Lsl".into()]).unwrap();
        assert_eq!(groups.len(), 9);
        assert!(groups.iter().all(|(_, c)| *c == 10));
    }

    #[test]
    fn default_grid_shape() {
        let spec = GridGenSpec::default();
        let ds = gen_grid_dataset(&spec).unwrap();
        assert_eq!(ds.n_rows(), 3512);
        assert_eq!(ds.feature_names().len(), 14);
        assert!(ds.response().iter().all(|&v| v > 0.0));
    }

    #[test]
    fn noiseless_grid_is_recovered_exactly() {
        let spec = GridGenSpec {
            counts: Counts::Balanced(4),
            noise_sd: 0.0,
            ..Default::default()
        };
        let ds = gen_grid_dataset(&spec).unwrap();
        let f = parse_formula("log(Vcr) ~ t + Lsl + t:Lsl").unwrap();
        let lm = LinearModel::fit(&f, &ds).unwrap();
        let yhat = lm.predict(&ds).unwrap();
        assert!((metrics::r_squared(ds.response(), &yhat).unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn noiseless_wall_recovers_law() {
        let spec = WallGenSpec {
            noise_sd: 0.0,
            ..Default::default()
        };
        let ds = gen_wall_dataset(&spec).unwrap();
        let dm = crate::formula::design_matrix(
            &parse_formula("drift ~ lambda_b + nu_max").unwrap(),
            &ds,
        )
        .unwrap();
        let fit = fit_ols(&dm).unwrap();
        let expected = [3.85, -1.0 / 50.0, -0.1];
        for (b, e) in fit.coefficients.iter().zip(expected) {
            assert!((b - e).abs() < 1e-8, "{b} vs {e}");
        }
    }

    #[test]
    fn generators_are_reproducible() {
        let g = GridGenSpec {
            counts: Counts::Balanced(5),
            seed: 3,
            ..Default::default()
        };
        assert_eq!(
            gen_grid_dataset(&g).unwrap().to_csv_string(),
            gen_grid_dataset(&g).unwrap().to_csv_string()
        );
        let w = WallGenSpec {
            seed: 3,
            ..Default::default()
        };
        assert_eq!(
            gen_wall_dataset(&w).unwrap().to_csv_string(),
            gen_wall_dataset(&w).unwrap().to_csv_string()
        );
        let w2 = WallGenSpec { seed: 4, ..w };
        assert_ne!(
            gen_wall_dataset(&w2).unwrap().to_csv_string(),
            gen_wall_dataset(&WallGenSpec::default())
                .unwrap()
                .to_csv_string()
        );
    }

    #[test]
    fn empirical_correlations_track_targets() {
        let spec = WallGenSpec {
            n: 4000,
            seed: 11,
            correlations: vec![
                Correlation::new("s_db", "nu_max", 0.7),
                Correlation::new("hx_b", "lambda_b", -0.5),
                Correlation::new("fu_fy", "nu_max", 0.6),
            ],
            ..Default::default()
        };
        let ds = gen_wall_dataset(&spec).unwrap();
        let c = spec.correlation_matrix().unwrap();
        for (a, b) in [
            ("s_db", "nu_max"),
            ("hx_b", "lambda_b"),
            ("fu_fy", "nu_max"),
            ("fu_fy", "s_db"),
            ("rho_tw", "nu_max"),
        ] {
            let ia = WALL_FEATURES.iter().position(|f| *f == a).unwrap();
            let ib = WALL_FEATURES.iter().position(|f| *f == b).unwrap();
            let r = metrics::pearson(ds.numeric(a).unwrap(), ds.numeric(b).unwrap())
                .unwrap()
                .unwrap();
            assert!((r - c[(ia, ib)]).abs() < 0.1, "{a}~{b}: {r}");
        }
        let lambda = ds.numeric("lambda_b").unwrap();
        assert!(lambda.iter().all(|&v| (5.0..60.0).contains(&v)));
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let not_psd = WallGenSpec {
            correlations: vec![
                Correlation::new("s_db", "nu_max", 0.9),
                Correlation::new("hx_b", "nu_max", 0.9),
                Correlation::new("s_db", "hx_b", -0.9),
            ],
            ..Default::default()
        };
        assert!(matches!(gen_wall_dataset(&not_psd), Err(Error::NotPsd(_))));
        let mut star = WallGenSpec::default().with_nuisance_correlation(0.6);
        star.correlations.retain(|c| c.b == "nu_max");
        assert!(matches!(gen_wall_dataset(&star), Err(Error::NotPsd(_))));
        let degenerate = WallGenSpec::default().with_nuisance_correlation(1.0);
        let ds = gen_wall_dataset(&degenerate).unwrap();
        let r = metrics::pearson(ds.numeric("s_db").unwrap(), ds.numeric("nu_max").unwrap())
            .unwrap()
            .unwrap();
        assert!(r > 0.999);
        let bad_feature = WallGenSpec {
            correlations: vec![Correlation::new("zz", "nu_max", 0.2)],
            ..Default::default()
        };
        assert!(gen_wall_dataset(&bad_feature).is_err());
        let zero_count = GridGenSpec {
            counts: Counts::Matrix(vec![vec![1, 0, 1], vec![1; 3], vec![1; 3]]),
            ..Default::default()
        };
        assert!(gen_grid_dataset(&zero_count).is_err());
        let dup = GridGenSpec {
            t_levels: vec![1.0, 1.0, 2.0],
            ..Default::default()
        };
        assert!(gen_grid_dataset(&dup).is_err());
        let negative = GridGenSpec {
            noise_sd: -1.0,
            ..Default::default()
        };
        assert!(gen_grid_dataset(&negative).is_err());
    }

    #[test]
    fn specs_load_from_partial_json() {
        let g: GridGenSpec = serde_json::from_str(r#"{"counts": 2, "seed": 5}"#).unwrap();
        assert_eq!(g.n_rows(), 18);
        let w: WallGenSpec = serde_json::from_str(r#"{"n": 30, "alpha": 40}"#).unwrap();
        assert_eq!(gen_wall_dataset(&w).unwrap().n_rows(), 30);
    }
}
