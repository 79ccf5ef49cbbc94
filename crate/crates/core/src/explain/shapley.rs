use std::collections::HashMap;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{metrics, Column, Dataset};
use crate::error::{Error, Result};
use crate::models::Predict;
use crate::rng;

/// Largest player count accepted by exact mode.
pub const EXACT_MAX_FEATURES: usize = 15;
/// Sampled mode packs coalitions into a `u64` mask.
pub const SAMPLED_MAX_FEATURES: usize = 64;
/// Default background size.
pub const DEFAULT_BACKGROUND: usize = 64;
/// Hybrid rows per batched predict call.
const BATCH_ROWS: usize = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ShapleyMode {
    Exact,
    /// Random permutations; instance `i` draws from stream `(seed, i)`.
    Sampled {
        n_samples: usize,
        seed: u64,
    },
}

impl ShapleyMode {
    /// Exact when `p` allows it, sampled otherwise.
    pub fn auto(p: usize, n_samples: usize, seed: u64) -> Self {
        if p <= EXACT_MAX_FEATURES {
            ShapleyMode::Exact
        } else {
            ShapleyMode::Sampled { n_samples, seed }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapleyExplanation {
    pub instance: usize,
    pub features: Vec<String>,
    pub phi: Vec<f64>,
    /// Mean model prediction over the background.
    pub baseline: f64,
    pub prediction: f64,
    pub mode: ShapleyMode,
    /// Monte-Carlo standard errors, sampled mode only.
    pub std_errors: Option<Vec<f64>>,
}

impl ShapleyExplanation {
    /// `|sum(phi) - (prediction - baseline)|`.
    pub fn efficiency_gap(&self) -> f64 {
        (self.phi.iter().sum::<f64>() - (self.prediction - self.baseline)).abs()
    }
}

/// Indices of `min(max_rows, n)` rows drawn without replacement, ascending.
pub fn sample_rows(n: usize, max_rows: usize, seed: u64) -> Result<Vec<usize>> {
    if max_rows == 0 {
        return Err(Error::invalid("row sample needs at least one row"));
    }
    let mut rows: Vec<usize> = (0..n).collect();
    if rows.len() > max_rows {
        rows.shuffle(&mut rng::seeded(seed));
        rows.truncate(max_rows);
        rows.sort_unstable();
    }
    Ok(rows)
}

/// The rows chosen by [`sample_rows`].
pub fn background_sample(ds: &Dataset, max_rows: usize, seed: u64) -> Result<Dataset> {
    ds.select_rows(&sample_rows(ds.n_rows(), max_rows, seed)?)
}

/// Evaluates the marginal value function `v(S)` for one instance.
struct Game<'a> {
    model: &'a dyn Predict,
    instance: &'a Dataset,
    row: usize,
    background: &'a Dataset,
    /// Schema index of each player.
    players: Vec<usize>,
}

impl<'a> Game<'a> {
    fn new(
        model: &'a dyn Predict,
        instance: &'a Dataset,
        row: usize,
        background: &'a Dataset,
    ) -> Result<Self> {
        if background.schema() != instance.schema() {
            return Err(Error::SchemaMismatch(
                "background and instance schemas differ".into(),
            ));
        }
        if row >= instance.n_rows() {
            return Err(Error::invalid(format!(
                "row {row} out of range for {} rows",
                instance.n_rows()
            )));
        }
        let players = model
            .features()
            .iter()
            .map(|f| instance.schema().require_feature(f))
            .collect::<Result<Vec<_>>>()?;
        Ok(Game {
            model,
            instance,
            row,
            background,
            players,
        })
    }

    fn p(&self) -> usize {
        self.players.len()
    }

    /// Builds one hybrid frame covering `masks`, background-major within each mask.
    fn frame(&self, masks: &[u64]) -> Result<Dataset> {
        let m = self.background.n_rows();
        let background_rows: Vec<usize> = masks.iter().flat_map(|_| 0..m).collect();
        let columns = (0..self.instance.schema().len())
            .map(|c| {
                let bg = &self.background.columns()[c];
                let Some(j) = self.players.iter().position(|&p| p == c) else {
                    return bg.gather(&background_rows);
                };
                // index m selects the instance value
                let source = append(bg, &self.instance.columns()[c], self.row);
                let idx: Vec<usize> = masks
                    .iter()
                    .flat_map(|&mask| (0..m).map(move |b| if mask >> j & 1 == 1 { m } else { b }))
                    .collect();
                source.gather(&idx)
            })
            .collect();
        Dataset::new(self.instance.schema().clone(), columns, "shapley")
    }

    /// `v(S)` for each mask, averaged over background rows in order.
    fn values(&self, masks: &[u64]) -> Result<Vec<f64>> {
        let m = self.background.n_rows();
        let per_batch = (BATCH_ROWS / m).max(1);
        let mut out = Vec::with_capacity(masks.len());
        for chunk in masks.chunks(per_batch) {
            let preds = self.model.predict(&self.frame(chunk)?)?;
            out.extend(preds.chunks(m).map(|c| c.iter().sum::<f64>() / m as f64));
        }
        Ok(out)
    }

    fn prediction(&self) -> Result<f64> {
        Ok(self
            .model
            .predict(&self.instance.select_rows(&[self.row])?)?[0])
    }
}

fn append(base: &Column, other: &Column, row: usize) -> Column {
    match (base, other) {
        (Column::Numeric(v), Column::Numeric(o)) => {
            let mut v = v.clone();
            v.push(o[row]);
            Column::Numeric(v)
        }
        (Column::Categorical(v), Column::Categorical(o)) => {
            let mut v = v.clone();
            v.push(o[row].clone());
            Column::Categorical(v)
        }
        _ => unreachable!("schemas checked equal"),
    }
}

/// `|S|! (p - |S| - 1)! / p!` for every `|S|` in `0..p`.
fn shapley_weights(p: usize) -> Vec<f64> {
    let ln_fact: Vec<f64> = (0..=p)
        .scan(0.0, |acc, k| {
            if k > 0 {
                *acc += (k as f64).ln();
            }
            Some(*acc)
        })
        .collect();
    (0..p)
        .map(|s| (ln_fact[s] + ln_fact[p - s - 1] - ln_fact[p]).exp())
        .collect()
}

fn exact(game: &Game) -> Result<Vec<f64>> {
    let p = game.p();
    if p > EXACT_MAX_FEATURES {
        return Err(Error::TooManyFeatures {
            p,
            max: EXACT_MAX_FEATURES,
        });
    }
    let masks: Vec<u64> = (0..1u64 << p).collect();
    let v = game.values(&masks)?;
    let w = shapley_weights(p);
    Ok((0..p)
        .map(|i| {
            let bit = 1u64 << i;
            masks
                .iter()
                .filter(|&&s| s & bit == 0)
                .map(|&s| w[s.count_ones() as usize] * (v[(s | bit) as usize] - v[s as usize]))
                .sum()
        })
        .collect())
}

/// Permutation sampling over exactly evaluated coalitions, so the
/// contributions of every permutation telescope to `v(N) - v(∅)`.
fn sampled(
    game: &Game,
    n_samples: usize,
    stream_seed: u64,
    index: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let p = game.p();
    if p > SAMPLED_MAX_FEATURES {
        return Err(Error::TooManyFeatures {
            p,
            max: SAMPLED_MAX_FEATURES,
        });
    }
    if n_samples == 0 {
        return Err(Error::invalid("n_samples must be at least 1"));
    }
    let mut stream = rng::stream(stream_seed, index as u64);
    let mut order: Vec<usize> = (0..p).collect();
    let perms: Vec<Vec<usize>> = (0..n_samples)
        .map(|_| {
            order.shuffle(&mut stream);
            order.clone()
        })
        .collect();

    let mut slot: HashMap<u64, usize> = HashMap::new();
    let mut masks = Vec::new();
    let mut intern = |mask: u64| {
        *slot.entry(mask).or_insert_with(|| {
            masks.push(mask);
            masks.len() - 1
        })
    };
    let walks: Vec<Vec<usize>> = perms
        .iter()
        .map(|perm| {
            let mut mask = 0u64;
            let mut walk = vec![intern(0)];
            for &i in perm {
                mask |= 1 << i;
                walk.push(intern(mask));
            }
            walk
        })
        .collect();
    let v = game.values(&masks)?;

    let mut sum = vec![0.0; p];
    let mut sum_sq = vec![0.0; p];
    for (perm, walk) in perms.iter().zip(&walks) {
        for (step, &i) in perm.iter().enumerate() {
            let d = v[walk[step + 1]] - v[walk[step]];
            sum[i] += d;
            sum_sq[i] += d * d;
        }
    }
    let n = n_samples as f64;
    let phi: Vec<f64> = sum.iter().map(|s| s / n).collect();
    let se = phi
        .iter()
        .zip(&sum_sq)
        .map(|(m, sq)| {
            if n_samples < 2 {
                return 0.0;
            }
            let var = ((sq - n * m * m) / (n - 1.0)).max(0.0);
            (var / n).sqrt()
        })
        .collect();
    Ok((phi, se))
}

/// Shapley values of `model` at `row` of `instance` under the marginal
/// value function over `background`. Players are the model's features.
pub fn shapley_values(
    model: &dyn Predict,
    instance: &Dataset,
    row: usize,
    background: &Dataset,
    mode: ShapleyMode,
) -> Result<ShapleyExplanation> {
    let game = Game::new(model, instance, row, background)?;
    let baseline = metrics::mean(&model.predict(background)?);
    let (phi, std_errors) = match mode {
        ShapleyMode::Exact => (exact(&game)?, None),
        ShapleyMode::Sampled { n_samples, seed } => {
            let (phi, se) = sampled(&game, n_samples, seed, row)?;
            (phi, Some(se))
        }
    };
    Ok(ShapleyExplanation {
        instance: row,
        features: model.features(),
        phi,
        baseline,
        prediction: game.prediction()?,
        mode,
        std_errors,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSummary {
    pub name: String,
    pub mean_abs_phi: f64,
    /// Sign of the Spearman correlation between feature value and φ.
    pub trend_sign: i8,
    /// Feature value per explained row; categorical levels by sorted rank.
    pub values: Vec<f64>,
    pub phi: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapleySummary {
    pub mode: ShapleyMode,
    pub baseline: f64,
    pub rows: Vec<usize>,
    pub features: Vec<FeatureSummary>,
    /// Largest efficiency gap over explained rows.
    pub max_efficiency_gap: f64,
}

impl ShapleySummary {
    pub fn feature(&self, name: &str) -> Option<&FeatureSummary> {
        self.features.iter().find(|f| f.name == name)
    }

    /// Feature names by decreasing mean |φ|; ties keep model order.
    pub fn ranking(&self) -> Vec<String> {
        let mut v: Vec<&FeatureSummary> = self.features.iter().collect();
        v.sort_by(|a, b| b.mean_abs_phi.total_cmp(&a.mean_abs_phi));
        v.into_iter().map(|f| f.name.clone()).collect()
    }
}

fn sign(x: Option<f64>) -> i8 {
    match x {
        Some(r) if r > 0.0 => 1,
        Some(r) if r < 0.0 => -1,
        _ => 0,
    }
}

fn numeric_view(col: &Column) -> Vec<f64> {
    match col {
        Column::Numeric(v) => v.clone(),
        Column::Categorical(v) => {
            let mut levels: Vec<&String> = v.iter().collect();
            levels.sort();
            levels.dedup();
            v.iter()
                .map(|s| levels.binary_search(&s).expect("level present") as f64)
                .collect()
        }
    }
}

/// Explains every row of `ds` and aggregates per feature.
pub fn shapley_summary(
    model: &dyn Predict,
    ds: &Dataset,
    background: &Dataset,
    mode: ShapleyMode,
) -> Result<ShapleySummary> {
    let explanations = (0..ds.n_rows())
        .into_par_iter()
        .map(|row| shapley_values(model, ds, row, background, mode))
        .collect::<Result<Vec<_>>>()?;
    let names = model.features();
    let features = names
        .iter()
        .enumerate()
        .map(|(j, name)| -> Result<FeatureSummary> {
            let phi: Vec<f64> = explanations.iter().map(|e| e.phi[j]).collect();
            let values = numeric_view(ds.column(name)?);
            let trend = if phi.len() > 1 {
                metrics::spearman(&values, &phi)?
            } else {
                None
            };
            Ok(FeatureSummary {
                name: name.clone(),
                mean_abs_phi: phi.iter().map(|v| v.abs()).sum::<f64>() / phi.len() as f64,
                trend_sign: sign(trend),
                values,
                phi,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ShapleySummary {
        mode,
        baseline: explanations[0].baseline,
        rows: (0..ds.n_rows()).collect(),
        features,
        max_efficiency_gap: explanations
            .iter()
            .map(ShapleyExplanation::efficiency_gap)
            .fold(0.0, f64::max),
    })
}
