//! CART regression trees grown by greedy variance reduction.

use rand::seq::index;
use serde::{Deserialize, Serialize};

use super::encode::{FeatureEncoder, Matrix};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::rng::{self, Rng};

/// Candidate features examined at each split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Mtry {
    Count(usize),
    Rule(MtryRule),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MtryRule {
    /// Every encoded column.
    All,
    /// `max(1, floor(p / 3))`.
    Third,
}

impl Mtry {
    pub const ALL: Mtry = Mtry::Rule(MtryRule::All);
    pub const THIRD: Mtry = Mtry::Rule(MtryRule::Third);

    pub fn resolve(self, p: usize) -> usize {
        match self {
            Mtry::Count(k) => k.clamp(1, p.max(1)),
            Mtry::Rule(MtryRule::All) => p,
            Mtry::Rule(MtryRule::Third) => (p / 3).max(1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    /// `None` grows until leaves are pure or too small.
    #[serde(default)]
    pub max_depth: Option<usize>,
    #[serde(default = "default_min_leaf")]
    pub min_leaf: usize,
    #[serde(default = "default_tree_mtry")]
    pub mtry: Mtry,
    #[serde(default)]
    pub seed: u64,
}

fn default_min_leaf() -> usize {
    1
}

fn default_tree_mtry() -> Mtry {
    Mtry::ALL
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: None,
            min_leaf: 1,
            mtry: Mtry::ALL,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "lowercase")]
pub enum Node {
    Leaf {
        value: f64,
        n: usize,
    },
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// Flat node arena; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeNodes {
    pub nodes: Vec<Node>,
}

impl TreeNodes {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { value, .. } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if row[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    }
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, *left).max(go(nodes, *right)),
            }
        }
        go(&self.nodes, 0)
    }

    pub fn leaves(&self) -> impl Iterator<Item = (f64, usize)> + '_ {
        self.nodes.iter().filter_map(|n| match n {
            Node::Leaf { value, n } => Some((*value, *n)),
            Node::Split { .. } => None,
        })
    }

    /// Encoded columns used by at least one split.
    pub fn split_features(&self) -> Vec<usize> {
        let mut f: Vec<usize> = self
            .nodes
            .iter()
            .filter_map(|n| match n {
                Node::Split { feature, .. } => Some(*feature),
                Node::Leaf { .. } => None,
            })
            .collect();
        f.sort_unstable();
        f.dedup();
        f
    }
}

struct Grower<'a> {
    x: &'a Matrix,
    y: &'a [f64],
    max_depth: usize,
    min_leaf: usize,
    mtry: usize,
    rng: Rng,
    nodes: Vec<Node>,
    scratch: Vec<(f64, f64)>,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    score: f64,
}

impl Grower<'_> {
    fn grow(&mut self, rows: &mut [usize], depth: usize) -> usize {
        let n = rows.len();
        let sum: f64 = rows.iter().map(|&r| self.y[r]).sum();
        let mean = sum / n as f64;
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { value: mean, n });

        if depth >= self.max_depth || n < 2 * self.min_leaf {
            return id;
        }
        let sse: f64 = rows.iter().map(|&r| (self.y[r] - mean).powi(2)).sum();
        if sse <= 0.0 {
            return id;
        }
        let Some(best) = self.best_split(rows, sum) else {
            return id;
        };
        // weighted variance must strictly drop
        let gain = best.score - sum * sum / n as f64;
        if !(gain > 1e-12 * sse) {
            return id;
        }

        let mut k = 0;
        for i in 0..n {
            if self.x.get(rows[i], best.feature) <= best.threshold {
                rows.swap(i, k);
                k += 1;
            }
        }
        let (left_rows, right_rows) = rows.split_at_mut(k);
        let left = self.grow(left_rows, depth + 1);
        let right = self.grow(right_rows, depth + 1);
        self.nodes[id] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
        };
        id
    }

    /// Maximizes `S_L^2 / n_L + S_R^2 / n_R`; features are visited in
    /// ascending index and thresholds ascending, so strict improvement
    /// keeps the lowest (feature, threshold) among ties.
    fn best_split(&mut self, rows: &[usize], total: f64) -> Option<BestSplit> {
        let p = self.x.cols;
        let mut candidates: Vec<usize> = if self.mtry >= p {
            (0..p).collect()
        } else {
            index::sample(&mut self.rng, p, self.mtry).into_vec()
        };
        candidates.sort_unstable();

        let n = rows.len();
        let min_leaf = self.min_leaf;
        let mut best: Option<BestSplit> = None;
        for &f in &candidates {
            self.scratch.clear();
            self.scratch
                .extend(rows.iter().map(|&r| (self.x.get(r, f), self.y[r])));
            self.scratch.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
            if self.scratch[0].0 == self.scratch[n - 1].0 {
                continue;
            }
            let mut left_sum = 0.0;
            for i in 1..n {
                left_sum += self.scratch[i - 1].1;
                if i < min_leaf || n - i < min_leaf {
                    continue;
                }
                let (lo, hi) = (self.scratch[i - 1].0, self.scratch[i].0);
                if lo == hi {
                    continue;
                }
                let right_sum = total - left_sum;
                let score = left_sum * left_sum / i as f64 + right_sum * right_sum / (n - i) as f64;
                if best.as_ref().map_or(true, |b| score > b.score) {
                    let mid = 0.5 * (lo + hi);
                    let threshold = if mid < hi { mid } else { lo };
                    best = Some(BestSplit {
                        feature: f,
                        threshold,
                        score,
                    });
                }
            }
        }
        best
    }
}

/// Grows one tree on the given rows of an encoded matrix.
pub(crate) fn grow_tree(
    x: &Matrix,
    y: &[f64],
    mut rows: Vec<usize>,
    max_depth: Option<usize>,
    min_leaf: usize,
    mtry: usize,
    rng: Rng,
) -> TreeNodes {
    let mut g = Grower {
        x,
        y,
        max_depth: max_depth.unwrap_or(usize::MAX),
        min_leaf,
        mtry,
        rng,
        nodes: Vec::new(),
        scratch: Vec::with_capacity(rows.len()),
    };
    g.grow(&mut rows, 0);
    TreeNodes { nodes: g.nodes }
}

pub(crate) fn check_params(n: usize, features: &[String], min_leaf: usize) -> Result<()> {
    if features.is_empty() {
        return Err(Error::invalid("empty feature list"));
    }
    if min_leaf == 0 {
        return Err(Error::invalid("min_leaf must be at least 1"));
    }
    if min_leaf > n {
        return Err(Error::invalid(format!(
            "min_leaf {min_leaf} exceeds {n} rows"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub params: TreeParams,
    pub encoder: FeatureEncoder,
    pub tree: TreeNodes,
}

impl RegressionTree {
    pub fn fit(ds: &Dataset, features: &[String], params: TreeParams) -> Result<Self> {
        check_params(ds.n_rows(), features, params.min_leaf)?;
        let encoder = FeatureEncoder::learn(ds, features)?;
        let x = encoder.encode(ds)?;
        let tree = grow_tree(
            &x,
            ds.response(),
            (0..ds.n_rows()).collect(),
            params.max_depth,
            params.min_leaf,
            params.mtry.resolve(x.cols),
            rng::seeded(params.seed),
        );
        Ok(RegressionTree {
            params,
            encoder,
            tree,
        })
    }

    pub fn predict(&self, ds: &Dataset) -> Result<Vec<f64>> {
        let x = self.encoder.encode(ds)?;
        Ok((0..x.rows)
            .map(|i| self.tree.predict_row(x.row(i)))
            .collect())
    }
}

pub fn fit_tree(ds: &Dataset, features: &[String], params: TreeParams) -> Result<RegressionTree> {
    RegressionTree::fit(ds, features, params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Column, FeatureSchema, Schema};
    use proptest::prelude::*;

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

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn depth_zero_is_the_mean() {
        let ds = frame(vec![("t", vec![1.0, 2.0, 3.0])], vec![1.0, 2.0, 6.0]);
        let params = TreeParams {
            max_depth: Some(0),
            ..Default::default()
        };
        let tree = fit_tree(&ds, &names(&["t"]), params).unwrap();
        assert_eq!(tree.tree.nodes, vec![Node::Leaf { value: 3.0, n: 3 }]);
    }

    /// Exhaustive split search used as an independent check.
    fn brute_force_split(x: &[f64], y: &[f64], min_leaf: usize) -> (f64, f64, f64) {
        let mut vals = x.to_vec();
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        let mut best = (f64::INFINITY, f64::NAN, f64::NAN);
        for w in vals.windows(2) {
            let thr = 0.5 * (w[0] + w[1]);
            let (l, r): (Vec<_>, Vec<_>) = x.iter().zip(y).partition(|(xi, _)| **xi <= thr);
            if l.len() < min_leaf || r.len() < min_leaf {
                continue;
            }
            let sse = |s: &[(&f64, &f64)]| {
                let m = s.iter().map(|p| *p.1).sum::<f64>() / s.len() as f64;
                s.iter().map(|p| (p.1 - m).powi(2)).sum::<f64>()
            };
            let total = sse(&l) + sse(&r);
            if total < best.0 {
                let lm = l.iter().map(|p| *p.1).sum::<f64>() / l.len() as f64;
                let rm = r.iter().map(|p| *p.1).sum::<f64>() / r.len() as f64;
                best = (total, lm, rm);
            }
        }
        best
    }

    #[test]
    fn step_function_splits_at_five() {
        let t: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let y: Vec<f64> = t.iter().map(|v| if *v < 5.0 { 0.0 } else { 1.0 }).collect();
        let (sse, lm, rm) = brute_force_split(&t, &y, 1);
        assert_eq!((sse, lm, rm), (0.0, 0.0, 1.0));

        let ds = frame(vec![("t", t)], y);
        let params = TreeParams {
            max_depth: Some(1),
            ..Default::default()
        };
        let tree = fit_tree(&ds, &names(&["t"]), params).unwrap();
        match &tree.tree.nodes[0] {
            Node::Split {
                feature, threshold, ..
            } => {
                assert_eq!(*feature, 0);
                assert_eq!(*threshold, 4.5);
            }
            other => panic!("{other:?}"),
        }
        let leaves: Vec<f64> = tree.tree.leaves().map(|(v, _)| v).collect();
        assert_eq!(leaves, vec![lm, rm]);
    }

    #[test]
    fn min_leaf_equal_to_n_means_no_split() {
        let ds = frame(
            vec![("t", vec![1.0, 2.0, 3.0, 4.0])],
            vec![0.0, 0.0, 5.0, 5.0],
        );
        let params = TreeParams {
            min_leaf: 4,
            ..Default::default()
        };
        assert_eq!(
            fit_tree(&ds, &names(&["t"]), params)
                .unwrap()
                .tree
                .nodes
                .len(),
            1
        );
        let too_big = TreeParams {
            min_leaf: 5,
            ..Default::default()
        };
        assert!(fit_tree(&ds, &names(&["t"]), too_big).is_err());
        assert!(fit_tree(&ds, &[], TreeParams::default()).is_err());
    }

    #[test]
    fn tie_breaks_to_lowest_feature() {
        let a = vec![1.0, 2.0, 3.0, 4.0];
        let ds = frame(vec![("a", a.clone()), ("b", a)], vec![0.0, 0.0, 1.0, 1.0]);
        let tree = fit_tree(&ds, &names(&["b", "a"]), TreeParams::default()).unwrap();
        assert!(matches!(tree.tree.nodes[0], Node::Split { feature: 0, .. }));
    }

    proptest! {
        #[test]
        fn interpolates_duplicate_free_training_data(
            raw in prop::collection::btree_set(0u32..10_000, 2..60),
            seed in 0u64..100,
        ) {
            let x: Vec<f64> = raw.iter().map(|v| *v as f64 / 7.0).collect();
            let y: Vec<f64> = x.iter().map(|v| (v * 1.7).sin() * 10.0 + seed as f64).collect();
            let ds = frame(vec![("x", x.clone()), ("z", x.iter().map(|v| v * v).collect())], y.clone());
            let tree = fit_tree(&ds, &names(&["x", "z"]), TreeParams { seed, ..Default::default() }).unwrap();
            prop_assert_eq!(tree.predict(&ds).unwrap(), y);
        }

        #[test]
        fn leaves_respect_min_leaf_and_depth(
            y in prop::collection::vec(-50f64..50.0, 10..80),
            min_leaf in 1usize..6,
            depth in 0usize..6,
        ) {
            let x: Vec<f64> = (0..y.len()).map(|i| ((i * 37) % 101) as f64).collect();
            let ds = frame(vec![("x", x)], y);
            let params = TreeParams { max_depth: Some(depth), min_leaf, ..Default::default() };
            let tree = fit_tree(&ds, &names(&["x"]), params).unwrap();
            prop_assert!(tree.tree.depth() <= depth);
            for (_, n) in tree.tree.leaves() {
                prop_assert!(n >= min_leaf);
            }
        }

        #[test]
        fn piecewise_constant_between_thresholds(shift in 0.0f64..0.49) {
            // thresholds sit at half-integers, so shifting integer inputs by < 0.5 crosses none
            let x: Vec<f64> = (0..20).map(|i| i as f64).collect();
            let y: Vec<f64> = x.iter().map(|v| (v * 0.9).cos()).collect();
            let ds = frame(vec![("x", x.clone())], y);
            let tree = fit_tree(&ds, &names(&["x"]), TreeParams { min_leaf: 2, ..Default::default() }).unwrap();
            let moved = ds.replace_column("x", Column::Numeric(x.iter().map(|v| v + shift).collect())).unwrap();
            prop_assert_eq!(tree.predict(&moved).unwrap(), tree.predict(&ds).unwrap());
        }
    }
}
