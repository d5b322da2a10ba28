//! Random-forest regression over column-major feature tables.
//!
//! Determinism contract: tree `t` draws everything from
//! `SplitMix64(derive_seed(seed, t))` in this order:
//!
//! 1. `round(bootstrap_fraction * n)` bootstrap rows, each `below(n)`; the
//!    drawn rows are then sorted ascending.
//! 2. Nodes are grown depth first, left child before right. A node becomes a
//!    leaf without drawing when it has fewer than `2 * min_leaf` rows, sits at
//!    `max_depth`, or all of its targets are equal. Otherwise `mtry` candidate
//!    features are drawn by a partial Fisher-Yates over `0..d` (position `i`
//!    swaps with `i + below(d - i)`), and the candidates are scanned in
//!    ascending feature order.
//!
//! For each candidate the node rows are ordered by (feature value, row) and every
//! boundary between distinct values leaving at least `min_leaf` rows per side
//! is scored by the children's summed squared error. A candidate replaces the
//! incumbent only if it lowers that error by more than `1e-9` times the node's
//! total sum of squares, so near ties go to the lowest feature index and then
//! the lowest threshold. Thresholds are midpoints; rows with `x <= threshold`
//! go left. Partitions are stable, so every node's rows stay in ascending row
//! order and leaf means are summed in that order.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureTable;
use crate::rng::{derive_seed, SplitMix64};

/// Relative improvement a split must beat to displace the incumbent.
pub const TIE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub min_leaf: usize,
    /// Candidate features per split; `ceil(d / 3)` when absent.
    pub mtry: Option<usize>,
    pub max_depth: Option<usize>,
    /// Bootstrap sample size as a fraction of the training rows (with replacement).
    pub bootstrap_fraction: f64,
    pub seed: u64,
    pub max_train_rows: usize,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 100,
            min_leaf: 5,
            mtry: None,
            max_depth: None,
            bootstrap_fraction: 1.0,
            seed: 0,
            max_train_rows: 200_000,
        }
    }
}

impl ForestConfig {
    pub fn resolved_mtry(&self, dim: usize) -> usize {
        self.mtry.unwrap_or_else(|| dim.div_ceil(3)).clamp(1, dim.max(1))
    }

    fn validate(&self, dim: usize) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::InvalidConfig("n_trees must be at least 1".into()));
        }
        if self.min_leaf == 0 {
            return Err(Error::InvalidConfig("min_leaf must be at least 1".into()));
        }
        if let Some(m) = self.mtry {
            if m == 0 || m > dim {
                return Err(Error::InvalidConfig(format!("mtry {m} outside 1..={dim}")));
            }
        }
        if !(self.bootstrap_fraction > 0.0 && self.bootstrap_fraction <= 1.0) {
            return Err(Error::InvalidConfig("bootstrap_fraction must be in (0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf(f64),
    Split { feature: u32, threshold: f64, left: u32, right: u32 },
}

/// A regression tree; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, features: &FeatureTable, row: usize) -> f64 {
        let mut at = 0usize;
        loop {
            match self.nodes[at] {
                Node::Leaf(v) => return v,
                Node::Split { feature, threshold, left, right } => {
                    at = if features.value(row, feature as usize) <= threshold { left } else { right } as usize;
                }
            }
        }
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut at = 0usize;
        loop {
            match self.nodes[at] {
                Node::Leaf(v) => return v,
                Node::Split { feature, threshold, left, right } => {
                    at = if row[feature as usize] <= threshold { left } else { right } as usize;
                }
            }
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf(_))).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<Tree>,
    pub config: ForestConfig,
    pub feature_dim: usize,
}

struct Candidate {
    feature: usize,
    threshold: f64,
    sse: f64,
}

struct TreeBuilder<'a> {
    columns: &'a [Vec<f64>],
    targets: &'a [f64],
    min_leaf: usize,
    max_depth: usize,
    mtry: usize,
    rng: SplitMix64,
    nodes: Vec<Node>,
    features: Vec<usize>,
    /// Per feature, the bootstrap rows ordered by (value, row). Every node owns
    /// the same index range in each list and in `rows`.
    sorted: Vec<Vec<u32>>,
    goes_left: Vec<bool>,
    scratch: Vec<u32>,
}

impl TreeBuilder<'_> {
    fn leaf_value(&self, rows: &[u32]) -> f64 {
        rows.iter().map(|&r| self.targets[r as usize]).sum::<f64>() / rows.len() as f64
    }

    fn draw_features(&mut self) {
        let d = self.columns.len();
        self.features.clear();
        self.features.extend(0..d);
        for i in 0..self.mtry {
            let j = i + self.rng.below(d - i);
            self.features.swap(i, j);
        }
        self.features.truncate(self.mtry);
        self.features.sort_unstable();
    }

    fn best_split(&self, rows: &[u32], lo: usize, hi: usize) -> Option<Candidate> {
        let n = rows.len();
        let (mut sum, mut sum_sq) = (0.0, 0.0);
        for &r in rows {
            let y = self.targets[r as usize];
            sum += y;
            sum_sq += y * y;
        }
        let total_ss = (sum_sq - sum * sum / n as f64).max(0.0);
        let tol = TIE_TOLERANCE * total_ss;
        let mut best: Option<Candidate> = None;
        for &f in &self.features {
            let col = &self.columns[f];
            let order = &self.sorted[f][lo..hi];
            if col[order[0] as usize] == col[order[n - 1] as usize] {
                continue;
            }
            let mut left_sum = 0.0;
            for i in 0..n - 1 {
                left_sum += self.targets[order[i] as usize];
                let n_left = i + 1;
                if n_left < self.min_leaf {
                    continue;
                }
                if n - n_left < self.min_leaf {
                    break;
                }
                let (x, x_next) = (col[order[i] as usize], col[order[i + 1] as usize]);
                if x == x_next {
                    continue;
                }
                let right_sum = sum - left_sum;
                let gain = left_sum * left_sum / n_left as f64 + right_sum * right_sum / (n - n_left) as f64;
                let sse = sum_sq - gain;
                if best.as_ref().is_none_or(|b| sse < b.sse - tol) {
                    let mid = 0.5 * (x + x_next);
                    let threshold = if mid < x_next { mid } else { x };
                    best = Some(Candidate { feature: f, threshold, sse });
                }
            }
        }
        best
    }

    /// Stable partition of `list[lo..hi]` by `goes_left`; returns the split point.
    fn partition(list: &mut [u32], goes_left: &[bool], scratch: &mut [u32], lo: usize, hi: usize) -> usize {
        // Branch-free: the left/right choice is unpredictable.
        let (mut w, mut k) = (lo, 0);
        for i in lo..hi {
            let r = list[i];
            let left = goes_left[r as usize] as usize;
            list[w] = r;
            scratch[k] = r;
            w += left;
            k += 1 - left;
        }
        list[w..hi].copy_from_slice(&scratch[..k]);
        w
    }

    fn build(mut self, rows: &mut [u32]) -> Tree {
        // (range start, range end, depth, parent node, is left child)
        let mut stack: Vec<(usize, usize, usize, Option<(usize, bool)>)> = vec![(0, rows.len(), 0, None)];
        while let Some((lo, hi, depth, parent)) = stack.pop() {
            let id = self.nodes.len();
            if let Some((p, is_left)) = parent {
                if let Node::Split { left, right, .. } = &mut self.nodes[p] {
                    *if is_left { left } else { right } = id as u32;
                }
            }
            let node_rows = &rows[lo..hi];
            let first = self.targets[node_rows[0] as usize];
            let pure = node_rows.iter().all(|&r| self.targets[r as usize] == first);
            if node_rows.len() < 2 * self.min_leaf || depth >= self.max_depth || pure {
                let v = self.leaf_value(node_rows);
                self.nodes.push(Node::Leaf(v));
                continue;
            }
            self.draw_features();
            let Some(split) = self.best_split(node_rows, lo, hi) else {
                let v = self.leaf_value(node_rows);
                self.nodes.push(Node::Leaf(v));
                continue;
            };
            let col = &self.columns[split.feature];
            for &r in node_rows {
                self.goes_left[r as usize] = col[r as usize] <= split.threshold;
            }
            let w = Self::partition(rows, &self.goes_left, &mut self.scratch, lo, hi);
            for list in &mut self.sorted {
                Self::partition(list, &self.goes_left, &mut self.scratch, lo, hi);
            }
            self.nodes.push(Node::Split {
                feature: split.feature as u32,
                threshold: split.threshold,
                left: 0,
                right: 0,
            });
            stack.push((w, hi, depth + 1, Some((id, false))));
            stack.push((lo, w, depth + 1, Some((id, true))));
        }
        Tree { nodes: self.nodes }
    }
}

/// Row indices of each column ordered by (value, row).
fn column_orders(x: &FeatureTable) -> Vec<Vec<u32>> {
    x.columns()
        .par_iter()
        .map(|col| {
            let mut order: Vec<u32> = (0..col.len() as u32).collect();
            order.sort_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]).then(a.cmp(&b)));
            order
        })
        .collect()
}

/// Expand a full-table column order to the bootstrap multiset.
fn bootstrap_order(order: &[u32], counts: &[u32], total: usize) -> Vec<u32> {
    let mut out = Vec::with_capacity(total);
    for &r in order {
        for _ in 0..counts[r as usize] {
            out.push(r);
        }
    }
    out
}

/// Bootstrap rows for one tree, sorted ascending, leaving `rng` positioned for
/// the node-level draws.
pub fn bootstrap_rows(n: usize, fraction: f64, rng: &mut SplitMix64) -> Vec<u32> {
    let draws = ((fraction * n as f64).round() as usize).max(1);
    let mut rows: Vec<u32> = (0..draws).map(|_| rng.below(n) as u32).collect();
    rows.sort_unstable();
    rows
}

pub fn rf_train(x: &FeatureTable, y: &[f64], config: &ForestConfig) -> Result<ForestModel> {
    if x.n_rows() != y.len() {
        return Err(Error::LengthMismatch { left: x.n_rows(), right: y.len() });
    }
    if y.is_empty() {
        return Err(Error::EmptyTrainSet);
    }
    let dim = x.dim();
    if dim == 0 {
        return Err(Error::DimensionMismatch { expected: 1, got: 0 });
    }
    config.validate(dim)?;
    let mtry = config.resolved_mtry(dim);
    let orders = column_orders(x);
    let trees = (0..config.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = SplitMix64::new(derive_seed(config.seed, t as u64));
            let mut rows = bootstrap_rows(y.len(), config.bootstrap_fraction, &mut rng);
            let mut counts = vec![0u32; y.len()];
            for &r in &rows {
                counts[r as usize] += 1;
            }
            let sorted = orders.iter().map(|o| bootstrap_order(o, &counts, rows.len())).collect();
            TreeBuilder {
                columns: x.columns(),
                targets: y,
                min_leaf: config.min_leaf,
                max_depth: config.max_depth.unwrap_or(usize::MAX),
                mtry,
                rng,
                nodes: Vec::new(),
                features: Vec::with_capacity(dim),
                sorted,
                goes_left: vec![false; y.len()],
                scratch: vec![0; rows.len()],
            }
            .build(&mut rows)
        })
        .collect();
    Ok(ForestModel { trees, config: *config, feature_dim: dim })
}

pub fn rf_predict(model: &ForestModel, x: &FeatureTable) -> Result<Vec<f64>> {
    if x.dim() != model.feature_dim {
        return Err(Error::DimensionMismatch { expected: model.feature_dim, got: x.dim() });
    }
    let n_trees = model.trees.len() as f64;
    Ok((0..x.n_rows())
        .into_par_iter()
        .map(|r| model.trees.iter().map(|t| t.predict(x, r)).sum::<f64>() / n_trees)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(rows: &[Vec<f64>]) -> FeatureTable {
        FeatureTable::from_rows(rows).unwrap()
    }

    #[test]
    fn constant_targets_predict_constant() {
        let mut rng = SplitMix64::new(3);
        let rows: Vec<Vec<f64>> = (0..300).map(|_| vec![rng.next_f64(), rng.next_f64()]).collect();
        let x = table(&rows);
        let y = vec![2.75; 300];
        for n_trees in [1, 100] {
            let model = rf_train(&x, &y, &ForestConfig { n_trees, ..Default::default() }).unwrap();
            assert!(model.trees.iter().all(|t| t.nodes == vec![Node::Leaf(2.75)]));
            assert!(rf_predict(&model, &x).unwrap().iter().all(|&p| p == 2.75));
        }
    }

    #[test]
    fn identity_function_is_learned() {
        let mut rng = SplitMix64::new(11);
        let xs: Vec<f64> = (0..10_000).map(|_| rng.next_f64() * 10.0).collect();
        let x = table(&xs.iter().map(|&v| vec![v]).collect::<Vec<_>>());
        let model = rf_train(&x, &xs, &ForestConfig { n_trees: 20, ..Default::default() }).unwrap();
        let test: Vec<f64> = (0..500).map(|i| 0.5 + 9.0 * i as f64 / 499.0).collect();
        let tx = table(&test.iter().map(|&v| vec![v]).collect::<Vec<_>>());
        let pred = rf_predict(&model, &tx).unwrap();
        let rmse = (pred.iter().zip(&test).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / 500.0).sqrt();
        assert!(rmse <= 0.02 * 10.0, "rmse {rmse}");
    }

    #[test]
    fn deterministic_and_bounded() {
        let mut rng = SplitMix64::new(5);
        let rows: Vec<Vec<f64>> = (0..500).map(|_| (0..4).map(|_| rng.next_f64()).collect()).collect();
        let y: Vec<f64> = rows.iter().map(|r| (r[0] * 6.0).sin() + r[1] * r[2] - r[3]).collect();
        let x = table(&rows);
        let cfg = ForestConfig { n_trees: 25, seed: 99, ..Default::default() };
        let a = rf_train(&x, &y, &cfg).unwrap();
        let b = rf_train(&x, &y, &cfg).unwrap();
        assert_eq!(a, b);
        let pa = rf_predict(&a, &x).unwrap();
        assert_eq!(pa, rf_predict(&b, &x).unwrap());
        let (lo, hi) = y.iter().fold((f64::MAX, f64::MIN), |(l, h), &v| (l.min(v), h.max(v)));
        assert!(pa.iter().all(|p| (lo..=hi).contains(p)));
        let other = rf_train(&x, &y, &ForestConfig { seed: 100, ..cfg }).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn thread_count_does_not_matter() {
        let mut rng = SplitMix64::new(8);
        let rows: Vec<Vec<f64>> = (0..400).map(|_| (0..3).map(|_| rng.next_f64()).collect()).collect();
        let y: Vec<f64> = rows.iter().map(|r| r[0] - 2.0 * r[2]).collect();
        let x = table(&rows);
        let cfg = ForestConfig { n_trees: 16, ..Default::default() };
        let serial = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let wide = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = serial.install(|| rf_train(&x, &y, &cfg).unwrap());
        let b = wide.install(|| rf_train(&x, &y, &cfg).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn errors() {
        let x = table(&[vec![1.0], vec![2.0]]);
        assert!(matches!(rf_train(&x, &[1.0], &ForestConfig::default()), Err(Error::LengthMismatch { .. })));
        let empty = FeatureTable::from_columns(vec![vec![]]).unwrap();
        assert!(matches!(rf_train(&empty, &[], &ForestConfig::default()), Err(Error::EmptyTrainSet)));
        let bad = ForestConfig { mtry: Some(2), ..Default::default() };
        assert!(matches!(rf_train(&x, &[1.0, 2.0], &bad), Err(Error::InvalidConfig(_))));
        let model = rf_train(&x, &[1.0, 2.0], &ForestConfig { n_trees: 1, ..Default::default() }).unwrap();
        let wide = table(&[vec![1.0, 2.0]]);
        assert!(matches!(rf_predict(&model, &wide), Err(Error::DimensionMismatch { expected: 1, got: 2 })));
    }

    #[test]
    fn small_node_is_single_leaf() {
        let x = table(&[vec![0.0], vec![1.0], vec![2.0]]);
        let model = rf_train(&x, &[1.0, 2.0, 6.0], &ForestConfig { n_trees: 1, ..Default::default() }).unwrap();
        assert_eq!(model.trees[0].n_leaves(), 1);
    }

    #[test]
    fn max_depth_limits_tree() {
        let xs: Vec<Vec<f64>> = (0..200).map(|i| vec![i as f64]).collect();
        let y: Vec<f64> = (0..200).map(|i| (i * i) as f64).collect();
        let cfg = ForestConfig { n_trees: 1, max_depth: Some(2), min_leaf: 1, ..Default::default() };
        let model = rf_train(&table(&xs), &y, &cfg).unwrap();
        assert!(model.trees[0].n_leaves() <= 4);
    }
}
