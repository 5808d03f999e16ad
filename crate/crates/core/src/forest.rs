//! Random forest of Gini CART trees.
//!
//! Trees are grown from bootstrap samples drawn from per-tree substreams of
//! the configured seed, so fitting is deterministic and trees can be built
//! in parallel. Candidate splits are compared with exact integer arithmetic:
//! ties go to the lower feature index, then the lower threshold.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::probes::FeatureMatrix;
use crate::rng::Stream;

pub const MODEL_FORMAT: &str = "leakprobe.forest.v1";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    /// Features drawn per node; `None` means `floor(sqrt(D))`, at least 1.
    pub max_features: Option<usize>,
    pub bootstrap: bool,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    pub max_depth: Option<usize>,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 100,
            max_features: None,
            bootstrap: true,
            min_samples_split: 2,
            min_samples_leaf: 1,
            max_depth: None,
            seed: 0,
        }
    }
}

impl ForestConfig {
    pub fn resolved_max_features(&self, n_features: usize) -> usize {
        self.max_features
            .unwrap_or_else(|| ((n_features as f64).sqrt().floor() as usize).max(1))
    }

    pub fn validate(&self, n_features: usize) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.n_trees == 0 {
            return bad("n_trees must be at least 1".into());
        }
        let mf = self.resolved_max_features(n_features);
        if mf == 0 || mf > n_features {
            return bad(format!("max_features {mf} outside 1..={n_features}"));
        }
        if self.min_samples_split < 2 {
            return bad("min_samples_split must be at least 2".into());
        }
        if self.min_samples_leaf < 1 {
            return bad("min_samples_leaf must be at least 1".into());
        }
        Ok(())
    }
}

/// `1 - sum((c_i / n)^2)`.
pub fn gini_impurity(class_counts: &[usize]) -> Result<f64> {
    let n: usize = class_counts.iter().sum();
    if n == 0 {
        return Err(Error::InvalidArgument("gini impurity of an empty node".into()));
    }
    let n = n as f64;
    Ok(1.0 - class_counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitCandidate {
    pub feature: usize,
    pub threshold: f64,
    pub impurity_decrease: f64,
}

/// Exact child score `sumsq_l / n_l + sumsq_r / n_r`, kept as a fraction.
/// Larger is better: it equals `n * (1 - weighted child gini)`.
#[derive(Debug, Clone, Copy)]
struct Score {
    num: u128,
    den: u128,
}

impl Score {
    fn new(sumsq_l: u64, n_l: u64, sumsq_r: u64, n_r: u64) -> Self {
        Score {
            num: sumsq_l as u128 * n_r as u128 + sumsq_r as u128 * n_l as u128,
            den: n_l as u128 * n_r as u128,
        }
    }

    fn cmp(&self, other: &Score) -> Ordering {
        (self.num * other.den).cmp(&(other.num * self.den))
    }

    fn to_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

fn midpoint(lo: f64, hi: f64) -> f64 {
    let mid = lo + (hi - lo) / 2.0;
    if mid >= hi || !mid.is_finite() {
        lo
    } else {
        mid
    }
}

/// Best Gini split of `rows` over `features`, or `None` when the rows are
/// pure or no threshold leaves at least `min_samples_leaf` rows per side.
/// Zero-gain splits are accepted.
pub fn best_split(
    matrix: &FeatureMatrix,
    rows: &[usize],
    features: &[usize],
    min_samples_leaf: usize,
) -> Option<SplitCandidate> {
    let k = matrix.n_classes;
    let n = rows.len();
    let mut total = vec![0u64; k];
    for &r in rows {
        total[matrix.labels[r]] += 1;
    }
    if total.iter().filter(|&&c| c > 0).count() <= 1 {
        return None;
    }
    let parent_sumsq: u64 = total.iter().map(|c| c * c).sum();

    let mut ordered_features = features.to_vec();
    ordered_features.sort_unstable();
    ordered_features.dedup();

    let mut best: Option<(Score, usize, f64)> = None;
    let mut column: Vec<(f64, usize)> = Vec::with_capacity(n);
    let mut left = vec![0u64; k];
    for &f in &ordered_features {
        column.clear();
        column.extend(rows.iter().map(|&r| (matrix.get(r, f), matrix.labels[r])));
        column.sort_by(|a, b| a.0.total_cmp(&b.0));
        left.iter_mut().for_each(|c| *c = 0);
        let mut right = total.clone();
        let (mut sumsq_l, mut sumsq_r) = (0u64, parent_sumsq);
        for i in 0..n - 1 {
            let label = column[i].1;
            sumsq_l += 2 * left[label] + 1;
            left[label] += 1;
            sumsq_r -= 2 * right[label] - 1;
            right[label] -= 1;
            let (lo, hi) = (column[i].0, column[i + 1].0);
            if lo == hi {
                continue;
            }
            let n_l = i + 1;
            let n_r = n - n_l;
            if n_l < min_samples_leaf || n_r < min_samples_leaf {
                continue;
            }
            let score = Score::new(sumsq_l, n_l as u64, sumsq_r, n_r as u64);
            if best
                .as_ref()
                .is_none_or(|(b, _, _)| score.cmp(b) == Ordering::Greater)
            {
                best = Some((score, f, midpoint(lo, hi)));
            }
        }
    }

    best.map(|(score, feature, threshold)| {
        let nf = n as f64;
        let parent_gini = 1.0 - parent_sumsq as f64 / (nf * nf);
        let child_gini = 1.0 - score.to_f64() / nf;
        SplitCandidate {
            feature,
            threshold,
            impurity_decrease: parent_gini - child_gini,
        }
    })
}

/// Flat tree node; children refer to positions in [`Tree::nodes`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        class_counts: Vec<usize>,
    },
}

/// A fitted CART tree; the root is `nodes[0]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
}

impl Tree {
    /// Leaf argmax; count ties go to the lowest class index.
    pub fn predict(&self, row: &[f64]) -> usize {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if row[*feature] <= *threshold { *left } else { *right },
                TreeNode::Leaf { class_counts } => return argmax_lowest(class_counts),
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[TreeNode], at: usize) -> usize {
            match &nodes[at] {
                TreeNode::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
                TreeNode::Leaf { .. } => 0,
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, TreeNode::Leaf { .. }))
            .count()
    }
}

fn argmax_lowest(counts: &[usize]) -> usize {
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i;
        }
    }
    best
}

struct TreeBuilder<'a> {
    matrix: &'a FeatureMatrix,
    config: &'a ForestConfig,
    max_features: usize,
    rng: Stream,
    nodes: Vec<TreeNode>,
}

impl TreeBuilder<'_> {
    fn leaf(&mut self, rows: &[usize]) -> usize {
        let mut class_counts = vec![0; self.matrix.n_classes];
        for &r in rows {
            class_counts[self.matrix.labels[r]] += 1;
        }
        self.nodes.push(TreeNode::Leaf { class_counts });
        self.nodes.len() - 1
    }

    /// Walks a lazily drawn random permutation of the columns and keeps the
    /// first `max_features` that are not constant over `rows`. Constant
    /// columns are skipped without counting against the budget.
    fn draw_features(&mut self, rows: &[usize]) -> Vec<usize> {
        let d = self.matrix.cols;
        let mut pool: Vec<usize> = (0..d).collect();
        let mut chosen = Vec::with_capacity(self.max_features);
        let mut i = 0;
        while chosen.len() < self.max_features && i < d {
            let j = i + self.rng.below(d - i);
            pool.swap(i, j);
            let f = pool[i];
            i += 1;
            let first = self.matrix.get(rows[0], f);
            if rows.iter().any(|&r| self.matrix.get(r, f) != first) {
                chosen.push(f);
            }
        }
        chosen
    }

    // Pre-order, left subtree first; the feature draw happens only at nodes
    // that pass the size and depth checks.
    fn grow(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        let cfg = self.config;
        let depth_capped = cfg.max_depth.is_some_and(|d| depth >= d);
        if rows.len() < cfg.min_samples_split || rows.len() < 2 * cfg.min_samples_leaf || depth_capped {
            return self.leaf(&rows);
        }
        let first = self.matrix.labels[rows[0]];
        if rows.iter().all(|&r| self.matrix.labels[r] == first) {
            return self.leaf(&rows);
        }
        let features = self.draw_features(&rows);
        let Some(split) = best_split(self.matrix, &rows, &features, cfg.min_samples_leaf) else {
            return self.leaf(&rows);
        };
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
            .iter()
            .partition(|&&r| self.matrix.get(r, split.feature) <= split.threshold);
        drop(rows);

        let at = self.nodes.len();
        self.nodes.push(TreeNode::Leaf { class_counts: Vec::new() });
        let left = self.grow(left_rows, depth + 1);
        let right = self.grow(right_rows, depth + 1);
        self.nodes[at] = TreeNode::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        at
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForestModel {
    pub format: String,
    pub config: ForestConfig,
    pub n_classes: usize,
    pub n_features: usize,
    pub trees: Vec<Tree>,
}

/// Fits one tree per substream `(config.seed, t)`.
pub fn fit(matrix: &FeatureMatrix, config: &ForestConfig) -> Result<RandomForestModel> {
    if matrix.rows < 2 {
        return Err(Error::Degenerate(format!("{} training rows, need at least 2", matrix.rows)));
    }
    let mut present = vec![false; matrix.n_classes];
    for &l in &matrix.labels {
        present[l] = true;
    }
    if present.iter().filter(|&&p| p).count() < 2 {
        return Err(Error::Degenerate(
            "training labels contain a single class; nothing to separate".into(),
        ));
    }
    config.validate(matrix.cols)?;
    let max_features = config.resolved_max_features(matrix.cols);

    let trees = (0..config.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = Stream::substream(config.seed, t as u64);
            let n = matrix.rows;
            let rows: Vec<usize> = if config.bootstrap {
                (0..n).map(|_| rng.below(n)).collect()
            } else {
                (0..n).collect()
            };
            let mut builder = TreeBuilder {
                matrix,
                config,
                max_features,
                rng,
                nodes: Vec::new(),
            };
            builder.grow(rows, 0);
            Tree { nodes: builder.nodes }
        })
        .collect();

    Ok(RandomForestModel {
        format: MODEL_FORMAT.to_string(),
        config: config.clone(),
        n_classes: matrix.n_classes,
        n_features: matrix.cols,
        trees,
    })
}

impl RandomForestModel {
    /// Majority vote of tree predictions; vote ties go to the lowest class.
    pub fn predict(&self, row: &[f64]) -> Result<usize> {
        if row.len() != self.n_features {
            return Err(Error::InvalidArgument(format!(
                "row has {} features, model expects {}",
                row.len(),
                self.n_features
            )));
        }
        let mut votes = vec![0usize; self.n_classes];
        for tree in &self.trees {
            votes[tree.predict(row)] += 1;
        }
        Ok(argmax_lowest(&votes))
    }

    pub fn predict_matrix(&self, matrix: &FeatureMatrix) -> Result<Vec<usize>> {
        (0..matrix.rows).map(|i| self.predict(matrix.row(i))).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let model: RandomForestModel =
            serde_json::from_str(s).map_err(|e| Error::Serialization(e.to_string()))?;
        if model.format != MODEL_FORMAT {
            return Err(Error::Serialization(format!(
                "unsupported model format {:?}",
                model.format
            )));
        }
        for tree in &model.trees {
            for node in &tree.nodes {
                let ok = match node {
                    TreeNode::Split { feature, left, right, .. } => {
                        *feature < model.n_features && *left < tree.nodes.len() && *right < tree.nodes.len()
                    }
                    TreeNode::Leaf { class_counts } => class_counts.len() == model.n_classes,
                };
                if !ok {
                    return Err(Error::Serialization("tree node out of range".into()));
                }
            }
        }
        Ok(model)
    }

    /// SHA-256 of the JSON encoding, hex.
    pub fn fingerprint(&self) -> String {
        let json = self.to_json().expect("model serializes");
        Sha256::digest(json.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

/// Percentage of rows whose prediction equals the label.
pub fn accuracy(model: &RandomForestModel, matrix: &FeatureMatrix) -> Result<f64> {
    if matrix.rows == 0 {
        return Err(Error::InvalidArgument("accuracy of an empty matrix".into()));
    }
    let predictions = model.predict_matrix(matrix)?;
    let correct = predictions
        .iter()
        .zip(&matrix.labels)
        .filter(|(p, l)| p == l)
        .count();
    Ok(100.0 * correct as f64 / matrix.rows as f64)
}
