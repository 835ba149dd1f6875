//! Axis-aligned decision trees over parameter valuations and their reading
//! as per-cluster formulas.

mod boxes;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use boxes::{box_to_formula, cluster_formulas, paths_to_boxes, BoxSide, ClusterFormula, HyperBox, Literal};

#[derive(Debug, Error, PartialEq)]
pub enum TreeError {
    #[error("no training points")]
    Empty,
    #[error("{points} points but {labels} labels")]
    LabelMismatch { points: usize, labels: usize },
    #[error("points must all have {0} finite features")]
    BadPoint(usize),
    #[error("fold count {k} must lie in 2..={n}")]
    BadFolds { k: usize, n: usize },
    #[error("maximum depth must be at least 1")]
    BadDepth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TreeNode {
    Leaf {
        label: usize,
        samples: usize,
    },
    /// Points with `x[feature] < threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        samples: usize,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

impl TreeNode {
    fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    fn leaves(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Split { left, right, .. } => left.leaves() + right.leaves(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub features: usize,
    pub root: TreeNode,
}

impl DecisionTree {
    pub fn predict(&self, x: &[f64]) -> usize {
        let mut node = &self.root;
        loop {
            match node {
                TreeNode::Leaf { label, .. } => return *label,
                TreeNode::Split { feature, threshold, left, right, .. } => {
                    node = if x[*feature] < *threshold { left } else { right };
                }
            }
        }
    }

    /// Number of split levels on the longest path.
    pub fn depth(&self) -> usize {
        self.root.depth()
    }

    pub fn leaves(&self) -> usize {
        self.root.leaves()
    }

    pub fn accuracy(&self, points: &[Vec<f64>], labels: &[usize]) -> f64 {
        if points.is_empty() {
            return 1.0;
        }
        let hits = points.iter().zip(labels).filter(|(p, &l)| self.predict(p) == l).count();
        hits as f64 / points.len() as f64
    }
}

fn check(points: &[Vec<f64>], labels: &[usize]) -> Result<usize, TreeError> {
    if points.len() != labels.len() {
        return Err(TreeError::LabelMismatch { points: points.len(), labels: labels.len() });
    }
    let dim = points.first().ok_or(TreeError::Empty)?.len();
    if points.iter().any(|p| p.len() != dim || p.iter().any(|v| !v.is_finite())) {
        return Err(TreeError::BadPoint(dim));
    }
    Ok(dim)
}

/// Greedy CART fit with Gini impurity; `max_depth` counts split levels.
pub fn fit_tree(points: &[Vec<f64>], labels: &[usize], max_depth: usize) -> Result<DecisionTree, TreeError> {
    let features = check(points, labels)?;
    let index: Vec<usize> = (0..points.len()).collect();
    let root = grow(points, labels, &index, features, max_depth);
    Ok(DecisionTree { features, root })
}

/// `(label, count)` pairs sorted by label.
fn class_counts(labels: &[usize], index: &[usize]) -> Vec<(usize, u64)> {
    let mut counts: Vec<(usize, u64)> = Vec::new();
    for &i in index {
        match counts.binary_search_by_key(&labels[i], |c| c.0) {
            Ok(pos) => counts[pos].1 += 1,
            Err(pos) => counts.insert(pos, (labels[i], 1)),
        }
    }
    counts
}

fn majority(counts: &[(usize, u64)]) -> usize {
    // ascending labels, so strict `>` keeps the smallest label on ties
    let mut best = counts[0];
    for &c in &counts[1..] {
        if c.1 > best.1 {
            best = c;
        }
    }
    best.0
}

fn grow(points: &[Vec<f64>], labels: &[usize], index: &[usize], features: usize, depth_left: usize) -> TreeNode {
    let counts = class_counts(labels, index);
    let leaf = TreeNode::Leaf { label: majority(&counts), samples: index.len() };
    if depth_left == 0 || counts.len() == 1 {
        return leaf;
    }
    let Some((feature, threshold)) = best_split(points, labels, index, features, &counts) else {
        return leaf;
    };
    let (l, r): (Vec<usize>, Vec<usize>) = index.iter().partition(|&&i| points[i][feature] < threshold);
    TreeNode::Split {
        feature,
        threshold,
        samples: index.len(),
        left: Box::new(grow(points, labels, &l, features, depth_left - 1)),
        right: Box::new(grow(points, labels, &r, features, depth_left - 1)),
    }
}

/// Sum of squared class counts; Gini impurity of a node with `n` points is
/// `1 - sum_sq / n^2`, so minimising weighted impurity maximises
/// `sum_sq_left / n_left + sum_sq_right / n_right`.
fn sum_sq(counts: &[u64]) -> u128 {
    counts.iter().map(|&c| (c as u128) * (c as u128)).sum()
}

/// Exact comparison of `a_num / a_den` against `b_num / b_den`.
fn frac_gt(a_num: u128, a_den: u128, b_num: u128, b_den: u128) -> bool {
    a_num * b_den > b_num * a_den
}

fn best_split(
    points: &[Vec<f64>],
    labels: &[usize],
    index: &[usize],
    features: usize,
    counts: &[(usize, u64)],
) -> Option<(usize, f64)> {
    let n = index.len() as u128;
    let total: Vec<u64> = counts.iter().map(|c| c.1).collect();
    let class_of = |i: usize| counts.binary_search_by_key(&labels[i], |c| c.0).expect("label counted");
    // score as a fraction (num, den); start from the parent so only strict
    // improvements are accepted
    let mut best: Option<(u128, u128, usize, f64)> = None;
    let (parent_num, parent_den) = (sum_sq(&total), n);
    for f in 0..features {
        let mut order = index.to_vec();
        order.sort_by(|&a, &b| points[a][f].total_cmp(&points[b][f]));
        let mut left = vec![0u64; total.len()];
        for k in 0..order.len() - 1 {
            left[class_of(order[k])] += 1;
            let (va, vb) = (points[order[k]][f], points[order[k + 1]][f]);
            if va == vb {
                continue;
            }
            let right: Vec<u64> = total.iter().zip(&left).map(|(t, l)| t - l).collect();
            let (nl, nr) = ((k + 1) as u128, n - (k + 1) as u128);
            let num = sum_sq(&left) * nr + sum_sq(&right) * nl;
            let den = nl * nr;
            let improves = match best {
                None => frac_gt(num, den, parent_num, parent_den),
                Some((bn, bd, _, _)) => frac_gt(num, den, bn, bd),
            };
            if improves {
                let mut t = va + (vb - va) / 2.0;
                if !(t > va && t <= vb) {
                    t = vb;
                }
                best = Some((num, den, f, t));
            }
        }
    }
    best.map(|(_, _, f, t)| (f, t))
}

/// Mean held-out accuracy over `k` folds of a seeded shuffle.
pub fn kfold_cv(points: &[Vec<f64>], labels: &[usize], depth: usize, k: usize, seed: u64) -> Result<f64, TreeError> {
    check(points, labels)?;
    let n = points.len();
    if k < 2 || k > n {
        return Err(TreeError::BadFolds { k, n });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut total = 0.0;
    for fold in 0..k {
        let (start, end) = (fold * n / k, (fold + 1) * n / k);
        let test = &order[start..end];
        let train: Vec<usize> = order[..start].iter().chain(&order[end..]).copied().collect();
        let tp: Vec<Vec<f64>> = train.iter().map(|&i| points[i].clone()).collect();
        let tl: Vec<usize> = train.iter().map(|&i| labels[i]).collect();
        let tree = fit_tree(&tp, &tl, depth)?;
        let hits = test.iter().filter(|&&i| tree.predict(&points[i]) == labels[i]).count();
        total += hits as f64 / test.len() as f64;
    }
    Ok(total / k as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruneOutcome {
    /// `(depth, cv accuracy)` for every depth tried.
    pub scores: Vec<(usize, f64)>,
    /// Smallest qualifying depth and the tree refit on all points.
    pub chosen: Option<(usize, DecisionTree)>,
}

/// Try depths `1..=max_depth` and keep the first whose cross-validated
/// accuracy exceeds `threshold`.
pub fn prune_search(
    points: &[Vec<f64>],
    labels: &[usize],
    max_depth: usize,
    folds: usize,
    threshold: f64,
    seed: u64,
) -> Result<PruneOutcome, TreeError> {
    if max_depth == 0 {
        return Err(TreeError::BadDepth);
    }
    let mut scores = Vec::new();
    for depth in 1..=max_depth {
        let acc = kfold_cv(points, labels, depth, folds, seed)?;
        scores.push((depth, acc));
        if acc > threshold {
            let tree = fit_tree(points, labels, depth)?;
            return Ok(PruneOutcome { scores, chosen: Some((depth, tree)) });
        }
    }
    Ok(PruneOutcome { scores, chosen: None })
}
