//! Complete-linkage agglomerative clustering and silhouette-based choice of
//! the number of clusters.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ClusterError {
    #[error("no points to cluster")]
    Empty,
    #[error("points must all have {expected} finite coordinates")]
    BadPoint { expected: usize },
    #[error("cluster count {k} outside 1..={n}")]
    BadK { k: usize, n: usize },
    #[error("cluster range [{lo}, {hi}] invalid for {n} points")]
    BadRange { lo: usize, hi: usize, n: usize },
    #[error("silhouette needs at least two clusters")]
    TooFewClusters,
    #[error("labels do not match the points")]
    LabelMismatch,
}

/// One agglomeration step. Clusters are named by their smallest point index,
/// so `kept < absorbed` and the merged cluster keeps `kept`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub kept: usize,
    pub absorbed: usize,
    pub height: f64,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dendrogram {
    pub points: usize,
    pub merges: Vec<Merge>,
}

impl Dendrogram {
    /// Labels `1..=k`, numbered by each cluster's smallest point index.
    pub fn cut(&self, k: usize) -> Result<Vec<usize>, ClusterError> {
        let n = self.points;
        if k == 0 || k > n {
            return Err(ClusterError::BadK { k, n });
        }
        let mut owner: Vec<usize> = (0..n).collect();
        for m in &self.merges[..n - k] {
            for o in owner.iter_mut() {
                if *o == m.absorbed {
                    *o = m.kept;
                }
            }
        }
        let mut label_of = vec![0; n];
        let mut next = 0;
        let mut labels = vec![0; n];
        for i in 0..n {
            let root = owner[i];
            if label_of[root] == 0 {
                next += 1;
                label_of[root] = next;
            }
            labels[i] = label_of[root];
        }
        Ok(labels)
    }
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn check_points(points: &[Vec<f64>]) -> Result<usize, ClusterError> {
    let dim = points.first().ok_or(ClusterError::Empty)?.len();
    if points.iter().any(|p| p.len() != dim || p.iter().any(|v| !v.is_finite())) {
        return Err(ClusterError::BadPoint { expected: dim });
    }
    Ok(dim)
}

/// Min-max scale every dimension to `[0, 1]`. Constant dimensions carry no
/// information and are dropped; their indices are returned.
pub fn normalize(points: &[Vec<f64>]) -> (Vec<Vec<f64>>, Vec<usize>) {
    let dim = points.first().map_or(0, Vec::len);
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for d in 0..dim {
        let (lo, hi) = points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p[d]), hi.max(p[d])));
        if hi > lo {
            kept.push((d, lo, hi - lo));
        } else {
            log::warn!("dimension {d} is constant; dropped before clustering");
            dropped.push(d);
        }
    }
    let scaled = points.iter().map(|p| kept.iter().map(|&(d, lo, span)| (p[d] - lo) / span).collect()).collect();
    (scaled, dropped)
}

/// Full complete-linkage merge sequence.
pub fn linkage(points: &[Vec<f64>]) -> Result<Dendrogram, ClusterError> {
    check_points(points)?;
    let n = points.len();
    let mut dist = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let d = euclidean(&points[i], &points[j]);
            dist[i][j] = d;
            dist[j][i] = d;
        }
    }
    let mut active = vec![true; n];
    let mut size = vec![1usize; n];
    // nearest active partner with a larger index, ties to the smaller index
    let nearest = |i: usize, dist: &[Vec<f64>], active: &[bool]| -> Option<(f64, usize)> {
        let mut best: Option<(f64, usize)> = None;
        for j in i + 1..n {
            if active[j] && best.is_none_or(|(d, _)| dist[i][j] < d) {
                best = Some((dist[i][j], j));
            }
        }
        best
    };
    let mut best: Vec<Option<(f64, usize)>> = (0..n).map(|i| nearest(i, &dist, &active)).collect();
    let mut merges = Vec::with_capacity(n.saturating_sub(1));
    for _ in 1..n {
        let mut pick: Option<(f64, usize, usize)> = None;
        for i in 0..n {
            if let (true, Some((d, j))) = (active[i], best[i]) {
                if pick.is_none_or(|(pd, _, _)| d < pd) {
                    pick = Some((d, i, j));
                }
            }
        }
        let (height, a, b) = pick.expect("two active clusters remain");
        active[b] = false;
        size[a] += size[b];
        for k in 0..n {
            if active[k] && k != a {
                let d = dist[a][k].max(dist[b][k]);
                dist[a][k] = d;
                dist[k][a] = d;
            }
        }
        merges.push(Merge { kept: a, absorbed: b, height, size: size[a] });
        for i in 0..n {
            if active[i] && (i == a || matches!(best[i], Some((_, j)) if j == a || j == b)) {
                best[i] = nearest(i, &dist, &active);
            }
        }
        best[b] = None;
    }
    Ok(Dendrogram { points: n, merges })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    /// Labels in `1..=num_clusters`, aligned with the input points.
    pub labels: Vec<usize>,
    pub num_clusters: usize,
    /// Input dimensions dropped by normalization.
    pub dropped_dimensions: Vec<usize>,
}

fn prepare(points: &[Vec<f64>], normalized: bool) -> Result<(Vec<Vec<f64>>, Vec<usize>), ClusterError> {
    check_points(points)?;
    Ok(if normalized { normalize(points) } else { (points.to_vec(), Vec::new()) })
}

pub fn ahc_complete(points: &[Vec<f64>], k: usize, normalized: bool) -> Result<ClusterAssignment, ClusterError> {
    let (space, dropped) = prepare(points, normalized)?;
    let labels = linkage(&space)?.cut(k)?;
    Ok(ClusterAssignment { labels, num_clusters: k, dropped_dimensions: dropped })
}

/// Mean silhouette; points in singleton clusters score 0.
pub fn silhouette(points: &[Vec<f64>], labels: &[usize]) -> Result<f64, ClusterError> {
    check_points(points)?;
    if labels.len() != points.len() || labels.contains(&0) {
        return Err(ClusterError::LabelMismatch);
    }
    let k = *labels.iter().max().expect("non-empty");
    let mut counts = vec![0usize; k + 1];
    for &l in labels {
        counts[l] += 1;
    }
    if counts[1..].iter().filter(|&&c| c > 0).count() < 2 {
        return Err(ClusterError::TooFewClusters);
    }
    let n = points.len();
    let mut total = 0.0;
    for i in 0..n {
        if counts[labels[i]] == 1 {
            continue;
        }
        let mut sums = vec![0.0; k + 1];
        for j in 0..n {
            if j != i {
                sums[labels[j]] += euclidean(&points[i], &points[j]);
            }
        }
        let a = sums[labels[i]] / (counts[labels[i]] - 1) as f64;
        let b = (1..=k)
            .filter(|&c| c != labels[i] && counts[c] > 0)
            .map(|c| sums[c] / counts[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let s = if a.max(b) > 0.0 { (b - a) / a.max(b) } else { 0.0 };
        total += s;
    }
    Ok(total / n as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KSelection {
    pub k: usize,
    /// `(k, silhouette)` for every candidate.
    pub scores: Vec<(usize, f64)>,
    pub assignment: ClusterAssignment,
}

/// Pick the cluster count in `[k_min, k_max]` with the best silhouette,
/// preferring the smallest `k` on ties.
pub fn choose_k(points: &[Vec<f64>], k_min: usize, k_max: usize, normalized: bool) -> Result<KSelection, ClusterError> {
    let n = points.len();
    if k_min < 2 || k_min > k_max || k_max > n {
        return Err(ClusterError::BadRange { lo: k_min, hi: k_max, n });
    }
    let (space, dropped) = prepare(points, normalized)?;
    let tree = linkage(&space)?;
    let mut scores = Vec::new();
    let mut best: Option<(f64, usize, Vec<usize>)> = None;
    for k in k_min..=k_max {
        let labels = tree.cut(k)?;
        let s = silhouette(&space, &labels)?;
        scores.push((k, s));
        if best.as_ref().is_none_or(|(bs, _, _)| s > *bs) {
            best = Some((s, k, labels));
        }
    }
    let (_, k, labels) = best.expect("range is non-empty");
    Ok(KSelection { k, scores, assignment: ClusterAssignment { labels, num_clusters: k, dropped_dimensions: dropped } })
}
