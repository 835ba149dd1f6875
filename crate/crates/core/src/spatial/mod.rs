//! Weighted spatial models over geolocated nodes.
//!
//! A [`SpatialModel`] is a location graph whose edge weights are metric
//! distances in meters. Four constructions are provided: the complete
//! graph ([`SpatialModel::full`]), the distance-threshold graph
//! ([`SpatialModel::delta`]), the minimum spanning tree
//! ([`SpatialModel::mst`]) and the enhanced minimum spanning graph
//! ([`SpatialModel::enhanced_msg`]).

mod geojson;
mod io;

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use geojson::to_geojson;
pub use io::{read_locations, read_locations_from, write_locations};

/// Mean Earth radius used by [`haversine`].
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

#[derive(Debug, Error)]
pub enum SpatialError {
    #[error("duplicate location id `{0}`")]
    DuplicateId(String),
    #[error("location `{id}` has invalid coordinates ({lat}, {lon})")]
    InvalidCoordinates { id: String, lat: f64, lon: f64 },
    #[error("locations `{0}` and `{1}` share coordinates; edge weights must be positive")]
    CoincidentLocations(String, String),
    #[error("at least one location is required")]
    Empty,
    #[error("delta must be positive, got {0}")]
    InvalidDelta(f64),
    #[error("alpha must be greater than 1, got {0}")]
    InvalidAlpha(f64),
    #[error("location index {index} out of range for {len} locations")]
    InvalidIndex { index: usize, len: usize },
    #[error("invalid edge weight {0}")]
    InvalidWeight(f64),
    #[error("self-loop at location {0}")]
    SelfLoop(usize),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Location {
    pub id: String,
    pub lat: f64,
    pub lon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
}

impl Location {
    pub fn new(id: impl Into<String>, lat: f64, lon: f64) -> Self {
        Location { id: id.into(), lat, lon, name: None }
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    fn validate(&self) -> Result<(), SpatialError> {
        let ok = self.lat.is_finite()
            && self.lon.is_finite()
            && (-90.0..=90.0).contains(&self.lat)
            && (-180.0..=180.0).contains(&self.lon);
        if ok {
            Ok(())
        } else {
            Err(SpatialError::InvalidCoordinates { id: self.id.clone(), lat: self.lat, lon: self.lon })
        }
    }
}

/// Great-circle distance in meters.
pub fn haversine(a: &Location, b: &Location) -> f64 {
    let (phi1, phi2) = (a.lat.to_radians(), b.lat.to_radians());
    let dphi = (b.lat - a.lat).to_radians();
    let dlambda = (b.lon - a.lon).to_radians();
    let h = (dphi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * h.sqrt().min(1.0).asin()
}

/// A directed, weighted edge `source -> target`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub source: usize,
    pub target: usize,
    pub weight: f64,
}

/// Weighted location graph. Immutable once built.
#[derive(Debug, Clone)]
pub struct SpatialModel {
    locations: Vec<Location>,
    /// Outgoing edges per location, sorted by target index.
    adjacency: Vec<Vec<(usize, f64)>>,
    symmetric: bool,
}

impl SpatialModel {
    /// Model with no edges.
    pub fn isolated(locations: Vec<Location>) -> Result<Self, SpatialError> {
        validate_locations(&locations)?;
        let n = locations.len();
        Ok(SpatialModel { locations, adjacency: vec![Vec::new(); n], symmetric: true })
    }

    /// Build a model from an explicit edge list. When `symmetric` is set every
    /// edge is mirrored.
    pub fn from_edges(
        locations: Vec<Location>,
        edges: impl IntoIterator<Item = Edge>,
        symmetric: bool,
    ) -> Result<Self, SpatialError> {
        let mut model = SpatialModel::isolated(locations)?;
        model.symmetric = symmetric;
        for e in edges {
            model.check_edge(e)?;
            model.insert(e.source, e.target, e.weight);
            if symmetric {
                model.insert(e.target, e.source, e.weight);
            }
        }
        Ok(model)
    }

    /// The complete graph, i.e. the threshold graph with an infinite threshold.
    pub fn full(locations: Vec<Location>) -> Result<Self, SpatialError> {
        Self::threshold(locations, f64::INFINITY)
    }

    /// Edge `(i, w, j)` iff `haversine(i, j) = w < delta`.
    pub fn delta(locations: Vec<Location>, delta: f64) -> Result<Self, SpatialError> {
        if !(delta > 0.0) {
            return Err(SpatialError::InvalidDelta(delta));
        }
        Self::threshold(locations, delta)
    }

    fn threshold(locations: Vec<Location>, delta: f64) -> Result<Self, SpatialError> {
        let mut model = SpatialModel::isolated(locations)?;
        let n = model.len();
        for i in 0..n {
            for j in (i + 1)..n {
                let w = model.metric_weight(i, j)?;
                if w < delta {
                    model.insert(i, j, w);
                    model.insert(j, i, w);
                }
            }
        }
        Ok(model)
    }

    /// Minimum spanning tree of the complete haversine graph (Prim's
    /// algorithm rooted at location 0; ties go to the smallest target index).
    pub fn mst(locations: Vec<Location>) -> Result<Self, SpatialError> {
        let mut model = SpatialModel::isolated(locations)?;
        let n = model.len();
        if n == 0 {
            return Err(SpatialError::Empty);
        }
        let mut in_tree = vec![false; n];
        let mut best = vec![f64::INFINITY; n];
        let mut parent = vec![usize::MAX; n];
        best[0] = 0.0;
        for _ in 0..n {
            let mut next = None;
            for v in 0..n {
                if !in_tree[v] && next.is_none_or(|u: usize| best[v] < best[u]) {
                    next = Some(v);
                }
            }
            let u = next.expect("a vertex remains outside the tree");
            in_tree[u] = true;
            if parent[u] != usize::MAX {
                let w = best[u];
                model.insert(parent[u], u, w);
                model.insert(u, parent[u], w);
            }
            for v in 0..n {
                if !in_tree[v] {
                    let w = model.metric_weight(u, v)?;
                    if w < best[v] {
                        best[v] = w;
                        parent[v] = u;
                    }
                }
            }
        }
        Ok(model)
    }

    /// MST augmented with direct edges wherever the current graph distance
    /// between `i < j` exceeds `alpha` times their haversine distance.
    ///
    /// Pairs are scanned in index order and shortest paths are taken in the
    /// graph as it grows, so every pair ends with
    /// `induced_distance(i, j) <= alpha * haversine(i, j)`.
    pub fn enhanced_msg(locations: Vec<Location>, alpha: f64) -> Result<Self, SpatialError> {
        if !(alpha > 1.0) {
            return Err(SpatialError::InvalidAlpha(alpha));
        }
        let mut model = Self::mst(locations)?;
        let n = model.len();
        for i in 0..n {
            let mut dist = model.shortest_paths(i);
            for j in (i + 1)..n {
                let direct = model.metric_weight(i, j)?;
                if dist[j] > alpha * direct {
                    model.insert(i, j, direct);
                    model.insert(j, i, direct);
                    dist = model.shortest_paths(i);
                }
            }
        }
        Ok(model)
    }

    pub fn len(&self) -> usize {
        self.locations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locations.is_empty()
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn locations(&self) -> &[Location] {
        &self.locations
    }

    pub fn location(&self, index: usize) -> &Location {
        &self.locations[index]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.locations.iter().position(|l| l.id == id)
    }

    pub fn neighbors(&self, index: usize) -> &[(usize, f64)] {
        &self.adjacency[index]
    }

    pub fn weight(&self, source: usize, target: usize) -> Option<f64> {
        self.adjacency
            .get(source)?
            .binary_search_by_key(&target, |&(t, _)| t)
            .ok()
            .map(|k| self.adjacency[source][k].1)
    }

    /// All directed edges ordered by `(source, target)`.
    pub fn edges(&self) -> impl Iterator<Item = Edge> + '_ {
        self.adjacency.iter().enumerate().flat_map(|(source, out)| {
            out.iter().map(move |&(target, weight)| Edge { source, target, weight })
        })
    }

    pub fn directed_edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum()
    }

    /// Number of unordered location pairs joined by at least one edge.
    pub fn undirected_edge_count(&self) -> usize {
        let pairs: HashSet<(usize, usize)> =
            self.edges().map(|e| (e.source.min(e.target), e.source.max(e.target))).collect();
        pairs.len()
    }

    /// Smallest edge weight, if any edge exists.
    pub fn min_edge_weight(&self) -> Option<f64> {
        self.edges().map(|e| e.weight).min_by(|a, b| a.total_cmp(b))
    }

    /// Shortest-path distance; `+inf` when `j` is unreachable from `i`.
    pub fn induced_distance(&self, i: usize, j: usize) -> Result<f64, SpatialError> {
        self.check_index(i)?;
        self.check_index(j)?;
        Ok(self.shortest_paths(i)[j])
    }

    /// Dijkstra from `source` over edge weights.
    pub fn shortest_paths(&self, source: usize) -> Vec<f64> {
        let mut dist = vec![f64::INFINITY; self.len()];
        let mut heap = BinaryHeap::new();
        dist[source] = 0.0;
        heap.push(HeapEntry { dist: 0.0, node: source });
        while let Some(HeapEntry { dist: d, node }) = heap.pop() {
            if d > dist[node] {
                continue;
            }
            for &(next, w) in &self.adjacency[node] {
                let candidate = d + w;
                if candidate < dist[next] {
                    dist[next] = candidate;
                    heap.push(HeapEntry { dist: candidate, node: next });
                }
            }
        }
        dist
    }

    /// Largest finite induced distance over all pairs.
    pub fn diameter(&self) -> f64 {
        (0..self.len())
            .flat_map(|i| self.shortest_paths(i))
            .filter(|d| d.is_finite())
            .fold(0.0, f64::max)
    }

    /// Indices of locations without any incident edge.
    pub fn isolated_nodes(&self) -> Vec<usize> {
        let mut degree = vec![0usize; self.len()];
        for e in self.edges() {
            degree[e.source] += 1;
            degree[e.target] += 1;
        }
        degree.iter().enumerate().filter(|(_, &d)| d == 0).map(|(i, _)| i).collect()
    }

    pub fn isolated_ids(&self) -> Vec<String> {
        self.isolated_nodes().into_iter().map(|i| self.locations[i].id.clone()).collect()
    }

    /// True when every location reaches every other one.
    pub fn is_connected(&self) -> bool {
        self.is_empty() || self.shortest_paths(0).iter().all(|d| d.is_finite())
    }

    /// Sum of edge weights, counting each undirected edge once.
    pub fn total_weight(&self) -> f64 {
        let w: f64 = self.edges().map(|e| e.weight).sum();
        if self.symmetric {
            w / 2.0
        } else {
            w
        }
    }

    fn metric_weight(&self, i: usize, j: usize) -> Result<f64, SpatialError> {
        let w = haversine(&self.locations[i], &self.locations[j]);
        if w > 0.0 {
            Ok(w)
        } else {
            Err(SpatialError::CoincidentLocations(
                self.locations[i].id.clone(),
                self.locations[j].id.clone(),
            ))
        }
    }

    fn check_index(&self, index: usize) -> Result<(), SpatialError> {
        if index < self.len() {
            Ok(())
        } else {
            Err(SpatialError::InvalidIndex { index, len: self.len() })
        }
    }

    fn check_edge(&self, e: Edge) -> Result<(), SpatialError> {
        self.check_index(e.source)?;
        self.check_index(e.target)?;
        if e.source == e.target {
            return Err(SpatialError::SelfLoop(e.source));
        }
        if !(e.weight > 0.0 && e.weight.is_finite()) {
            return Err(SpatialError::InvalidWeight(e.weight));
        }
        Ok(())
    }

    /// Insert or overwrite `source -> target`.
    fn insert(&mut self, source: usize, target: usize, weight: f64) {
        let out = &mut self.adjacency[source];
        match out.binary_search_by_key(&target, |&(t, _)| t) {
            Ok(k) => out[k].1 = weight,
            Err(k) => out.insert(k, (target, weight)),
        }
    }
}

/// Construction strategy, as named in pipeline configs and on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "snake_case")]
pub enum ModelStrategy {
    Full,
    Delta { delta: f64 },
    Mst,
    EnhancedMsg { alpha: f64 },
}

impl ModelStrategy {
    pub fn build(&self, locations: Vec<Location>) -> Result<SpatialModel, SpatialError> {
        match *self {
            ModelStrategy::Full => SpatialModel::full(locations),
            ModelStrategy::Delta { delta } => SpatialModel::delta(locations, delta),
            ModelStrategy::Mst => SpatialModel::mst(locations),
            ModelStrategy::EnhancedMsg { alpha } => SpatialModel::enhanced_msg(locations, alpha),
        }
    }
}

impl std::str::FromStr for ModelStrategy {
    type Err = String;

    /// `full`, `mst`, `delta:<meters>` or `enhanced_msg:<alpha>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        let number = |a: Option<&str>| -> Result<f64, String> {
            a.ok_or_else(|| format!("strategy `{name}` needs a numeric argument"))?
                .parse::<f64>()
                .map_err(|e| format!("bad argument for `{name}`: {e}"))
        };
        match name {
            "full" => Ok(ModelStrategy::Full),
            "mst" => Ok(ModelStrategy::Mst),
            "delta" => Ok(ModelStrategy::Delta { delta: number(arg)? }),
            "enhanced_msg" | "enhanced" => Ok(ModelStrategy::EnhancedMsg { alpha: number(arg)? }),
            other => Err(format!("unknown model strategy `{other}`")),
        }
    }
}

fn validate_locations(locations: &[Location]) -> Result<(), SpatialError> {
    let mut seen = HashSet::new();
    for l in locations {
        l.validate()?;
        if !seen.insert(l.id.as_str()) {
            return Err(SpatialError::DuplicateId(l.id.clone()));
        }
    }
    Ok(())
}

#[derive(PartialEq)]
struct HeapEntry {
    dist: f64,
    node: usize,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.dist.total_cmp(&self.dist).then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
