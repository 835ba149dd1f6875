//! Offline monitoring over a sampled trace and a weighted location graph.
//!
//! Both semantics share one engine parameterised by [`Verdict`]: robustness
//! uses `f64` with min/max, satisfaction uses `bool` with and/or.

use std::fmt::Debug;

use thiserror::Error;

use super::formula::{Comparison, Formula};
use crate::spatial::SpatialModel;
use crate::trace::SpatioTemporalTrace;

/// Tolerance when converting time bounds to sample offsets.
const GRID_EPS: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum MonitorError {
    #[error("trace locations do not match the spatial model (trace has {trace}, model has {model})")]
    LocationMismatch { trace: usize, model: usize },
    #[error("trace location {index} is `{trace}` but the model has `{model}`")]
    LocationOrder { index: usize, trace: String, model: String },
    #[error("trace has missing samples; clean it first")]
    IncompleteTrace,
    #[error("trace is empty")]
    EmptyTrace,
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("location index {0} out of range")]
    LocationOutOfRange(usize),
    #[error("unknown location `{0}`")]
    UnknownLocation(String),
    #[error("time index {0} out of range")]
    TimeOutOfRange(usize),
    #[error("time {0} is not on the sample grid")]
    OffGrid(f64),
}

/// Value domain of an evaluation.
pub trait Verdict: Copy + PartialOrd + Debug + Send + Sync + 'static {
    const TOP: Self;
    const BOTTOM: Self;

    fn atom(value: f64, cmp: Comparison, threshold: f64) -> Self;
    fn negate(self) -> Self;

    fn meet(self, other: Self) -> Self {
        if other < self {
            other
        } else {
            self
        }
    }

    fn join(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }
}

impl Verdict for f64 {
    const TOP: Self = f64::INFINITY;
    const BOTTOM: Self = f64::NEG_INFINITY;

    fn atom(value: f64, cmp: Comparison, threshold: f64) -> Self {
        if cmp.is_lower_bound() {
            value - threshold
        } else {
            threshold - value
        }
    }

    fn negate(self) -> Self {
        -self
    }
}

impl Verdict for bool {
    const TOP: Self = true;
    const BOTTOM: Self = false;

    fn atom(value: f64, cmp: Comparison, threshold: f64) -> Self {
        match cmp {
            Comparison::Gt => value > threshold,
            Comparison::Ge => value >= threshold,
            Comparison::Lt => value < threshold,
            Comparison::Le => value <= threshold,
        }
    }

    fn negate(self) -> Self {
        !self
    }
}

#[derive(Debug, Clone)]
enum Node {
    True,
    Atom { var: usize, cmp: Comparison, threshold: f64 },
    Not(usize),
    And(usize, usize),
    Or(usize, usize),
    Until { lo: usize, hi: usize, left: usize, right: usize },
    Eventually { lo: usize, hi: usize, arg: usize },
    Globally { lo: usize, hi: usize, arg: usize },
    Reach { d1: f64, d2: f64, hops: usize, left: usize, right: usize },
}

/// Checked pairing of a spatial model with a trace over the same locations.
#[derive(Debug, Clone, Copy)]
pub struct Monitor<'a> {
    model: &'a SpatialModel,
    trace: &'a SpatioTemporalTrace,
    extra_hops: usize,
}

impl<'a> Monitor<'a> {
    pub fn new(model: &'a SpatialModel, trace: &'a SpatioTemporalTrace) -> Result<Self, MonitorError> {
        if trace.num_locations() != model.len() {
            return Err(MonitorError::LocationMismatch { trace: trace.num_locations(), model: model.len() });
        }
        for (index, (tid, loc)) in trace.location_ids().iter().zip(model.locations()).enumerate() {
            if *tid != loc.id {
                return Err(MonitorError::LocationOrder { index, trace: tid.clone(), model: loc.id.clone() });
            }
        }
        if trace.is_empty() {
            return Err(MonitorError::EmptyTrace);
        }
        if !trace.is_complete() {
            return Err(MonitorError::IncompleteTrace);
        }
        Ok(Monitor { model, trace, extra_hops: 0 })
    }

    /// Explore walks this many edges longer than the default bound.
    pub fn with_extra_hops(mut self, extra: usize) -> Self {
        self.extra_hops = extra;
        self
    }

    pub fn model(&self) -> &'a SpatialModel {
        self.model
    }

    pub fn trace(&self) -> &'a SpatioTemporalTrace {
        self.trace
    }

    /// Maximum walk length (in edges) explored by a spatial operator with
    /// upper distance bound `d2`.
    pub fn hop_bound(&self, d2: f64) -> usize {
        let n = self.model.len();
        let base = match self.model.min_edge_weight() {
            None => 0,
            Some(_) if d2.is_infinite() => n,
            Some(w) => {
                let k = (d2 / w).floor();
                // smallest i with i * w > d2
                let mut k = if k >= (usize::MAX / 2) as f64 { usize::MAX / 2 } else { k as usize };
                while (k as f64) * w <= d2 {
                    k += 1;
                }
                k
            }
        };
        base.saturating_add(self.extra_hops)
    }

    pub fn robustness(&self, formula: &Formula, location: usize, time: usize) -> Result<f64, MonitorError> {
        self.evaluate(formula, location, time)
    }

    pub fn satisfies(&self, formula: &Formula, location: usize, time: usize) -> Result<bool, MonitorError> {
        self.evaluate(formula, location, time)
    }

    /// Evaluate at a location id and an absolute time on the sample grid.
    pub fn robustness_at(&self, formula: &Formula, location_id: &str, time: f64) -> Result<f64, MonitorError> {
        let loc = self
            .model
            .index_of(location_id)
            .ok_or_else(|| MonitorError::UnknownLocation(location_id.to_string()))?;
        let t = self.trace.time_index(time).ok_or(MonitorError::OffGrid(time))?;
        self.robustness(formula, loc, t)
    }

    pub fn evaluate<V: Verdict>(&self, formula: &Formula, location: usize, time: usize) -> Result<V, MonitorError> {
        let mut eval = Evaluation::<V>::new(self, formula)?;
        eval.check(location, time)?;
        Ok(eval.eval(eval.root, location, time))
    }

    /// Values at every location for one time index.
    pub fn evaluate_all<V: Verdict>(&self, formula: &Formula, time: usize) -> Result<Vec<V>, MonitorError> {
        let mut eval = Evaluation::<V>::new(self, formula)?;
        eval.check(0, time)?;
        Ok((0..self.model.len()).map(|l| eval.eval(eval.root, l, time)).collect())
    }

    /// Robustness at every (location, time) pair, indexed `[location][time]`.
    pub fn robustness_table(&self, formula: &Formula) -> Result<Vec<Vec<f64>>, MonitorError> {
        let mut eval = Evaluation::<f64>::new(self, formula)?;
        let (n, len) = (self.model.len(), self.trace.len());
        Ok((0..n).map(|l| (0..len).map(|t| eval.eval(eval.root, l, t)).collect()).collect())
    }
}

struct Evaluation<'m, 'a, V> {
    monitor: &'m Monitor<'a>,
    nodes: Vec<Node>,
    root: usize,
    memo: Vec<Vec<Option<V>>>,
    len: usize,
}

impl<'m, 'a, V: Verdict> Evaluation<'m, 'a, V> {
    fn new(monitor: &'m Monitor<'a>, formula: &Formula) -> Result<Self, MonitorError> {
        let mut eval = Evaluation { monitor, nodes: Vec::new(), root: 0, memo: Vec::new(), len: monitor.trace.len() };
        eval.root = eval.compile(formula)?;
        let cells = monitor.model.len() * eval.len;
        eval.memo = vec![vec![None; cells]; eval.nodes.len()];
        Ok(eval)
    }

    fn check(&self, location: usize, time: usize) -> Result<(), MonitorError> {
        if location >= self.monitor.model.len() {
            return Err(MonitorError::LocationOutOfRange(location));
        }
        if time >= self.len {
            return Err(MonitorError::TimeOutOfRange(time));
        }
        Ok(())
    }

    fn push(&mut self, node: Node) -> usize {
        self.nodes.push(node);
        self.nodes.len() - 1
    }

    fn offsets(&self, lo: f64, hi: f64) -> (usize, usize) {
        let step = self.monitor.trace.step();
        let to_offset = |x: f64| if x >= usize::MAX as f64 { usize::MAX } else { x as usize };
        let lo = to_offset((lo / step - GRID_EPS).ceil().max(0.0));
        let hi = if hi.is_infinite() { usize::MAX } else { to_offset((hi / step + GRID_EPS).floor().max(0.0)) };
        (lo, hi)
    }

    fn compile(&mut self, f: &Formula) -> Result<usize, MonitorError> {
        let node = match f {
            Formula::True => Node::True,
            Formula::Atom { var, cmp, threshold } => {
                let var = self
                    .monitor
                    .trace
                    .variable_index(var)
                    .ok_or_else(|| MonitorError::UnknownVariable(var.clone()))?;
                Node::Atom { var, cmp: *cmp, threshold: *threshold }
            }
            Formula::Not(a) => Node::Not(self.compile(a)?),
            Formula::And(a, b) => Node::And(self.compile(a)?, self.compile(b)?),
            Formula::Or(a, b) => Node::Or(self.compile(a)?, self.compile(b)?),
            Formula::Until(i, a, b) => {
                let (lo, hi) = self.offsets(i.lo, i.hi);
                Node::Until { lo, hi, left: self.compile(a)?, right: self.compile(b)? }
            }
            Formula::Eventually(i, a) => {
                let (lo, hi) = self.offsets(i.lo, i.hi);
                Node::Eventually { lo, hi, arg: self.compile(a)? }
            }
            Formula::Globally(i, a) => {
                let (lo, hi) = self.offsets(i.lo, i.hi);
                Node::Globally { lo, hi, arg: self.compile(a)? }
            }
            Formula::Reach(i, a, b) => Node::Reach {
                d1: i.lo,
                d2: i.hi,
                hops: self.monitor.hop_bound(i.hi),
                left: self.compile(a)?,
                right: self.compile(b)?,
            },
            Formula::Escape(i, a) => {
                // every position up to and including the target must hold
                let arg = self.compile(a)?;
                Node::Reach { d1: i.lo, d2: i.hi, hops: self.monitor.hop_bound(i.hi), left: arg, right: arg }
            }
            Formula::Somewhere(..) | Formula::Everywhere(..) | Formula::Surround(..) => {
                let sugar = match f {
                    Formula::Surround(..) => f.expand_surround(),
                    _ => f.desugar(),
                };
                return self.compile(&sugar);
            }
        };
        Ok(self.push(node))
    }

    fn eval(&mut self, node: usize, loc: usize, t: usize) -> V {
        let cell = loc * self.len + t;
        if let Some(v) = self.memo[node][cell] {
            return v;
        }
        let v = match self.nodes[node].clone() {
            Node::True => V::TOP,
            Node::Atom { var, cmp, threshold } => V::atom(self.monitor.trace.value(loc, t, var), cmp, threshold),
            Node::Not(a) => self.eval(a, loc, t).negate(),
            Node::And(a, b) => self.eval(a, loc, t).meet(self.eval(b, loc, t)),
            Node::Or(a, b) => self.eval(a, loc, t).join(self.eval(b, loc, t)),
            Node::Eventually { lo, hi, arg } => {
                let mut best = V::BOTTOM;
                for s in self.window(t, lo, hi) {
                    best = best.join(self.eval(arg, loc, s));
                }
                best
            }
            Node::Globally { lo, hi, arg } => {
                let mut worst = V::TOP;
                for s in self.window(t, lo, hi) {
                    worst = worst.meet(self.eval(arg, loc, s));
                }
                worst
            }
            Node::Until { lo, hi, left, right } => {
                let window = self.window(t, lo, hi);
                let mut best = V::BOTTOM;
                let mut prefix = V::TOP;
                for s in t..window.end {
                    if s >= window.start {
                        best = best.join(self.eval(right, loc, s).meet(prefix));
                    }
                    prefix = prefix.meet(self.eval(left, loc, s));
                }
                best
            }
            Node::Reach { d1, d2, hops, left, right } => {
                let n = self.monitor.model.len();
                let lv: Vec<V> = (0..n).map(|l| self.eval(left, l, t)).collect();
                let rv: Vec<V> = (0..n).map(|l| self.eval(right, l, t)).collect();
                reach(self.monitor.model, &lv, &rv, loc, d1, d2, hops)
            }
        };
        self.memo[node][cell] = Some(v);
        v
    }

    /// Sample indices `t + [lo, hi]`, clipped to the trace.
    fn window(&self, t: usize, lo: usize, hi: usize) -> std::ops::Range<usize> {
        let start = t.saturating_add(lo);
        let end = t.saturating_add(hi).saturating_add(1).min(self.len);
        start.min(end)..end
    }
}

/// Best value over walks from `start` that reach a target at walk distance
/// in `[d1, d2]` within `hops` edges, where a target counts at its first
/// occurrence only. A walk scores the target's `right` value met with the
/// `left` values of every earlier position.
pub(crate) fn reach<V: Verdict>(
    model: &SpatialModel,
    left: &[V],
    right: &[V],
    start: usize,
    d1: f64,
    d2: f64,
    hops: usize,
) -> V {
    let mut best = V::BOTTOM;
    if d1 <= 0.0 && 0.0 <= d2 {
        best = right[start];
    }
    if d1 <= 0.0 {
        // A revisit scores no better than the first visit, whose prefix is
        // shorter and whose distance is still inside [0, d2].
        best = best.join(reach_walks(model, left, right, start, None, d1, d2, hops, best));
    } else {
        for target in (0..model.len()).filter(|&x| x != start) {
            best = best.join(reach_walks(model, left, right, start, Some(target), d1, d2, hops, best));
        }
    }
    best
}

#[allow(clippy::too_many_arguments)]
fn reach_walks<V: Verdict>(
    model: &SpatialModel,
    left: &[V],
    right: &[V],
    start: usize,
    target: Option<usize>,
    d1: f64,
    d2: f64,
    hops: usize,
    floor: V,
) -> V {
    // Labels (distance, meet of left over earlier positions) per node.
    let mut labels: Vec<Vec<(f64, V)>> = vec![Vec::new(); model.len()];
    labels[start].push((0.0, V::TOP));
    let mut frontier = vec![(start, 0.0, V::TOP)];
    let mut best = floor;
    let mut found = V::BOTTOM;
    for _ in 0..hops {
        let mut next = Vec::new();
        for &(u, dist, prefix) in &frontier {
            let through = prefix.meet(left[u]);
            if !(through > best) {
                continue;
            }
            for &(x, w) in model.neighbors(u) {
                let nd = dist + w;
                if nd > d2 {
                    continue;
                }
                let dominated = labels[x]
                    .iter()
                    .any(|&(d, v)| v >= through && (d == nd || (d1 <= d && d <= nd)));
                if dominated {
                    continue;
                }
                labels[x].push((nd, through));
                if nd >= d1 && target.is_none_or(|tg| tg == x) {
                    let score = right[x].meet(through);
                    if score > best {
                        best = score;
                        found = score;
                    }
                }
                if target != Some(x) {
                    next.push((x, nd, through));
                }
            }
        }
        if next.is_empty() {
            break;
        }
        frontier = next;
    }
    found
}
