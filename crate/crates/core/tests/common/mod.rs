//! Brute-force reference implementations shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use strel_core::spatial::{haversine, Edge, Location, SpatialModel};
use strel_core::strel::{Comparison, Formula, Interval, Term};
use strel_core::trace::SpatioTemporalTrace;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Distinct points on a small lat/lon grid cell.
pub fn locations(n: usize) -> Vec<Location> {
    (0..n).map(|i| Location::new(format!("l{i}"), 0.001 * i as f64, 0.0)).collect()
}

pub fn random_locations(rng: &mut ChaCha8Rng, n: usize) -> Vec<Location> {
    let mut out: Vec<Location> = Vec::with_capacity(n);
    while out.len() < n {
        let lat = 55.9 + rng.gen_range(0.0..0.05);
        let lon = -3.2 + rng.gen_range(0.0..0.08);
        if out.iter().all(|l| l.lat != lat || l.lon != lon) {
            out.push(Location::new(format!("s{}", out.len()), lat, lon));
        }
    }
    out
}

/// Random graph with small integer weights. Symmetric unless `directed`.
/// With `connected` a random spanning tree is laid down first.
pub fn random_graph(rng: &mut ChaCha8Rng, n: usize, connected: bool, directed: bool) -> SpatialModel {
    let mut edges = Vec::new();
    let mut seen = BTreeSet::new();
    let mut add = |edges: &mut Vec<Edge>, a: usize, b: usize, w: f64| {
        if a != b && seen.insert((a, b)) {
            edges.push(Edge { source: a, target: b, weight: w });
            if !directed {
                seen.insert((b, a));
            }
        }
    };
    if connected {
        for i in 1..n {
            let j = rng.gen_range(0..i);
            let w = rng.gen_range(3..=8) as f64;
            add(&mut edges, i, j, w);
            if directed {
                add(&mut edges, j, i, w);
            }
        }
    }
    let density: f64 = rng.gen_range(0.0..0.7);
    for a in 0..n {
        for b in 0..n {
            if a != b && (directed || a < b) && rng.gen_bool(density) {
                let w = rng.gen_range(3..=8) as f64;
                add(&mut edges, a, b, w);
            }
        }
    }
    SpatialModel::from_edges(locations(n), edges, !directed).unwrap()
}

/// Trace over variables `x` and `y` with integer values and unit step.
pub fn random_trace(rng: &mut ChaCha8Rng, n: usize, len: usize) -> SpatioTemporalTrace {
    let values = (0..n)
        .map(|_| (0..len).map(|_| vec![rng.gen_range(-5..=5) as f64, rng.gen_range(-5..=5) as f64]).collect())
        .collect();
    let ids = (0..n).map(|i| format!("l{i}")).collect();
    SpatioTemporalTrace::new(vec!["x".into(), "y".into()], ids, 0.0, 1.0, values).unwrap()
}

fn comparison(rng: &mut ChaCha8Rng) -> Comparison {
    *[Comparison::Gt, Comparison::Ge, Comparison::Lt, Comparison::Le].choose(rng).unwrap()
}

fn variable(rng: &mut ChaCha8Rng) -> &'static str {
    if rng.gen_bool(0.5) {
        "x"
    } else {
        "y"
    }
}

fn time_interval(rng: &mut ChaCha8Rng) -> Interval {
    let lo = rng.gen_range(0..=2) as f64;
    let hi = if rng.gen_bool(0.15) { f64::INFINITY } else { lo + rng.gen_range(1..=3) as f64 };
    Interval::new(lo, hi)
}

fn distance_interval(rng: &mut ChaCha8Rng) -> Interval {
    let lo = if rng.gen_bool(0.5) { 0.0 } else { rng.gen_range(1..=8) as f64 };
    let hi = if rng.gen_bool(0.3) { f64::INFINITY } else { lo + rng.gen_range(0..=8) as f64 };
    Interval::new(lo, hi)
}

/// Random formula of depth at most `depth` over every operator.
pub fn random_formula(rng: &mut ChaCha8Rng, depth: usize) -> Formula {
    if depth <= 1 || rng.gen_bool(0.2) {
        return if rng.gen_bool(0.08) {
            Formula::True
        } else {
            Formula::atom(variable(rng), comparison(rng), rng.gen_range(-3..=3) as f64)
        };
    }
    let sub = |rng: &mut ChaCha8Rng| random_formula(rng, depth - 1);
    match rng.gen_range(0..12) {
        0 => Formula::not(sub(rng)),
        1 => Formula::and(sub(rng), sub(rng)),
        2 => Formula::or(sub(rng), sub(rng)),
        3 => Formula::until(time_interval(rng), sub(rng), sub(rng)),
        4 => Formula::eventually(time_interval(rng), sub(rng)),
        5 => Formula::globally(time_interval(rng), sub(rng)),
        6 => Formula::reach(distance_interval(rng), sub(rng), sub(rng)),
        7 => Formula::escape(distance_interval(rng), sub(rng)),
        8 => Formula::somewhere(distance_interval(rng), sub(rng)),
        9 => Formula::everywhere(distance_interval(rng), sub(rng)),
        10 => Formula::surround(distance_interval(rng), sub(rng), sub(rng)),
        _ => Formula::not(sub(rng)),
    }
}

/// Random template whose holes each appear once, named `p0, p1, ...`.
/// Holes replace atom thresholds and interval bounds with probability `hole`.
pub fn random_template(rng: &mut ChaCha8Rng, depth: usize, hole: f64) -> Formula<Term> {
    let mut next = 0;
    let f = random_formula(rng, depth);
    let mut fresh = |rng: &mut ChaCha8Rng, v: &f64| -> Result<Term, ()> {
        if v.is_finite() && rng.gen_bool(hole) {
            next += 1;
            Ok(Term::Hole(format!("p{}", next - 1)))
        } else {
            Ok(Term::Num(*v))
        }
    };
    f.try_map(&mut |v| fresh(rng, v)).unwrap()
}

// --- robustness by enumeration -------------------------------------------------

/// Every walk from `start` as `(location, distance so far)` sequences,
/// extended while the distance stays within `limit` and the walk has fewer
/// than `max_edges` edges.
pub fn walks(model: &SpatialModel, start: usize, limit: f64, max_edges: usize) -> Vec<Vec<(usize, f64)>> {
    let mut out = Vec::new();
    let mut stack = vec![vec![(start, 0.0)]];
    while let Some(w) = stack.pop() {
        let &(last, dist) = w.last().unwrap();
        if dist <= limit && w.len() - 1 < max_edges {
            for &(next, weight) in model.neighbors(last) {
                let mut longer = w.clone();
                longer.push((next, dist + weight));
                stack.push(longer);
            }
        }
        out.push(w);
    }
    out
}

/// Robustness of a walk-based spatial operator: for each walk whose final
/// location appears there for the first time at a distance inside `range`,
/// the final `target` value met with the `through` values before it.
fn spatial(model: &SpatialModel, range: &Interval, through: &[f64], target: &[f64], start: usize) -> f64 {
    let max_edges = if range.hi.is_infinite() { model.len() } else { usize::MAX };
    let mut best = f64::NEG_INFINITY;
    for w in walks(model, start, range.hi, max_edges) {
        let &(last, dist) = w.last().unwrap();
        let first = w.iter().position(|&(l, _)| l == last).unwrap() == w.len() - 1;
        if !first || dist < range.lo || dist > range.hi {
            continue;
        }
        let mut v = target[last];
        for &(l, _) in &w[..w.len() - 1] {
            v = v.min(through[l]);
        }
        best = best.max(v);
    }
    best
}

/// Robustness at every `[location][time]` by direct enumeration over walks
/// and time windows.
pub fn oracle_table(model: &SpatialModel, trace: &SpatioTemporalTrace, f: &Formula) -> Vec<Vec<f64>> {
    let n = model.len();
    let len = trace.len();
    let window = |t: usize, i: &Interval| -> Vec<usize> {
        let lo = (i.lo / trace.step()).ceil() as usize;
        (t + lo..len).filter(|&s| ((s - t) as f64) * trace.step() <= i.hi).collect()
    };
    let column = |table: &Vec<Vec<f64>>, t: usize| -> Vec<f64> { (0..n).map(|l| table[l][t]).collect() };
    let map = |g: &dyn Fn(usize, usize) -> f64| -> Vec<Vec<f64>> {
        (0..n).map(|l| (0..len).map(|t| g(l, t)).collect()).collect()
    };
    match f {
        Formula::True => vec![vec![f64::INFINITY; len]; n],
        Formula::Atom { var, cmp, threshold } => {
            let v = trace.variable_index(var).unwrap();
            map(&|l, t| {
                let x = trace.value(l, t, v);
                match cmp {
                    Comparison::Gt | Comparison::Ge => x - threshold,
                    Comparison::Lt | Comparison::Le => threshold - x,
                }
            })
        }
        Formula::Not(a) => {
            let a = oracle_table(model, trace, a);
            map(&|l, t| -a[l][t])
        }
        Formula::And(a, b) => {
            let (a, b) = (oracle_table(model, trace, a), oracle_table(model, trace, b));
            map(&|l, t| a[l][t].min(b[l][t]))
        }
        Formula::Or(a, b) => {
            let (a, b) = (oracle_table(model, trace, a), oracle_table(model, trace, b));
            map(&|l, t| a[l][t].max(b[l][t]))
        }
        Formula::Eventually(i, a) => {
            let a = oracle_table(model, trace, a);
            map(&|l, t| window(t, i).into_iter().map(|s| a[l][s]).fold(f64::NEG_INFINITY, f64::max))
        }
        Formula::Globally(i, a) => {
            let a = oracle_table(model, trace, a);
            map(&|l, t| window(t, i).into_iter().map(|s| a[l][s]).fold(f64::INFINITY, f64::min))
        }
        Formula::Until(i, a, b) => {
            let (a, b) = (oracle_table(model, trace, a), oracle_table(model, trace, b));
            map(&|l, t| {
                window(t, i)
                    .into_iter()
                    .map(|s| (t..s).map(|u| a[l][u]).fold(b[l][s], f64::min))
                    .fold(f64::NEG_INFINITY, f64::max)
            })
        }
        Formula::Reach(i, a, b) => {
            let (a, b) = (oracle_table(model, trace, a), oracle_table(model, trace, b));
            map(&|l, t| spatial(model, i, &column(&a, t), &column(&b, t), l))
        }
        Formula::Escape(i, a) => {
            let a = oracle_table(model, trace, a);
            map(&|l, t| {
                let col = column(&a, t);
                spatial(model, i, &col, &col, l)
            })
        }
        Formula::Somewhere(i, a) => {
            let a = oracle_table(model, trace, a);
            let top = vec![f64::INFINITY; n];
            map(&|l, t| spatial(model, i, &top, &column(&a, t), l))
        }
        Formula::Everywhere(i, a) => {
            let a = oracle_table(model, trace, a);
            let top = vec![f64::INFINITY; n];
            map(&|l, t| {
                let negated: Vec<f64> = column(&a, t).iter().map(|v| -v).collect();
                -spatial(model, i, &top, &negated, l)
            })
        }
        Formula::Surround(i, a, b) => {
            // inside `a`, no `a`-route leaves to a location that is neither,
            // and `a` does not stretch past the outer radius
            let (ta, tb) = (oracle_table(model, trace, a), oracle_table(model, trace, b));
            let outer = Interval::new(i.hi, f64::INFINITY);
            map(&|l, t| {
                let ca = column(&ta, t);
                let neither: Vec<f64> = (0..n).map(|x| -(ca[x].max(tb[x][t]))).collect();
                let leak = spatial(model, i, &ca, &neither, l);
                let escape = spatial(model, &outer, &ca, &ca, l);
                ca[l].min(-leak).min(-escape)
            })
        }
    }
}

// --- graphs -------------------------------------------------------------------

/// Shortest route distance by enumerating simple paths.
pub fn shortest_by_paths(model: &SpatialModel, from: usize, to: usize) -> f64 {
    fn go(model: &SpatialModel, at: usize, to: usize, dist: f64, seen: &mut Vec<bool>, best: &mut f64) {
        if at == to {
            *best = best.min(dist);
            return;
        }
        for &(next, w) in model.neighbors(at) {
            if !seen[next] {
                seen[next] = true;
                go(model, next, to, dist + w, seen, best);
                seen[next] = false;
            }
        }
    }
    let mut seen = vec![false; model.len()];
    seen[from] = true;
    let mut best = f64::INFINITY;
    go(model, from, to, 0.0, &mut seen, &mut best);
    best
}

/// Edge set `(min, max)` of the cheapest spanning tree over the complete
/// haversine graph, by trying every `(n-1)`-subset of edges.
pub fn exhaustive_spanning_tree(locations: &[Location]) -> (BTreeSet<(usize, usize)>, f64) {
    let n = locations.len();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let mut best: (BTreeSet<(usize, usize)>, f64) = (BTreeSet::new(), f64::INFINITY);
    if n <= 1 {
        return (BTreeSet::new(), 0.0);
    }
    let k = n - 1;
    let mut chosen: Vec<usize> = (0..k).collect();
    loop {
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], x: usize) -> usize {
            let mut r = x;
            while p[r] != r {
                r = p[r];
            }
            p[x] = r;
            r
        }
        let mut tree = true;
        let mut weight = 0.0;
        for &c in &chosen {
            let (a, b) = pairs[c];
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra == rb {
                tree = false;
                break;
            }
            parent[ra] = rb;
            weight += haversine(&locations[a], &locations[b]);
        }
        if tree && weight < best.1 {
            best = (chosen.iter().map(|&c| pairs[c]).collect(), weight);
        }
        // next combination
        let mut i = k;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if chosen[i] < pairs.len() - k + i {
                chosen[i] += 1;
                for j in i + 1..k {
                    chosen[j] = chosen[j - 1] + 1;
                }
                break;
            }
        }
    }
}

pub fn undirected_edges(model: &SpatialModel) -> BTreeSet<(usize, usize)> {
    model.edges().map(|e| (e.source.min(e.target), e.source.max(e.target))).collect()
}

// --- clustering -----------------------------------------------------------------

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Complete-linkage merges `(kept, absorbed, height)` recomputing every
/// cluster distance from scratch at each step. Clusters are named by their
/// smallest member; ties go to the smallest name pair.
pub fn naive_complete_linkage(points: &[Vec<f64>]) -> Vec<(usize, usize, f64)> {
    let mut clusters: Vec<Vec<usize>> = (0..points.len()).map(|i| vec![i]).collect();
    let mut merges = Vec::new();
    while clusters.len() > 1 {
        let mut best: Option<(f64, usize, usize)> = None;
        for a in 0..clusters.len() {
            for b in a + 1..clusters.len() {
                let d = clusters[a]
                    .iter()
                    .flat_map(|&i| clusters[b].iter().map(move |&j| (i, j)))
                    .map(|(i, j)| euclid(&points[i], &points[j]))
                    .fold(0.0, f64::max);
                let key = (clusters[a][0].min(clusters[b][0]), clusters[a][0].max(clusters[b][0]));
                let better = match best {
                    None => true,
                    Some((bd, ba, bb)) => {
                        let bkey = (clusters[ba][0].min(clusters[bb][0]), clusters[ba][0].max(clusters[bb][0]));
                        d < bd || (d == bd && key < bkey)
                    }
                };
                if better {
                    best = Some((d, a, b));
                }
            }
        }
        let (d, a, b) = best.unwrap();
        let (na, nb) = (clusters[a][0], clusters[b][0]);
        let absorbed = clusters.remove(b);
        clusters[a].extend(absorbed);
        clusters[a].sort_unstable();
        merges.push((na.min(nb), na.max(nb), d));
    }
    merges
}

// --- projection and trees ---------------------------------------------------------

/// Tightest satisfying value of a single parameter, scanning a grid of
/// `steps + 1` evenly spaced values. `None` when nothing satisfies.
pub fn linear_scan(lo: f64, hi: f64, positive: bool, steps: usize, holds: impl Fn(f64) -> bool) -> Option<f64> {
    let grid = (0..=steps).map(|i| if i == steps { hi } else { lo + (hi - lo) * i as f64 / steps as f64 });
    let mut found = None;
    for v in grid {
        if holds(v) {
            if positive {
                return Some(v);
            }
            found = Some(v);
        } else if !positive && found.is_some() {
            break;
        }
    }
    found
}

fn gini(labels: &[usize]) -> f64 {
    let n = labels.len() as f64;
    let mut counts = std::collections::BTreeMap::new();
    for &l in labels {
        *counts.entry(l).or_insert(0.0) += 1.0;
    }
    1.0 - counts.values().map(|c: &f64| (c / n) * (c / n)).sum::<f64>()
}

/// Best root split `(feature, threshold)` by trying every midpoint, or `None`
/// when no split lowers the weighted impurity.
pub fn best_split(points: &[Vec<f64>], labels: &[usize]) -> Option<(usize, f64)> {
    let n = points.len() as f64;
    let parent = gini(labels);
    let mut best: Option<(f64, usize, f64)> = None;
    for f in 0..points[0].len() {
        let mut values: Vec<f64> = points.iter().map(|p| p[f]).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        for w in values.windows(2) {
            let t = (w[0] + w[1]) / 2.0;
            let (l, r): (Vec<usize>, Vec<usize>) = {
                let mut l = Vec::new();
                let mut r = Vec::new();
                for (p, &y) in points.iter().zip(labels) {
                    if p[f] < t {
                        l.push(y)
                    } else {
                        r.push(y)
                    }
                }
                (l, r)
            };
            let score = gini(&l) * l.len() as f64 / n + gini(&r) * r.len() as f64 / n;
            if score < parent - 1e-12 && best.is_none_or(|(b, _, _)| score < b - 1e-12) {
                best = Some((score, f, t));
            }
        }
    }
    best.map(|(_, f, t)| (f, t))
}
