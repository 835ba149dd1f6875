//! End-to-end mining run driven by a JSON config, plus the helpers behind the
//! command-line tools.

mod svg;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::boxtree::{cluster_formulas, fit_tree, prune_search, ClusterFormula, DecisionTree};
use crate::clustering::{ahc_complete, choose_k, normalize, silhouette};
use crate::pstrel::{project_all, ProjectionSet, PstrelError, Template, TemplateSpec};
use crate::spatial::{read_locations, to_geojson, write_locations, Location, ModelStrategy, SpatialModel};
use crate::strel::{parse, Monitor};
use crate::trace::{generate_food_court, load_traces, FoodCourtConfig, SpatioTemporalTrace, DEFAULT_MISSING_THRESHOLD};

pub use svg::scatter;

/// Marker file left in the output directory when a run fails.
pub const FAILED_MARKER: &str = "FAILED";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(String),
    #[error("{stage}: {message}")]
    Data { stage: &'static str, message: String },
    #[error("{stage}: {message}")]
    Evaluation { stage: &'static str, message: String },
    #[error("writing {path}: {source}")]
    Output { path: PathBuf, source: std::io::Error },
}

impl PipelineError {
    /// Process exit status for this failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 2,
            PipelineError::Data { .. } | PipelineError::Output { .. } => 3,
            PipelineError::Evaluation { .. } => 4,
        }
    }

    fn data(stage: &'static str, e: impl std::fmt::Display) -> Self {
        PipelineError::Data { stage, message: e.to_string() }
    }

    fn eval(stage: &'static str, e: impl std::fmt::Display) -> Self {
        PipelineError::Evaluation { stage, message: e.to_string() }
    }
}

fn template_error(e: PstrelError) -> PipelineError {
    match e {
        PstrelError::Monitor(m) => PipelineError::eval("projection", m),
        PstrelError::UnknownVariable(_) | PstrelError::Io(_) | PstrelError::Json(_) => {
            PipelineError::Config(format!("template: {e}"))
        }
        other => PipelineError::Config(format!("template: {other}")),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusteringConfig {
    /// Fixed cluster count; when absent the count is chosen by silhouette.
    pub k: Option<usize>,
    pub k_min: usize,
    pub k_max: usize,
    pub normalize: bool,
}

impl Default for ClusteringConfig {
    fn default() -> Self {
        ClusteringConfig { k: None, k_min: 2, k_max: 8, normalize: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TreeConfig {
    pub max_depth: usize,
    pub folds: usize,
    pub acc_threshold: f64,
}

impl Default for TreeConfig {
    fn default() -> Self {
        TreeConfig { max_depth: 10, folds: 5, acc_threshold: 0.9 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    /// Location CSV; optional when a generator supplies locations.
    #[serde(default)]
    pub locations: Option<PathBuf>,
    #[serde(default)]
    pub traces: Option<PathBuf>,
    #[serde(default)]
    pub generator: Option<FoodCourtConfig>,
    pub model: ModelStrategy,
    pub template: PathBuf,
    #[serde(default)]
    pub clustering: ClusteringConfig,
    #[serde(default)]
    pub tree: TreeConfig,
    pub seed: u64,
    pub output_dir: PathBuf,
    #[serde(default = "default_missing")]
    pub missing_threshold: f64,
    /// Unit of trace time stamps, reported alongside timing parameters.
    #[serde(default)]
    pub time_unit: Option<String>,
}

fn default_missing() -> f64 {
    DEFAULT_MISSING_THRESHOLD
}

impl PipelineConfig {
    /// Read a config; relative paths are taken from the config's directory.
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, PipelineError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        let mut config: PipelineConfig =
            serde_json::from_str(&text).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(p) = config.locations.as_mut() {
            rebase(p);
        }
        if let Some(p) = config.traces.as_mut() {
            rebase(p);
        }
        rebase(&mut config.template);
        rebase(&mut config.output_dir);
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: &str| Err(PipelineError::Config(m.to_string()));
        match (&self.traces, &self.generator) {
            (Some(_), Some(_)) => return bad("give either `traces` or `generator`, not both"),
            (None, None) => return bad("one of `traces` or `generator` is required"),
            (Some(_), None) if self.locations.is_none() => return bad("`traces` requires `locations`"),
            _ => {}
        }
        if let Some(k) = self.clustering.k {
            if k == 0 {
                return bad("clustering.k must be at least 1");
            }
        } else if self.clustering.k_min < 2 || self.clustering.k_min > self.clustering.k_max {
            return bad("clustering range needs 2 <= k_min <= k_max");
        }
        if self.tree.max_depth == 0 || self.tree.folds < 2 {
            return bad("tree needs max_depth >= 1 and folds >= 2");
        }
        if !(0.0..=1.0).contains(&self.tree.acc_threshold) {
            return bad("tree.acc_threshold must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.missing_threshold) {
            return bad("missing_threshold must lie in [0, 1]");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StageTiming {
    pub stage: &'static str,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub locations: usize,
    pub dropped_locations: Vec<String>,
    pub unprojectable_locations: Vec<String>,
    pub model_edges: usize,
    pub isolated_locations: Vec<String>,
    pub parameters: Vec<String>,
    pub time_unit: Option<String>,
    pub num_clusters: usize,
    pub cluster_sizes: BTreeMap<usize, usize>,
    pub silhouette: Option<f64>,
    pub tree_depth: usize,
    /// Set when no depth reached the accuracy threshold and the
    /// maximum-depth tree was kept.
    pub tree_fallback: bool,
    pub tree_training_accuracy: f64,
    pub boxes_per_cluster: BTreeMap<usize, usize>,
    pub timings: Vec<StageTiming>,
    pub total_seconds: f64,
}

/// Everything a run produced, before it is written out.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub model: SpatialModel,
    pub trace: SpatioTemporalTrace,
    pub template: Template,
    pub projections: ProjectionSet,
    pub labels: BTreeMap<String, usize>,
    pub tree: DecisionTree,
    pub formulas: Vec<ClusterFormula>,
    pub report: RunReport,
}

struct Timer {
    start: Instant,
    stage: Instant,
    timings: Vec<StageTiming>,
}

impl Timer {
    fn new() -> Self {
        let now = Instant::now();
        Timer { start: now, stage: now, timings: Vec::new() }
    }

    fn lap(&mut self, stage: &'static str) {
        let now = Instant::now();
        self.timings.push(StageTiming { stage, seconds: (now - self.stage).as_secs_f64() });
        self.stage = now;
    }
}

/// Run the pipeline and write its artifacts. On failure a [`FAILED_MARKER`]
/// file naming the cause is left next to whatever was already written.
pub fn run(config: &PipelineConfig) -> Result<RunOutput, PipelineError> {
    let out = &config.output_dir;
    fs::create_dir_all(out).map_err(|source| PipelineError::Output { path: out.clone(), source })?;
    let marker = out.join(FAILED_MARKER);
    if marker.exists() {
        let _ = fs::remove_file(&marker);
    }
    let result = run_stages(config);
    if let Err(e) = &result {
        let _ = fs::write(&marker, format!("{e}\n"));
    }
    result
}

fn write(path: PathBuf, contents: impl AsRef<[u8]>) -> Result<(), PipelineError> {
    fs::write(&path, contents).map_err(|source| PipelineError::Output { path, source })
}

fn write_json(path: PathBuf, value: &impl Serialize) -> Result<(), PipelineError> {
    let text = serde_json::to_string_pretty(value).expect("serializable");
    write(path, text + "\n")
}

fn run_stages(config: &PipelineConfig) -> Result<RunOutput, PipelineError> {
    let out = &config.output_dir;
    let mut timer = Timer::new();
    let mut seeds = ChaCha8Rng::seed_from_u64(config.seed);
    let (generator_seed, tree_seed) = (seeds.next_u64(), seeds.next_u64());

    // ingest
    let (locations, raw) = match (&config.traces, &config.generator) {
        (Some(traces), None) => {
            let path = config.locations.as_ref().expect("validated");
            let locations = read_locations(path).map_err(|e| PipelineError::data("locations", e))?;
            let trace = load_traces(traces, &locations).map_err(|e| PipelineError::data("traces", e))?;
            (locations, trace)
        }
        (None, Some(gen)) => {
            let court = generate_food_court(gen, generator_seed).map_err(|e| PipelineError::Config(e.to_string()))?;
            let locations = match &config.locations {
                Some(path) => {
                    let given = read_locations(path).map_err(|e| PipelineError::data("locations", e))?;
                    if given.len() != court.locations.len() {
                        return Err(PipelineError::data("locations", "location file does not match the generator"));
                    }
                    given
                }
                None => court.locations,
            };
            (locations, court.trace)
        }
        _ => return Err(PipelineError::Config("one of `traces` or `generator` is required".into())),
    };
    let (trace, dropped) = raw.clean(config.missing_threshold).map_err(|e| PipelineError::data("cleaning", e))?;
    if !dropped.is_empty() {
        log::warn!("dropped {} location(s) with too many missing samples", dropped.len());
    }
    let kept: Vec<Location> =
        locations.into_iter().filter(|l| trace.location_ids().contains(&l.id)).collect();
    timer.lap("ingest");

    let model = config.model.build(kept).map_err(|e| PipelineError::data("model", e))?;
    let isolated = model.isolated_ids();
    if !isolated.is_empty() {
        log::warn!("{} isolated location(s) in the spatial model", isolated.len());
    }
    timer.lap("model");

    let spec = TemplateSpec::from_path(&config.template).map_err(template_error)?;
    let template = spec.resolve(&model, &trace).map_err(template_error)?;
    let monitor = Monitor::new(&model, &trace).map_err(|e| PipelineError::eval("projection", e))?;
    let projections = project_all(&template, &monitor).map_err(template_error)?;
    let mut csv_buf = Vec::new();
    projections.write_csv(&mut csv_buf).map_err(|e| PipelineError::data("projection", e))?;
    write(out.join("projections.csv"), csv_buf)?;
    timer.lap("projection");

    let ids: Vec<String> = projections.projected().map(|(id, _)| id.to_string()).collect();
    let points: Vec<Vec<f64>> = projections.projected().map(|(_, v)| v.to_vec()).collect();
    if points.is_empty() {
        return Err(PipelineError::data("clustering", "no location could be projected"));
    }
    let (labels, num_clusters, silhouette_score, silhouette_json) = match config.clustering.k {
        Some(k) => {
            let k = k.min(points.len());
            let a = ahc_complete(&points, k, config.clustering.normalize)
                .map_err(|e| PipelineError::data("clustering", e))?;
            let space = if config.clustering.normalize { normalize(&points).0 } else { points.clone() };
            let score = silhouette(&space, &a.labels).ok();
            (a.labels, k, score, json!({ "k": k, "fixed": true, "silhouette": score }))
        }
        None => {
            let k_max = config.clustering.k_max.min(points.len());
            if k_max < config.clustering.k_min {
                return Err(PipelineError::data(
                    "clustering",
                    format!("only {} projected location(s) for k_min = {}", points.len(), config.clustering.k_min),
                ));
            }
            let sel = choose_k(&points, config.clustering.k_min, k_max, config.clustering.normalize)
                .map_err(|e| PipelineError::data("clustering", e))?;
            let score = sel.scores.iter().find(|(k, _)| *k == sel.k).map(|s| s.1);
            let scores: Vec<_> = sel.scores.iter().map(|(k, s)| json!({ "k": k, "silhouette": s })).collect();
            (sel.assignment.labels, sel.k, score, json!({ "k": sel.k, "fixed": false, "scores": scores }))
        }
    };
    let mut clusters_csv = String::from("location_id,cluster\n");
    for (id, l) in ids.iter().zip(&labels) {
        clusters_csv.push_str(&format!("{id},{l}\n"));
    }
    write(out.join("clusters.csv"), clusters_csv)?;
    write_json(out.join("silhouette.json"), &silhouette_json)?;
    timer.lap("clustering");

    let (tree, depth_scores, fallback) = if points.len() >= 2 {
        let folds = config.tree.folds.min(points.len());
        let outcome =
            prune_search(&points, &labels, config.tree.max_depth, folds, config.tree.acc_threshold, tree_seed)
                .map_err(|e| PipelineError::data("tree", e))?;
        match outcome.chosen {
            Some((_, tree)) => (tree, outcome.scores, false),
            None => {
                log::warn!("no depth reached the accuracy threshold; keeping depth {}", config.tree.max_depth);
                let tree = fit_tree(&points, &labels, config.tree.max_depth).map_err(|e| PipelineError::data("tree", e))?;
                (tree, outcome.scores, true)
            }
        }
    } else {
        (fit_tree(&points, &labels, config.tree.max_depth).map_err(|e| PipelineError::data("tree", e))?, Vec::new(), false)
    };
    let cv: Vec<_> = depth_scores.iter().map(|(d, a)| json!({ "depth": d, "accuracy": a })).collect();
    write_json(
        out.join("tree.json"),
        &json!({ "parameters": template.param_names(), "depth": tree.depth(), "fallback": fallback, "cv": cv, "tree": tree }),
    )?;
    timer.lap("tree");

    let formulas = cluster_formulas(&tree, &template).map_err(template_error)?;
    let mut text = format!("template: {}\nparameters: {}\n", template.source(), template.param_names().join(", "));
    for label in 1..=num_clusters {
        match formulas.iter().find(|f| f.label == label) {
            Some(cf) => {
                text.push_str(&format!("\n[cluster {}] boxes: {}\n", cf.label, cf.boxes.len()));
                text.push_str(&format!("phi form: {}\n", cf.text));
                text.push_str(&format!("formula: {}\n", cf.expanded));
            }
            None => text.push_str(&format!("\n[cluster {label}] boxes: 0\nphi form: false\nformula: false\n")),
        }
    }
    write(out.join("formulas.txt"), text)?;

    let label_of: BTreeMap<String, usize> = ids.iter().cloned().zip(labels.iter().copied()).collect();
    let per_location: Vec<Option<usize>> = model.locations().iter().map(|l| label_of.get(&l.id).copied()).collect();
    write_json(out.join("model.geojson"), &to_geojson(&model, Some(&per_location)))?;
    let boxes: Vec<_> = formulas.iter().flat_map(|f| f.boxes.iter().cloned()).collect();
    let scatter_points: Vec<(String, Vec<f64>, usize)> =
        ids.iter().zip(&points).zip(&labels).map(|((id, p), &l)| (id.clone(), p.clone(), l)).collect();
    write(out.join("scatter.svg"), scatter(template.params(), &scatter_points, &boxes))?;
    timer.lap("export");

    let mut cluster_sizes = BTreeMap::new();
    for &l in &labels {
        *cluster_sizes.entry(l).or_insert(0) += 1;
    }
    let report = RunReport {
        locations: model.len(),
        dropped_locations: dropped,
        unprojectable_locations: projections.unprojectable().into_iter().map(String::from).collect(),
        model_edges: model.undirected_edge_count(),
        isolated_locations: isolated,
        parameters: template.param_names().into_iter().map(String::from).collect(),
        time_unit: config.time_unit.clone().or_else(|| Some(trace.time_unit().to_string()).filter(|u| !u.is_empty())),
        num_clusters,
        cluster_sizes,
        silhouette: silhouette_score,
        tree_depth: tree.depth(),
        tree_fallback: fallback,
        tree_training_accuracy: tree.accuracy(&points, &labels),
        boxes_per_cluster: (1..=num_clusters)
            .map(|l| (l, formulas.iter().find(|f| f.label == l).map_or(0, |f| f.boxes.len())))
            .collect(),
        total_seconds: (Instant::now() - timer.start).as_secs_f64(),
        timings: timer.timings,
    };
    write_json(out.join("report.json"), &report)?;

    Ok(RunOutput { model, trace, template, projections, labels: label_of, tree, formulas, report })
}

/// One row of a monitoring table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonitorRow {
    pub location_id: String,
    pub time: f64,
    pub robustness: f64,
    pub satisfied: bool,
}

/// Evaluate `formula` at one or all locations, at `time` (default: the first
/// sample).
pub fn monitor_rows(
    model: &SpatialModel,
    trace: &SpatioTemporalTrace,
    formula: &str,
    location: Option<&str>,
    time: Option<f64>,
) -> Result<Vec<MonitorRow>, PipelineError> {
    let f = parse(formula).map_err(|e| PipelineError::Config(format!("formula: {e}")))?;
    let monitor = Monitor::new(model, trace).map_err(|e| PipelineError::data("monitor", e))?;
    let t = match time {
        Some(time) => trace
            .time_index(time)
            .ok_or_else(|| PipelineError::data("monitor", format!("time {time} is not on the sample grid")))?,
        None => 0,
    };
    let indices: Vec<usize> = match location {
        Some(id) => vec![model
            .index_of(id)
            .ok_or_else(|| PipelineError::data("monitor", format!("unknown location `{id}`")))?],
        None => (0..model.len()).collect(),
    };
    let robustness: Vec<f64> = monitor.evaluate_all(&f, t).map_err(|e| PipelineError::eval("monitor", e))?;
    let satisfied: Vec<bool> = monitor.evaluate_all(&f, t).map_err(|e| PipelineError::eval("monitor", e))?;
    Ok(indices
        .into_iter()
        .map(|i| MonitorRow {
            location_id: model.location(i).id.clone(),
            time: trace.time(t),
            robustness: robustness[i],
            satisfied: satisfied[i],
        })
        .collect())
}

/// Load locations and traces for monitoring; the trace is cleaned with the
/// default missing-data threshold and the model built over what remains.
pub fn load_for_monitoring(
    locations: &Path,
    traces: &Path,
    strategy: ModelStrategy,
) -> Result<(SpatialModel, SpatioTemporalTrace, Vec<String>), PipelineError> {
    let locs = read_locations(locations).map_err(|e| PipelineError::data("locations", e))?;
    let raw = load_traces(traces, &locs).map_err(|e| PipelineError::data("traces", e))?;
    let (trace, dropped) = raw.clean(DEFAULT_MISSING_THRESHOLD).map_err(|e| PipelineError::data("cleaning", e))?;
    let kept: Vec<Location> = locs.into_iter().filter(|l| trace.location_ids().contains(&l.id)).collect();
    let model = strategy.build(kept).map_err(|e| PipelineError::data("model", e))?;
    Ok((model, trace, dropped))
}

/// Generate a food court and write `locations.csv` and `traces.csv`.
pub fn write_food_court(config: &FoodCourtConfig, seed: u64, out: &Path) -> Result<(), PipelineError> {
    let court = generate_food_court(config, seed).map_err(|e| PipelineError::Config(e.to_string()))?;
    fs::create_dir_all(out).map_err(|source| PipelineError::Output { path: out.to_path_buf(), source })?;
    let mut buf = Vec::new();
    write_locations(&mut buf, &court.locations).map_err(|e| PipelineError::data("locations", e))?;
    write(out.join("locations.csv"), buf)?;
    let mut buf = Vec::new();
    court.trace.write_csv(&mut buf).map_err(|e| PipelineError::data("traces", e))?;
    write(out.join("traces.csv"), buf)
}

/// Read a generator config; missing fields take their defaults.
pub fn read_food_court_config(path: &Path) -> Result<FoodCourtConfig, PipelineError> {
    let text = fs::read_to_string(path).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))
}
