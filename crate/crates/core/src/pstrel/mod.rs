//! Parametric templates: formulas with `$name` holes, their polarity and the
//! per-location projection into parameter space.

mod project;

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::spatial::SpatialModel;
use crate::strel::{parse_template, Formula, MonitorError, ParseError, Term};
use crate::trace::SpatioTemporalTrace;

pub use project::{project_all, project_lex, ProjectionRow, ProjectionSet};

#[derive(Debug, Error)]
pub enum PstrelError {
    #[error("template formula: {0}")]
    Parse(#[from] ParseError),
    #[error("parameter `{0}` appears more than once")]
    RepeatedHole(String),
    #[error("parameter `{0}` has no monotone polarity")]
    NonMonotone(String),
    #[error("parameter `{name}` declared {declared} but the formula makes it {inferred}")]
    PolarityMismatch { name: String, declared: Polarity, inferred: Polarity },
    #[error("parameter `{name}` declared as {declared:?} but used as {used:?}")]
    KindMismatch { name: String, declared: ParamKind, used: ParamKind },
    #[error("parameter `{0}` is not used by the formula")]
    UnusedParameter(String),
    #[error("formula hole `{0}` has no parameter declaration")]
    UndeclaredHole(String),
    #[error("priority order must list every parameter exactly once")]
    BadOrder,
    #[error("parameter `{name}`: {reason}")]
    BadBounds { name: String, reason: String },
    #[error("variable `{0}` not present in the trace")]
    UnknownVariable(String),
    #[error("valuation has {got} values, template has {expected} parameters")]
    ValuationLength { expected: usize, got: usize },
    #[error("location `{0}` does not satisfy the most permissive instantiation")]
    Unprojectable(String),
    #[error(transparent)]
    Monitor(#[from] MonitorError),
    #[error("reading template: {0}")]
    Io(#[from] std::io::Error),
    #[error("template json: {0}")]
    Json(#[from] serde_json::Error),
}

/// Direction in which a parameter makes the formula easier to satisfy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Polarity {
    /// Larger values are more permissive.
    #[serde(rename = "+")]
    Positive,
    /// Smaller values are more permissive.
    #[serde(rename = "-")]
    Negative,
}

impl Polarity {
    fn flip(self) -> Polarity {
        match self {
            Polarity::Positive => Polarity::Negative,
            Polarity::Negative => Polarity::Positive,
        }
    }

    fn under(self, context: Polarity) -> Polarity {
        if context == Polarity::Positive {
            self
        } else {
            self.flip()
        }
    }
}

impl fmt::Display for Polarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Polarity::Positive => "+",
            Polarity::Negative => "-",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamKind {
    Magnitude,
    Timing,
    Spatial,
}

/// How a hole is used in the formula.
#[derive(Debug, Clone, PartialEq)]
pub struct HoleUse {
    pub name: String,
    pub kind: ParamKind,
    pub polarity: Polarity,
    /// Variable compared against, for magnitude holes.
    pub variable: Option<String>,
}

/// Polarity and kind of every hole, in first-occurrence order.
pub fn infer_polarity(skeleton: &Formula<Term>) -> Result<Vec<HoleUse>, PstrelError> {
    let mut uses = Vec::new();
    collect(skeleton, Polarity::Positive, &mut uses);
    let mut out: Vec<HoleUse> = Vec::new();
    for u in uses {
        match out.iter().find(|o| o.name == u.name) {
            Some(o) if o.polarity != u.polarity || o.kind != u.kind => return Err(PstrelError::NonMonotone(u.name)),
            Some(_) => {}
            None => out.push(u),
        }
    }
    Ok(out)
}

fn collect(f: &Formula<Term>, ctx: Polarity, out: &mut Vec<HoleUse>) {
    use Polarity::{Negative as Neg, Positive as Pos};
    let mut hole = |t: &Term, kind, pol: Polarity, variable: Option<&String>| {
        if let Term::Hole(name) = t {
            out.push(HoleUse { name: name.clone(), kind, polarity: pol.under(ctx), variable: variable.cloned() });
        }
    };
    match f {
        Formula::True => {}
        Formula::Atom { var, cmp, threshold } => {
            let pol = if cmp.is_lower_bound() { Neg } else { Pos };
            hole(threshold, ParamKind::Magnitude, pol, Some(var));
        }
        Formula::Not(a) => collect(a, ctx.flip(), out),
        Formula::And(a, b) | Formula::Or(a, b) => {
            collect(a, ctx, out);
            collect(b, ctx, out);
        }
        Formula::Until(i, a, b) => {
            hole(&i.lo, ParamKind::Timing, Neg, None);
            hole(&i.hi, ParamKind::Timing, Pos, None);
            collect(a, ctx, out);
            collect(b, ctx, out);
        }
        Formula::Eventually(i, a) => {
            hole(&i.lo, ParamKind::Timing, Neg, None);
            hole(&i.hi, ParamKind::Timing, Pos, None);
            collect(a, ctx, out);
        }
        Formula::Globally(i, a) => {
            hole(&i.lo, ParamKind::Timing, Pos, None);
            hole(&i.hi, ParamKind::Timing, Neg, None);
            collect(a, ctx, out);
        }
        Formula::Reach(i, a, b) => {
            hole(&i.lo, ParamKind::Spatial, Neg, None);
            hole(&i.hi, ParamKind::Spatial, Pos, None);
            collect(a, ctx, out);
            collect(b, ctx, out);
        }
        Formula::Escape(i, a) | Formula::Somewhere(i, a) => {
            hole(&i.lo, ParamKind::Spatial, Neg, None);
            hole(&i.hi, ParamKind::Spatial, Pos, None);
            collect(a, ctx, out);
        }
        Formula::Everywhere(i, a) => {
            hole(&i.lo, ParamKind::Spatial, Pos, None);
            hole(&i.hi, ParamKind::Spatial, Neg, None);
            collect(a, ctx, out);
        }
        Formula::Surround(..) => collect(&f.expand_surround(), ctx, out),
    }
}

/// Parameter declaration as written in a template file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamSpec {
    pub name: String,
    #[serde(default)]
    pub kind: Option<ParamKind>,
    #[serde(default)]
    pub bounds: Option<[f64; 2]>,
    #[serde(default)]
    pub delta: Option<f64>,
    #[serde(default)]
    pub polarity: Option<Polarity>,
}

impl ParamSpec {
    pub fn named(name: impl Into<String>) -> Self {
        ParamSpec { name: name.into(), kind: None, bounds: None, delta: None, polarity: None }
    }

    pub fn with_bounds(mut self, lo: f64, hi: f64) -> Self {
        self.bounds = Some([lo, hi]);
        self
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = Some(delta);
        self
    }
}

/// Template file contents; bounds and resolutions may be left to defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TemplateSpec {
    pub formula: String,
    #[serde(default)]
    pub params: Vec<ParamSpec>,
    /// Priority order; defaults to the order of `params`.
    #[serde(default)]
    pub order: Option<Vec<String>>,
}

impl TemplateSpec {
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, PstrelError> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn new(formula: impl Into<String>, params: Vec<ParamSpec>) -> Self {
        TemplateSpec { formula: formula.into(), params, order: None }
    }

    /// Check the skeleton and fill in defaults from the data: magnitude
    /// bounds span the variable's observed range, timing bounds the trace
    /// horizon and spatial bounds the model diameter.
    pub fn resolve(&self, model: &SpatialModel, trace: &SpatioTemporalTrace) -> Result<Template, PstrelError> {
        let skeleton = parse_template(&self.formula)?;
        let holes = skeleton.holes();
        for (i, h) in holes.iter().enumerate() {
            if holes[..i].contains(h) {
                return Err(PstrelError::RepeatedHole(h.clone()));
            }
        }
        if let Some(var) = skeleton.variables().into_iter().find(|v| trace.variable_index(v).is_none()) {
            return Err(PstrelError::UnknownVariable(var.to_string()));
        }
        let uses = infer_polarity(&skeleton)?;
        // declarations default to every hole in formula order
        let specs: Vec<ParamSpec> = if self.params.is_empty() {
            uses.iter().map(|u| ParamSpec::named(&u.name)).collect()
        } else {
            self.params.clone()
        };
        for u in &uses {
            if !specs.iter().any(|s| s.name == u.name) {
                return Err(PstrelError::UndeclaredHole(u.name.clone()));
            }
        }
        let order: Vec<String> = match &self.order {
            Some(order) => order.clone(),
            None => specs.iter().map(|s| s.name.clone()).collect(),
        };
        let mut sorted = order.clone();
        sorted.sort();
        let mut names: Vec<String> = specs.iter().map(|s| s.name.clone()).collect();
        names.sort();
        if sorted != names || sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(PstrelError::BadOrder);
        }

        let mut params = Vec::new();
        for name in &order {
            let spec = specs.iter().find(|s| &s.name == name).expect("order checked");
            let usage = uses
                .iter()
                .find(|u| &u.name == name)
                .ok_or_else(|| PstrelError::UnusedParameter(name.clone()))?;
            if let Some(declared) = spec.polarity {
                if declared != usage.polarity {
                    return Err(PstrelError::PolarityMismatch {
                        name: name.clone(),
                        declared,
                        inferred: usage.polarity,
                    });
                }
            }
            if let Some(declared) = spec.kind {
                if declared != usage.kind {
                    return Err(PstrelError::KindMismatch { name: name.clone(), declared, used: usage.kind });
                }
            }
            let (lo, hi) = match spec.bounds {
                Some([lo, hi]) => (lo, hi),
                None => default_bounds(usage, model, trace)?,
            };
            let bad = |reason: String| PstrelError::BadBounds { name: name.clone(), reason };
            if !(lo.is_finite() && hi.is_finite()) || lo >= hi {
                return Err(bad(format!("bounds [{lo}, {hi}] must be finite with lower < upper")));
            }
            let delta = spec.delta.unwrap_or((hi - lo) / 256.0);
            if !(delta > 0.0 && delta < hi - lo) {
                return Err(bad(format!("resolution {delta} must lie in (0, {})", hi - lo)));
            }
            params.push(Parameter { name: name.clone(), kind: usage.kind, polarity: usage.polarity, lo, hi, delta });
        }
        Ok(Template { source: self.formula.clone(), skeleton, params })
    }
}

fn default_bounds(
    usage: &HoleUse,
    model: &SpatialModel,
    trace: &SpatioTemporalTrace,
) -> Result<(f64, f64), PstrelError> {
    let (lo, hi) = match usage.kind {
        ParamKind::Magnitude => {
            let var = usage.variable.as_deref().unwrap_or_default();
            let index = trace.variable_index(var).ok_or_else(|| PstrelError::UnknownVariable(var.to_string()))?;
            trace.value_range(index).unwrap_or((0.0, 0.0))
        }
        ParamKind::Timing => (0.0, trace.horizon()),
        ParamKind::Spatial => (0.0, model.diameter()),
    };
    // a constant signal still needs a non-empty search range
    Ok(if hi > lo { (lo, hi) } else { (lo, lo + 1.0) })
}

/// A resolved template parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Parameter {
    pub name: String,
    pub kind: ParamKind,
    pub polarity: Polarity,
    pub lo: f64,
    pub hi: f64,
    pub delta: f64,
}

impl Parameter {
    /// The bound that makes the formula easiest to satisfy.
    pub fn permissive(&self) -> f64 {
        match self.polarity {
            Polarity::Positive => self.hi,
            Polarity::Negative => self.lo,
        }
    }

    /// The bound that makes the formula hardest to satisfy.
    pub fn restrictive(&self) -> f64 {
        match self.polarity {
            Polarity::Positive => self.lo,
            Polarity::Negative => self.hi,
        }
    }
}

/// A monotone template with resolved parameters in priority order.
#[derive(Debug, Clone, PartialEq)]
pub struct Template {
    source: String,
    skeleton: Formula<Term>,
    params: Vec<Parameter>,
}

impl Template {
    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn skeleton(&self) -> &Formula<Term> {
        &self.skeleton
    }

    /// Parameters in priority order; valuations use the same order.
    pub fn params(&self) -> &[Parameter] {
        &self.params
    }

    pub fn param_names(&self) -> Vec<&str> {
        self.params.iter().map(|p| p.name.as_str()).collect()
    }

    pub fn permissive_corner(&self) -> Vec<f64> {
        self.params.iter().map(Parameter::permissive).collect()
    }

    pub fn instantiate(&self, values: &[f64]) -> Result<Formula, PstrelError> {
        if values.len() != self.params.len() {
            return Err(PstrelError::ValuationLength { expected: self.params.len(), got: values.len() });
        }
        let lookup: HashMap<&str, f64> = self.params.iter().map(|p| p.name.as_str()).zip(values.iter().copied()).collect();
        self.skeleton.try_map(&mut |t: &Term| match t {
            Term::Num(v) => Ok(*v),
            Term::Hole(name) => lookup.get(name.as_str()).copied().ok_or_else(|| PstrelError::UndeclaredHole(name.clone())),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spatial::Location;

    fn polarities(text: &str) -> Vec<(String, Polarity)> {
        infer_polarity(&parse_template(text).unwrap()).unwrap().into_iter().map(|u| (u.name, u.polarity)).collect()
    }

    use Polarity::{Negative as Neg, Positive as Pos};

    fn p(name: &str, pol: Polarity) -> (String, Polarity) {
        (name.to_string(), pol)
    }

    #[test]
    fn polarity_of_common_shapes() {
        assert_eq!(
            polarities("G[0,$tau] somewhere[0,$d] (B > $c)"),
            vec![p("tau", Neg), p("d", Pos), p("c", Neg)]
        );
        assert_eq!(polarities("somewhere[0,$d] F[0,10] (x > $c)"), vec![p("d", Pos), p("c", Neg)]);
        assert_eq!(polarities("!somewhere[0,$d] x > 0"), vec![p("d", Neg)]);
        assert_eq!(polarities("everywhere[$a,$b] x < $c"), vec![p("a", Pos), p("b", Neg), p("c", Pos)]);
        assert_eq!(polarities("(x > 0) U[$a,$b] (y <= $c) | E[$e,inf] z >= 1"), vec![
            p("a", Neg),
            p("b", Pos),
            p("c", Pos),
            p("e", Neg)
        ]);
    }

    #[test]
    fn surround_upper_bound_is_not_monotone() {
        let t = parse_template("surround[$lo,$hi](x > 0, y > 0)").unwrap();
        assert!(matches!(infer_polarity(&t), Err(PstrelError::NonMonotone(n)) if n == "hi"));
        let t = parse_template("surround[$lo,10](x > 0, y > 0)").unwrap();
        assert_eq!(infer_polarity(&t).unwrap()[0].polarity, Pos);
    }

    fn fixture() -> (SpatialModel, SpatioTemporalTrace) {
        let locs = vec![Location::new("a", 0.0, 0.0), Location::new("b", 0.0, 0.01)];
        let model = SpatialModel::full(locs).unwrap();
        let values = vec![vec![vec![1.0], vec![3.0], vec![2.0]], vec![vec![5.0], vec![5.0], vec![4.0]]];
        let trace = SpatioTemporalTrace::new(vec!["x".into()], vec!["a".into(), "b".into()], 0.0, 2.0, values).unwrap();
        (model, trace)
    }

    #[test]
    fn resolve_fills_defaults() {
        let (model, trace) = fixture();
        let t = TemplateSpec::new("somewhere[0,$d] F[0,$tau] x > $c", vec![]).resolve(&model, &trace).unwrap();
        assert_eq!(t.param_names(), vec!["d", "tau", "c"]);
        let [d, tau, c] = [&t.params()[0], &t.params()[1], &t.params()[2]];
        assert_eq!((d.lo, d.hi), (0.0, model.diameter()));
        assert_eq!((tau.lo, tau.hi, tau.kind), (0.0, 4.0, ParamKind::Timing));
        assert_eq!((c.lo, c.hi, c.delta), (1.0, 5.0, 4.0 / 256.0));
        assert_eq!(t.permissive_corner(), vec![model.diameter(), 4.0, 1.0]);
        let f = t.instantiate(&[100.0, 2.0, 3.5]).unwrap();
        assert_eq!(f.to_string(), "somewhere[0,100] F[0,2] (x > 3.5)");
    }

    #[test]
    fn resolve_checks_declarations() {
        let (model, trace) = fixture();
        let spec = |params, order| TemplateSpec { formula: "F[0,$tau] x > $c".into(), params, order };
        let declared = |pol| ParamSpec { polarity: Some(pol), ..ParamSpec::named("c") };
        assert!(matches!(
            spec(vec![ParamSpec::named("tau"), declared(Pos)], None).resolve(&model, &trace),
            Err(PstrelError::PolarityMismatch { .. })
        ));
        assert!(spec(vec![ParamSpec::named("tau"), declared(Neg)], None).resolve(&model, &trace).is_ok());
        assert!(matches!(spec(vec![ParamSpec::named("tau")], None).resolve(&model, &trace), Err(PstrelError::UndeclaredHole(_))));
        let both = vec![ParamSpec::named("tau"), ParamSpec::named("c")];
        assert!(matches!(
            spec(both.clone(), Some(vec!["c".into()])).resolve(&model, &trace),
            Err(PstrelError::BadOrder)
        ));
        let t = spec(both.clone(), Some(vec!["c".into(), "tau".into()])).resolve(&model, &trace).unwrap();
        assert_eq!(t.param_names(), vec!["c", "tau"]);
        let bad = vec![ParamSpec::named("tau").with_bounds(3.0, 1.0), ParamSpec::named("c")];
        assert!(matches!(spec(bad, None).resolve(&model, &trace), Err(PstrelError::BadBounds { .. })));
        let repeated = TemplateSpec::new("x > $c & y < $c", vec![]);
        assert!(matches!(repeated.resolve(&model, &trace), Err(PstrelError::RepeatedHole(_))));
        let unknown = TemplateSpec::new("G[0,$t] (speed > 1)", vec![]);
        assert!(matches!(unknown.resolve(&model, &trace), Err(PstrelError::UnknownVariable(v)) if v == "speed"));
    }

    #[test]
    fn template_json_round_trip() {
        let json = r#"{"formula": "F[0,$tau] x > $c",
            "params": [{"name": "tau", "bounds": [0, 10], "delta": 0.5, "polarity": "+"}, {"name": "c", "kind": "magnitude"}],
            "order": ["c", "tau"]}"#;
        let spec: TemplateSpec = serde_json::from_str(json).unwrap();
        assert_eq!(spec.params[0].polarity, Some(Pos));
        assert_eq!(spec.order.as_deref(), Some(&["c".to_string(), "tau".to_string()][..]));
        let back: TemplateSpec = serde_json::from_str(&serde_json::to_string(&spec).unwrap()).unwrap();
        assert_eq!(back, spec);
    }
}
