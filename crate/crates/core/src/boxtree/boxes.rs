use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{DecisionTree, TreeNode};
use crate::pstrel::{Parameter, Polarity, PstrelError, Template};

/// One side of a box interval: `[lo, hi)`, or `[lo, hi]` when `hi_closed`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxSide {
    pub lo: f64,
    pub hi: f64,
    pub hi_closed: bool,
}

impl BoxSide {
    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && (x < self.hi || (self.hi_closed && x == self.hi))
    }
}

/// Axis-aligned region of parameter space reached by one tree leaf.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperBox {
    pub label: usize,
    pub sides: Vec<BoxSide>,
}

impl HyperBox {
    pub fn contains(&self, x: &[f64]) -> bool {
        self.sides.iter().zip(x).all(|(s, &v)| s.contains(v))
    }
}

/// Boxes of every leaf, in left-to-right leaf order. Each side starts at the
/// parameter's bounds and is narrowed by the constraints on the path.
pub fn paths_to_boxes(tree: &DecisionTree, params: &[Parameter]) -> Vec<HyperBox> {
    assert_eq!(tree.features, params.len(), "tree and template dimensions differ");
    let start: Vec<BoxSide> = params.iter().map(|p| BoxSide { lo: p.lo, hi: p.hi, hi_closed: true }).collect();
    let mut out = Vec::new();
    walk(&tree.root, start, &mut out);
    out
}

fn walk(node: &TreeNode, sides: Vec<BoxSide>, out: &mut Vec<HyperBox>) {
    match node {
        TreeNode::Leaf { label, .. } => {
            debug_assert!(sides.iter().all(|s| s.lo <= s.hi), "empty region on a tree path");
            out.push(HyperBox { label: *label, sides });
        }
        TreeNode::Split { feature, threshold, left, right, .. } => {
            let mut l = sides.clone();
            if *threshold <= l[*feature].hi {
                l[*feature].hi = *threshold;
                l[*feature].hi_closed = false;
            }
            let mut r = sides;
            r[*feature].lo = r[*feature].lo.max(*threshold);
            walk(left, l, out);
            walk(right, r, out);
        }
    }
}

/// `template(values)`, negated or not.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Literal {
    pub negated: bool,
    pub values: Vec<f64>,
}

/// Literals describing a box: the template at the box's most permissive
/// corner, and the negated template at each corner obtained by moving one
/// parameter to the box's restrictive edge. The positive literal is left out
/// when its corner is the template's most permissive corner, and a negated
/// one when the restrictive edge is the template bound.
pub fn box_to_formula(b: &HyperBox, params: &[Parameter]) -> Vec<Literal> {
    let corner: Vec<f64> = b
        .sides
        .iter()
        .zip(params)
        .map(|(s, p)| if p.polarity == Polarity::Positive { s.hi } else { s.lo })
        .collect();
    let mut literals = Vec::new();
    let global: Vec<f64> = params.iter().map(Parameter::permissive).collect();
    if corner != global {
        literals.push(Literal { negated: false, values: corner.clone() });
    }
    for (i, (s, p)) in b.sides.iter().zip(params).enumerate() {
        let (edge, inside) = match p.polarity {
            Polarity::Positive => (s.lo, s.lo > p.lo),
            Polarity::Negative => (s.hi, s.hi < p.hi),
        };
        if inside {
            let mut values = corner.clone();
            values[i] = edge;
            literals.push(Literal { negated: true, values });
        }
    }
    literals
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterFormula {
    pub label: usize,
    pub boxes: Vec<HyperBox>,
    /// Literals per box; the formula is the disjunction of their conjunctions.
    pub literals: Vec<Vec<Literal>>,
    /// Parameter-box form, e.g. `!phi(17.09, 2100) & !phi(50, 1000.98)`.
    pub text: String,
    /// The same formula with the template expanded.
    pub expanded: String,
}

/// Decimal places needed to show a value at resolution `delta`.
fn decimals(delta: f64) -> usize {
    if delta >= 1.0 {
        0
    } else {
        (-delta.log10() - 1e-9).ceil().max(0.0) as usize
    }
}

fn format_value(v: f64, places: usize) -> String {
    let mut s = format!("{v:.places$}");
    if s.contains('.') {
        while s.ends_with('0') {
            s.pop();
        }
        if s.ends_with('.') {
            s.pop();
        }
    }
    if s == "-0" {
        s = "0".into();
    }
    s
}

/// Value as printed, rounded to the parameter's resolution.
fn rounded(v: f64, p: &Parameter) -> f64 {
    format_value(v, decimals(p.delta)).parse().unwrap_or(v)
}

fn join(parts: &[String], op: &str, empty: &str) -> String {
    match parts.len() {
        0 => empty.to_string(),
        1 => parts[0].clone(),
        _ => parts.iter().map(|p| format!("({p})")).collect::<Vec<_>>().join(op),
    }
}

/// Boxes and formulas for every leaf label, ordered by label.
pub fn cluster_formulas(tree: &DecisionTree, template: &Template) -> Result<Vec<ClusterFormula>, PstrelError> {
    let params = template.params();
    let mut grouped: BTreeMap<usize, Vec<HyperBox>> = BTreeMap::new();
    for b in paths_to_boxes(tree, params) {
        grouped.entry(b.label).or_default().push(b);
    }
    let mut out = Vec::new();
    for (label, boxes) in grouped {
        let literals: Vec<Vec<Literal>> = boxes.iter().map(|b| box_to_formula(b, params)).collect();
        let mut texts = Vec::new();
        let mut expanded = Vec::new();
        for lits in &literals {
            let mut t = Vec::new();
            let mut e = Vec::new();
            for lit in lits {
                let shown: Vec<f64> = lit.values.iter().zip(params).map(|(&v, p)| rounded(v, p)).collect();
                let mut s = String::new();
                if lit.negated {
                    s.push('!');
                }
                s.push_str("phi(");
                for (k, (v, p)) in shown.iter().zip(params).enumerate() {
                    if k > 0 {
                        s.push_str(", ");
                    }
                    let _ = write!(s, "{}", format_value(*v, decimals(p.delta)));
                }
                s.push(')');
                t.push(s);
                let body = template.instantiate(&shown)?;
                e.push(if lit.negated { format!("!({body})") } else { body.to_string() });
            }
            texts.push(t.join(" & "));
            expanded.push(join(&e, " & ", "true"));
        }
        let texts: Vec<String> = texts.into_iter().map(|t| if t.is_empty() { "true".into() } else { t }).collect();
        out.push(ClusterFormula {
            label,
            boxes,
            literals,
            text: join(&texts, " | ", "true"),
            expanded: join(&expanded, " | ", "true"),
        });
    }
    Ok(out)
}
