use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Comparison {
    Gt,
    Ge,
    Lt,
    Le,
}

impl Comparison {
    pub fn symbol(self) -> &'static str {
        match self {
            Comparison::Gt => ">",
            Comparison::Ge => ">=",
            Comparison::Lt => "<",
            Comparison::Le => "<=",
        }
    }

    /// `true` for `>` and `>=`.
    pub fn is_lower_bound(self) -> bool {
        matches!(self, Comparison::Gt | Comparison::Ge)
    }
}

/// Closed interval `[lo, hi]`; `hi` may be infinite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interval<V = f64> {
    pub lo: V,
    pub hi: V,
}

impl<V> Interval<V> {
    pub fn new(lo: V, hi: V) -> Self {
        Interval { lo, hi }
    }
}

/// Numeric slot of a formula: a constant or a named parameter hole.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Term {
    Num(f64),
    Hole(String),
}

/// Values that can fill interval bounds and thresholds.
pub trait Scalar: Clone + fmt::Display {
    fn infinity() -> Self;
}

impl Scalar for f64 {
    fn infinity() -> Self {
        f64::INFINITY
    }
}

impl Scalar for Term {
    fn infinity() -> Self {
        Term::Num(f64::INFINITY)
    }
}

impl From<f64> for Term {
    fn from(v: f64) -> Self {
        Term::Num(v)
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Num(v) => write!(f, "{v}"),
            Term::Hole(name) => write!(f, "${name}"),
        }
    }
}

/// STREL abstract syntax. `V` is `f64` for concrete formulas and [`Term`]
/// for parametric templates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Formula<V = f64> {
    True,
    Atom { var: String, cmp: Comparison, threshold: V },
    Not(Box<Formula<V>>),
    And(Box<Formula<V>>, Box<Formula<V>>),
    Or(Box<Formula<V>>, Box<Formula<V>>),
    Until(Interval<V>, Box<Formula<V>>, Box<Formula<V>>),
    Eventually(Interval<V>, Box<Formula<V>>),
    Globally(Interval<V>, Box<Formula<V>>),
    Reach(Interval<V>, Box<Formula<V>>, Box<Formula<V>>),
    Escape(Interval<V>, Box<Formula<V>>),
    Somewhere(Interval<V>, Box<Formula<V>>),
    Everywhere(Interval<V>, Box<Formula<V>>),
    Surround(Interval<V>, Box<Formula<V>>, Box<Formula<V>>),
}

impl<V> Formula<V> {
    pub fn atom(var: impl Into<String>, cmp: Comparison, threshold: V) -> Self {
        Formula::Atom { var: var.into(), cmp, threshold }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Self) -> Self {
        Formula::Not(Box::new(f))
    }

    pub fn and(a: Self, b: Self) -> Self {
        Formula::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Self, b: Self) -> Self {
        Formula::Or(Box::new(a), Box::new(b))
    }

    pub fn until(i: Interval<V>, a: Self, b: Self) -> Self {
        Formula::Until(i, Box::new(a), Box::new(b))
    }

    pub fn eventually(i: Interval<V>, f: Self) -> Self {
        Formula::Eventually(i, Box::new(f))
    }

    pub fn globally(i: Interval<V>, f: Self) -> Self {
        Formula::Globally(i, Box::new(f))
    }

    pub fn reach(i: Interval<V>, a: Self, b: Self) -> Self {
        Formula::Reach(i, Box::new(a), Box::new(b))
    }

    pub fn escape(i: Interval<V>, f: Self) -> Self {
        Formula::Escape(i, Box::new(f))
    }

    pub fn somewhere(i: Interval<V>, f: Self) -> Self {
        Formula::Somewhere(i, Box::new(f))
    }

    pub fn everywhere(i: Interval<V>, f: Self) -> Self {
        Formula::Everywhere(i, Box::new(f))
    }

    pub fn surround(i: Interval<V>, a: Self, b: Self) -> Self {
        Formula::Surround(i, Box::new(a), Box::new(b))
    }

    /// Number of AST nodes.
    pub fn size(&self) -> usize {
        1 + self.children().iter().map(|c| c.size()).sum::<usize>()
    }

    pub fn depth(&self) -> usize {
        1 + self.children().iter().map(|c| c.depth()).max().unwrap_or(0)
    }

    pub fn children(&self) -> Vec<&Formula<V>> {
        match self {
            Formula::True | Formula::Atom { .. } => vec![],
            Formula::Not(f)
            | Formula::Eventually(_, f)
            | Formula::Globally(_, f)
            | Formula::Escape(_, f)
            | Formula::Somewhere(_, f)
            | Formula::Everywhere(_, f) => vec![f],
            Formula::And(a, b)
            | Formula::Or(a, b)
            | Formula::Until(_, a, b)
            | Formula::Reach(_, a, b)
            | Formula::Surround(_, a, b) => vec![a, b],
        }
    }

    /// Variables referenced by atoms, in first-occurrence order.
    pub fn variables(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.visit_atoms(&mut |var| {
            if !out.contains(&var) {
                out.push(var);
            }
        });
        out
    }

    fn visit_atoms<'a>(&'a self, f: &mut impl FnMut(&'a str)) {
        if let Formula::Atom { var, .. } = self {
            f(var);
        }
        for c in self.children() {
            c.visit_atoms(f);
        }
    }

    /// Rebuild the tree with every numeric slot mapped through `f`.
    pub fn try_map<W, E>(&self, f: &mut impl FnMut(&V) -> Result<W, E>) -> Result<Formula<W>, E> {
        let iv = |i: &Interval<V>, f: &mut dyn FnMut(&V) -> Result<W, E>| -> Result<Interval<W>, E> {
            Ok(Interval { lo: f(&i.lo)?, hi: f(&i.hi)? })
        };
        Ok(match self {
            Formula::True => Formula::True,
            Formula::Atom { var, cmp, threshold } => {
                Formula::Atom { var: var.clone(), cmp: *cmp, threshold: f(threshold)? }
            }
            Formula::Not(a) => Formula::not(a.try_map(f)?),
            Formula::And(a, b) => Formula::and(a.try_map(f)?, b.try_map(f)?),
            Formula::Or(a, b) => Formula::or(a.try_map(f)?, b.try_map(f)?),
            Formula::Until(i, a, b) => Formula::until(iv(i, f)?, a.try_map(f)?, b.try_map(f)?),
            Formula::Eventually(i, a) => Formula::eventually(iv(i, f)?, a.try_map(f)?),
            Formula::Globally(i, a) => Formula::globally(iv(i, f)?, a.try_map(f)?),
            Formula::Reach(i, a, b) => Formula::reach(iv(i, f)?, a.try_map(f)?, b.try_map(f)?),
            Formula::Escape(i, a) => Formula::escape(iv(i, f)?, a.try_map(f)?),
            Formula::Somewhere(i, a) => Formula::somewhere(iv(i, f)?, a.try_map(f)?),
            Formula::Everywhere(i, a) => Formula::everywhere(iv(i, f)?, a.try_map(f)?),
            Formula::Surround(i, a, b) => Formula::surround(iv(i, f)?, a.try_map(f)?, b.try_map(f)?),
        })
    }
}

impl<V: Scalar> Formula<V> {
    /// Rewrite into the core fragment: `true`, atoms, `!`, `&`, `U`, `R`, `E`.
    pub fn desugar(&self) -> Formula<V> {
        match self {
            Formula::True | Formula::Atom { .. } => self.clone(),
            Formula::Not(a) => Formula::not(a.desugar()),
            Formula::And(a, b) => Formula::and(a.desugar(), b.desugar()),
            Formula::Or(a, b) => {
                Formula::not(Formula::and(Formula::not(a.desugar()), Formula::not(b.desugar())))
            }
            Formula::Until(i, a, b) => Formula::until(i.clone(), a.desugar(), b.desugar()),
            Formula::Eventually(i, a) => Formula::until(i.clone(), Formula::True, a.desugar()),
            Formula::Globally(i, a) => {
                Formula::not(Formula::until(i.clone(), Formula::True, Formula::not(a.desugar())))
            }
            Formula::Reach(i, a, b) => Formula::reach(i.clone(), a.desugar(), b.desugar()),
            Formula::Escape(i, a) => Formula::escape(i.clone(), a.desugar()),
            Formula::Somewhere(i, a) => Formula::reach(i.clone(), Formula::True, a.desugar()),
            Formula::Everywhere(i, a) => {
                Formula::not(Formula::reach(i.clone(), Formula::True, Formula::not(a.desugar())))
            }
            Formula::Surround(..) => self.expand_surround().desugar(),
        }
    }

    /// `a surround[d1,d2] b` as `a & !(a R[d1,d2] !(a | b)) & !(E[d2,inf] a)`.
    /// Other nodes are returned unchanged.
    pub fn expand_surround(&self) -> Formula<V> {
        match self {
            Formula::Surround(i, a, b) => {
                let a = (**a).clone();
                let b = (**b).clone();
                let not_reach = Formula::not(Formula::reach(
                    i.clone(),
                    a.clone(),
                    Formula::not(Formula::or(a.clone(), b)),
                ));
                let not_escape = Formula::not(Formula::escape(Interval::new(i.hi.clone(), V::infinity()), a.clone()));
                Formula::and(Formula::and(a, not_reach), not_escape)
            }
            other => other.clone(),
        }
    }
}

impl Formula<Term> {
    /// Parameter names in first-occurrence order, with repeats.
    pub fn holes(&self) -> Vec<String> {
        let mut out = Vec::new();
        let _ = self.try_map(&mut |t: &Term| -> Result<(), ()> {
            if let Term::Hole(name) = t {
                out.push(name.clone());
            }
            Ok(())
        });
        out
    }
}

impl<V: fmt::Display> fmt::Display for Interval<V> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{},{}]", self.lo, self.hi)
    }
}

impl<V: fmt::Display> fmt::Display for Formula<V> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::True => write!(f, "true"),
            Formula::Atom { var, cmp, threshold } => write!(f, "({var} {} {threshold})", cmp.symbol()),
            Formula::Not(a) => write!(f, "!{a}"),
            Formula::And(a, b) => write!(f, "({a} & {b})"),
            Formula::Or(a, b) => write!(f, "({a} | {b})"),
            Formula::Until(i, a, b) => write!(f, "({a} U{i} {b})"),
            Formula::Eventually(i, a) => write!(f, "F{i} {a}"),
            Formula::Globally(i, a) => write!(f, "G{i} {a}"),
            Formula::Reach(i, a, b) => write!(f, "({a} R{i} {b})"),
            Formula::Escape(i, a) => write!(f, "E{i} {a}"),
            Formula::Somewhere(i, a) => write!(f, "somewhere{i} {a}"),
            Formula::Everywhere(i, a) => write!(f, "everywhere{i} {a}"),
            Formula::Surround(i, a, b) => write!(f, "surround{i}({a}, {b})"),
        }
    }
}
