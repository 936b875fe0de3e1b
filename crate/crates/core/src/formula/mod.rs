//! pp, pp* and negated-pp formulas over an abelian-structure signature.
//!
//! Concrete syntax:
//!
//! ```text
//! formula := ['!'] ('E' varlist '.')* conj
//! conj    := atom ('&' atom)*
//! atom    := NAME '(' term (',' term)* ')' | 'f' '(' VAR ')' '=' tpoint | term '=' term
//! term    := signed sum of INT['*']VAR, INT['*']PARAM and INT
//! tpoint  := '(' rational (',' rational)* ')' | rational
//! ```
//!
//! `t1 = t2` is sugar for the built-in unary predicate `Eq(t1 - t2)`.

mod parser;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::torus::TorusPoint;

pub use parser::parse;

/// Name of the built-in equality predicate (`Eq(t)` holds iff `t = 0`).
pub const EQ: &str = "Eq";
/// Parameter name that integer constants in terms are multiplied by.
pub const UNIT: &str = "one";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Var {
    Free(usize),
    Bound(usize),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Symbol {
    Var(Var),
    Param(String),
}

/// Integer linear form; zero coefficients are never stored.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Term {
    coeffs: BTreeMap<Symbol, i64>,
    constant: i64,
}

impl Term {
    pub fn zero() -> Self {
        Term::default()
    }

    pub fn var(v: Var) -> Self {
        Term::zero().with(Symbol::Var(v), 1)
    }

    pub fn linear(coeffs: impl IntoIterator<Item = (Var, i64)>) -> Self {
        let mut t = Term::zero();
        for (v, c) in coeffs {
            t = t.with(Symbol::Var(v), c);
        }
        t
    }

    /// Adds `c * sym`; saturates nothing, callers keep coefficients small.
    pub fn with(mut self, sym: Symbol, c: i64) -> Self {
        let e = self.coeffs.entry(sym.clone()).or_insert(0);
        *e += c;
        if *e == 0 {
            self.coeffs.remove(&sym);
        }
        self
    }

    pub fn with_constant(mut self, c: i64) -> Self {
        self.constant += c;
        self
    }

    pub fn coeffs(&self) -> &BTreeMap<Symbol, i64> {
        &self.coeffs
    }

    pub fn constant(&self) -> i64 {
        self.constant
    }

    pub fn coeff(&self, sym: &Symbol) -> i64 {
        self.coeffs.get(sym).copied().unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty() && self.constant == 0
    }

    pub(crate) fn checked_add(&self, other: &Term, sign: i64) -> Option<Term> {
        let mut out = self.clone();
        for (s, &c) in &other.coeffs {
            let e = out.coeffs.entry(s.clone()).or_insert(0);
            *e = e.checked_add(c.checked_mul(sign)?)?;
            if *e == 0 {
                out.coeffs.remove(s);
            }
        }
        out.constant = out.constant.checked_add(other.constant.checked_mul(sign)?)?;
        Some(out)
    }

    fn remap_bound(&self, map: &BTreeMap<usize, usize>) -> Term {
        let coeffs = self
            .coeffs
            .iter()
            .map(|(s, &c)| match s {
                Symbol::Var(Var::Bound(j)) => (Symbol::Var(Var::Bound(map[j])), c),
                other => (other.clone(), c),
            })
            .collect();
        Term {
            coeffs,
            constant: self.constant,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Atom {
    pub pred: String,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn new(pred: impl Into<String>, args: Vec<Term>) -> Self {
        Atom {
            pred: pred.into(),
            args,
        }
    }

    pub fn eq(t: Term) -> Self {
        Atom::new(EQ, vec![t])
    }
}

/// `E ȳ. conj(x̄, ȳ)`, with quantifier blocks kept as written.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PpFormula {
    free: Vec<String>,
    blocks: Vec<Vec<String>>,
    atoms: Vec<Atom>,
}

impl PpFormula {
    pub fn new(free: Vec<String>, bound: Vec<String>, atoms: Vec<Atom>) -> Self {
        let blocks = if bound.is_empty() { Vec::new() } else { vec![bound] };
        PpFormula { free, blocks, atoms }
    }

    pub(crate) fn from_blocks(free: Vec<String>, blocks: Vec<Vec<String>>, atoms: Vec<Atom>) -> Self {
        PpFormula { free, blocks, atoms }
    }

    pub fn free(&self) -> &[String] {
        &self.free
    }

    pub fn free_arity(&self) -> usize {
        self.free.len()
    }

    pub fn bound_arity(&self) -> usize {
        self.blocks.iter().map(Vec::len).sum()
    }

    pub fn blocks(&self) -> &[Vec<String>] {
        &self.blocks
    }

    pub fn bound(&self) -> Vec<String> {
        self.blocks.iter().flatten().cloned().collect()
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    /// Parameter names occurring with nonzero coefficient, sorted.
    pub fn params(&self) -> Vec<String> {
        let set: BTreeSet<String> = self
            .atoms
            .iter()
            .flat_map(|a| a.args.iter())
            .flat_map(|t| t.coeffs.keys())
            .filter_map(|s| match s {
                Symbol::Param(p) => Some(p.clone()),
                Symbol::Var(_) => None,
            })
            .collect();
        set.into_iter().collect()
    }

    pub fn has_constants(&self) -> bool {
        self.atoms.iter().flat_map(|a| a.args.iter()).any(|t| t.constant != 0)
    }

    fn var_name(&self, v: Var) -> String {
        match v {
            Var::Free(i) => self.free[i].clone(),
            Var::Bound(j) => self.blocks.iter().flatten().nth(j).cloned().unwrap_or_default(),
        }
    }

    fn render_term(&self, t: &Term) -> String {
        let mut parts: Vec<String> = t
            .coeffs
            .iter()
            .map(|(s, &c)| {
                let name = match s {
                    Symbol::Var(v) => self.var_name(*v),
                    Symbol::Param(p) => p.clone(),
                };
                if c == 1 {
                    name
                } else {
                    format!("{c}*{name}")
                }
            })
            .collect();
        if t.constant != 0 {
            parts.push(t.constant.to_string());
        }
        if parts.is_empty() {
            "0".to_string()
        } else {
            parts.join(" + ")
        }
    }

    fn render_prefix(&self) -> String {
        self.blocks
            .iter()
            .map(|b| format!("E {}. ", b.join(", ")))
            .collect()
    }

    fn render_atoms(&self) -> Vec<String> {
        self.atoms
            .iter()
            .map(|a| {
                let args: Vec<String> = a.args.iter().map(|t| self.render_term(t)).collect();
                format!("{}({})", a.pred, args.join(", "))
            })
            .collect()
    }

    fn used_bound(&self, extra: impl Iterator<Item = Var>) -> BTreeSet<usize> {
        let mut used: BTreeSet<usize> = self
            .atoms
            .iter()
            .flat_map(|a| a.args.iter())
            .flat_map(|t| t.coeffs.keys())
            .filter_map(|s| match s {
                Symbol::Var(Var::Bound(j)) => Some(*j),
                _ => None,
            })
            .collect();
        used.extend(extra.filter_map(|v| match v {
            Var::Bound(j) => Some(j),
            Var::Free(_) => None,
        }));
        used
    }

    // Single block, dense bound numbering, duplicate atoms dropped.
    fn normalized_with(&self, used: &BTreeSet<usize>) -> (PpFormula, BTreeMap<usize, usize>) {
        let names = self.bound();
        let map: BTreeMap<usize, usize> = used.iter().enumerate().map(|(new, &old)| (old, new)).collect();
        let bound: Vec<String> = used.iter().map(|&j| names[j].clone()).collect();
        let mut atoms: Vec<Atom> = Vec::new();
        for a in &self.atoms {
            let b = Atom::new(a.pred.clone(), a.args.iter().map(|t| t.remap_bound(&map)).collect());
            if !atoms.contains(&b) {
                atoms.push(b);
            }
        }
        (PpFormula::new(self.free.clone(), bound, atoms), map)
    }
}

/// A pp formula with some variables' values under `f` fixed.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PpStarFormula {
    core: PpFormula,
    f_constraints: BTreeMap<Var, TorusPoint>,
}

impl PpStarFormula {
    pub fn new(core: PpFormula, f_constraints: BTreeMap<Var, TorusPoint>) -> Self {
        PpStarFormula { core, f_constraints }
    }

    pub fn core(&self) -> &PpFormula {
        &self.core
    }

    pub fn f_constraints(&self) -> &BTreeMap<Var, TorusPoint> {
        &self.f_constraints
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct NegPpFormula {
    inner: PpFormula,
}

impl NegPpFormula {
    pub fn new(inner: PpFormula) -> Self {
        NegPpFormula { inner }
    }

    pub fn inner(&self) -> &PpFormula {
        &self.inner
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Formula {
    Pp(PpFormula),
    PpStar(PpStarFormula),
    NegPp(NegPpFormula),
}

impl Formula {
    pub fn core(&self) -> &PpFormula {
        match self {
            Formula::Pp(p) => p,
            Formula::PpStar(p) => &p.core,
            Formula::NegPp(n) => &n.inner,
        }
    }

    /// View as a pp* formula (a pure pp formula has no f-constraints).
    pub fn as_ppstar(&self) -> Option<PpStarFormula> {
        match self {
            Formula::Pp(p) => Some(PpStarFormula::new(p.clone(), BTreeMap::new())),
            Formula::PpStar(p) => Some(p.clone()),
            Formula::NegPp(_) => None,
        }
    }
}

impl fmt::Display for PpFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut body = self.render_atoms();
        if body.is_empty() {
            body.push(format!("{EQ}(0)"));
        }
        write!(f, "{}{}", self.render_prefix(), body.join(" & "))
    }
}

impl fmt::Display for PpStarFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut body = self.core.render_atoms();
        for (v, p) in &self.f_constraints {
            body.push(format!("f({}) = {}", self.core.var_name(*v), p));
        }
        if body.is_empty() {
            body.push(format!("{EQ}(0)"));
        }
        write!(f, "{}{}", self.core.render_prefix(), body.join(" & "))
    }
}

impl fmt::Display for NegPpFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "! {}", self.inner)
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::Pp(p) => p.fmt(f),
            Formula::PpStar(p) => p.fmt(f),
            Formula::NegPp(n) => n.fmt(f),
        }
    }
}

/// Canonical text; `parse(render(ast))` yields `ast` again.
pub fn render(ast: &Formula) -> String {
    ast.to_string()
}

/// Per-atom coefficient matrix. Columns: free vars, bound vars, the formula's
/// parameters (sorted by name), then the integer constant.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AtomMatrix {
    pub pred: String,
    pub rows: Vec<Vec<i64>>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Normalized {
    pub formula: Formula,
    pub params: Vec<String>,
    pub matrices: Vec<AtomMatrix>,
}

pub fn normalize(ast: &Formula) -> Normalized {
    let core = ast.core();
    let formula = match ast {
        Formula::Pp(p) => Formula::Pp(p.normalized_with(&p.used_bound(std::iter::empty())).0),
        Formula::NegPp(n) => {
            let inner = &n.inner;
            Formula::NegPp(NegPpFormula::new(inner.normalized_with(&inner.used_bound(std::iter::empty())).0))
        }
        Formula::PpStar(p) => {
            let used = core.used_bound(p.f_constraints.keys().copied());
            let (c, map) = core.normalized_with(&used);
            let fc = p
                .f_constraints
                .iter()
                .map(|(v, t)| {
                    let v = match v {
                        Var::Bound(j) => Var::Bound(map[j]),
                        other => *other,
                    };
                    (v, t.clone())
                })
                .collect();
            Formula::PpStar(PpStarFormula::new(c, fc))
        }
    };
    let core = formula.core();
    let params = core.params();
    let (n, k) = (core.free_arity(), core.bound_arity());
    let matrices = core
        .atoms
        .iter()
        .map(|a| AtomMatrix {
            pred: a.pred.clone(),
            rows: a
                .args
                .iter()
                .map(|t| {
                    let mut row = Vec::with_capacity(n + k + params.len() + 1);
                    row.extend((0..n).map(|i| t.coeff(&Symbol::Var(Var::Free(i)))));
                    row.extend((0..k).map(|j| t.coeff(&Symbol::Var(Var::Bound(j)))));
                    row.extend(params.iter().map(|p| t.coeff(&Symbol::Param(p.clone()))));
                    row.push(t.constant);
                    row
                })
                .collect(),
        })
        .collect();
    Normalized {
        formula,
        params,
        matrices,
    }
}

/// What the parser needs to know about the target structure.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Signature {
    pub predicates: BTreeMap<String, usize>,
    pub params: BTreeSet<String>,
    pub torus_dim: usize,
    /// Fixed free-variable order; when `None`, free variables are sorted
    /// alphabetically.
    pub vars: Option<Vec<String>>,
}

impl Signature {
    pub fn new(
        predicates: impl IntoIterator<Item = (String, usize)>,
        params: impl IntoIterator<Item = String>,
        torus_dim: usize,
    ) -> Self {
        let mut predicates: BTreeMap<String, usize> = predicates.into_iter().collect();
        predicates.insert(EQ.to_string(), 1);
        Signature {
            predicates,
            params: params.into_iter().collect(),
            torus_dim,
            vars: None,
        }
    }

    pub fn with_vars(mut self, vars: Vec<String>) -> Self {
        self.vars = Some(vars);
        self
    }

    pub fn has_unit(&self) -> bool {
        self.params.contains(UNIT)
    }
}
