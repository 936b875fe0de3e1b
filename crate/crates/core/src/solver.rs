//! Evaluation of pp and pp* formulas, character images, kernels and coset
//! coverage.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::Zero;

use crate::error::{Error, Result};
use crate::formula::{PpFormula, PpStarFormula, Symbol, Var, UNIT};
use crate::lattice::{index_of, solve, AffineLattice, IndexValue, IntMatrix, IntVec, Lattice};
use crate::structure::Structure;
use crate::torus::{closure_of, member, TorusCoset, TorusPoint};

/// Values for formula parameters; missing names fall back to the structure.
pub type Params = BTreeMap<String, IntVec>;

/// A definable subset of `A^arity`, kept as a translate of a lattice in
/// `Z^{arity * N}` that contains `relations^{⊕arity}`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct DefinableCoset {
    arity: usize,
    block: usize,
    inner: Option<AffineLattice>,
}

impl DefinableCoset {
    pub fn empty(arity: usize, block: usize) -> Self {
        DefinableCoset {
            arity,
            block,
            inner: None,
        }
    }

    pub fn from_affine(arity: usize, block: usize, coset: AffineLattice) -> Result<Self> {
        if coset.dim() != arity * block {
            return Err(Error::dims(arity * block, coset.dim()));
        }
        Ok(DefinableCoset {
            arity,
            block,
            inner: Some(coset),
        })
    }

    /// The subgroup `group` itself.
    pub fn subgroup(arity: usize, block: usize, group: Lattice) -> Result<Self> {
        let rep = vec![BigInt::zero(); group.dim()];
        DefinableCoset::from_affine(arity, block, AffineLattice::new(rep, group)?)
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    /// Rank `N` of the ambient `Z^N`.
    pub fn block(&self) -> usize {
        self.block
    }

    pub fn is_empty(&self) -> bool {
        self.inner.is_none()
    }

    pub fn coset(&self) -> Option<&AffineLattice> {
        self.inner.as_ref()
    }

    pub fn rep(&self) -> Option<&[BigInt]> {
        self.inner.as_ref().map(|c| c.rep())
    }

    pub fn group(&self) -> Option<&Lattice> {
        self.inner.as_ref().map(|c| c.lattice())
    }

    /// Membership of a flattened tuple in `Z^{arity * N}`.
    pub fn contains(&self, v: &[BigInt]) -> bool {
        self.inner.as_ref().is_some_and(|c| c.contains(v))
    }

    pub fn contains_tuple(&self, tuple: &[IntVec]) -> bool {
        tuple.len() == self.arity && self.contains(&flatten(tuple))
    }

    pub fn intersect(&self, other: &DefinableCoset) -> Result<DefinableCoset> {
        self.check_compatible(other)?;
        let inner = match (&self.inner, &other.inner) {
            (Some(a), Some(b)) => a.intersect(b)?,
            _ => None,
        };
        Ok(DefinableCoset { inner, ..*self })
    }

    fn check_compatible(&self, other: &DefinableCoset) -> Result<()> {
        if self.block != other.block {
            return Err(Error::Signature(format!(
                "cosets live over different groups (rank {} vs {})",
                self.block, other.block
            )));
        }
        if self.arity != other.arity {
            return Err(Error::Signature(format!(
                "arity mismatch: {} vs {}",
                self.arity, other.arity
            )));
        }
        Ok(())
    }
}

impl fmt::Display for DefinableCoset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.inner {
            None => write!(f, "EMPTY"),
            Some(c) => {
                let rep: Vec<String> = c.rep().iter().map(|x| x.to_string()).collect();
                write!(f, "({}) + {}", rep.join(","), c.lattice())
            }
        }
    }
}

pub fn flatten(tuple: &[IntVec]) -> IntVec {
    tuple.iter().flatten().cloned().collect()
}

/// Linear constraints `map_free * x + map_bound * y + offset ∈ target`.
struct System {
    map_free: IntMatrix,
    map_bound: IntMatrix,
    target: Lattice,
    offset: IntVec,
}

fn param_value<'a>(s: &'a Structure, args: &'a Params, name: &str) -> Result<&'a IntVec> {
    args.get(name)
        .or_else(|| s.parameters().get(name))
        .ok_or_else(|| Error::Signature(format!("no value for parameter '{name}'")))
}

fn compile(s: &Structure, phi: &PpFormula, args: &Params) -> Result<System> {
    let n = s.rank();
    let free = phi.free_arity();
    let bound = phi.bound_arity();
    let mut targets = Vec::new();
    let mut rows = 0;
    for atom in phi.atoms() {
        let (arity, lattice) = s
            .predicate(&atom.pred)
            .ok_or_else(|| Error::Signature(format!("unknown predicate '{}'", atom.pred)))?;
        if arity != atom.args.len() {
            return Err(Error::Signature(format!(
                "'{}' has arity {arity}, used with {} arguments",
                atom.pred,
                atom.args.len()
            )));
        }
        targets.push(lattice);
        rows += arity * n;
    }
    for (name, v) in args {
        if v.len() != n {
            return Err(Error::Signature(format!(
                "parameter '{name}' has length {}, expected {n}",
                v.len()
            )));
        }
    }
    let mut map_free = IntMatrix::zeros(rows, free * n);
    let mut map_bound = IntMatrix::zeros(rows, bound * n);
    let mut offset = vec![BigInt::zero(); rows];
    let mut base = 0;
    for atom in phi.atoms() {
        for term in &atom.args {
            if term.constant() != 0 {
                let one = param_value(s, args, UNIT)?;
                for r in 0..n {
                    offset[base + r] += BigInt::from(term.constant()) * &one[r];
                }
            }
            for (sym, &c) in term.coeffs() {
                let c = BigInt::from(c);
                match sym {
                    Symbol::Var(Var::Free(i)) => {
                        if *i >= free {
                            return Err(Error::Signature(format!("free variable index {i} out of range")));
                        }
                        for r in 0..n {
                            map_free[(base + r, i * n + r)] += &c;
                        }
                    }
                    Symbol::Var(Var::Bound(j)) => {
                        if *j >= bound {
                            return Err(Error::Signature(format!("bound variable index {j} out of range")));
                        }
                        for r in 0..n {
                            map_bound[(base + r, j * n + r)] += &c;
                        }
                    }
                    Symbol::Param(name) => {
                        let v = param_value(s, args, name)?;
                        for r in 0..n {
                            offset[base + r] += &c * &v[r];
                        }
                    }
                }
            }
            base += n;
        }
    }
    let target = Lattice::direct_sum(&targets);
    Ok(System {
        map_free,
        map_bound,
        target,
        offset,
    })
}

fn hconcat(a: &IntMatrix, b: &IntMatrix) -> IntMatrix {
    let rows = (0..a.rows())
        .map(|i| a.row(i).iter().chain(b.row(i)).cloned().collect())
        .collect();
    IntMatrix::from_rows(a.cols() + b.cols(), rows).expect("row lengths agree")
}

fn neg(v: &[BigInt]) -> IntVec {
    v.iter().map(|x| -x).collect()
}

/// Solution set of `phi` in `A^m`, `m` the number of free variables.
pub fn eval_pp(s: &Structure, phi: &PpFormula, args: &Params) -> Result<DefinableCoset> {
    let n = s.rank();
    let m = phi.free_arity();
    let sys = compile(s, phi, args)?;
    let map = hconcat(&sys.map_free, &sys.map_bound);
    match solve(&map, &sys.target, &neg(&sys.offset))? {
        None => Ok(DefinableCoset::empty(m, n)),
        Some(sol) => DefinableCoset::from_affine(m, n, sol.project(0..m * n)),
    }
}

fn check_tuple(s: &Structure, tuple: &[IntVec], arity: usize) -> Result<()> {
    if tuple.len() != arity {
        return Err(Error::dims(arity, tuple.len()));
    }
    tuple.iter().try_for_each(|v| s.check_element(v))
}

/// Witnesses `{y : phi(a, y)}` as a definable subset of `A^k`.
pub fn witnesses(s: &Structure, phi: &PpFormula, tuple: &[IntVec], args: &Params) -> Result<DefinableCoset> {
    let n = s.rank();
    let k = phi.bound_arity();
    check_tuple(s, tuple, phi.free_arity())?;
    let sys = compile(s, phi, args)?;
    let moved = sys.map_free.apply(&flatten(tuple))?;
    let shift: IntVec = moved.iter().zip(&sys.offset).map(|(a, b)| -(a + b)).collect();
    match solve(&sys.map_bound, &sys.target, &shift)? {
        None => Ok(DefinableCoset::empty(k, n)),
        Some(sol) => DefinableCoset::from_affine(k, n, sol),
    }
}

fn select_blocks(v: &[BigInt], n: usize, blocks: &[usize]) -> IntVec {
    blocks.iter().flat_map(|&b| v[b * n..(b + 1) * n].iter().cloned()).collect()
}

/// Closure of `f̄` applied to the blocks `blocks` of `c`.
pub fn torus_image_on(s: &Structure, c: &DefinableCoset, blocks: &[usize]) -> Result<TorusCoset> {
    let n = s.rank();
    let dim = blocks.len() * s.torus_dim();
    if c.block() != n {
        return Err(Error::dims(n, c.block()));
    }
    let Some(coset) = c.coset() else {
        return Ok(TorusCoset::empty(dim));
    };
    if n == 0 {
        return Ok(TorusCoset::point(TorusPoint::zero(dim)));
    }
    let gens: Vec<TorusPoint> = coset
        .lattice()
        .basis()
        .iter()
        .map(|g| s.f_blocks(&select_blocks(g, n, blocks)))
        .filter(|p| !p.is_zero())
        .collect();
    let group = closure_of(&gens, dim)?;
    let rep = s.f_blocks(&select_blocks(coset.rep(), n, blocks));
    TorusCoset::new(rep, group)
}

/// Closure of `f̄(c)` in `T^{m d}`.
pub fn torus_image(s: &Structure, c: &DefinableCoset) -> Result<TorusCoset> {
    let all: Vec<usize> = (0..c.arity()).collect();
    torus_image_on(s, c, &all)
}

pub fn satisfies_ppstar(s: &Structure, psi: &PpStarFormula, tuple: &[IntVec], args: &Params) -> Result<bool> {
    let core = psi.core();
    check_tuple(s, tuple, core.free_arity())?;
    let mut bound_blocks = Vec::new();
    let mut bound_targets = Vec::new();
    for (var, point) in psi.f_constraints() {
        if point.dim() != s.torus_dim() {
            return Err(Error::dims(s.torus_dim(), point.dim()));
        }
        match *var {
            Var::Free(i) => {
                let v = tuple.get(i).ok_or_else(|| Error::dims(core.free_arity(), i + 1))?;
                if &s.f(v) != point {
                    return Ok(false);
                }
            }
            Var::Bound(j) => {
                bound_blocks.push(j);
                bound_targets.push(point.clone());
            }
        }
    }
    let w = witnesses(s, core, tuple, args)?;
    if w.is_empty() {
        return Ok(false);
    }
    if bound_blocks.is_empty() {
        return Ok(true);
    }
    let image = torus_image_on(s, &w, &bound_blocks)?;
    member(&TorusPoint::concat(&bound_targets), &image)
}

/// Decides `x ⊆ ⋃ xs`.
pub fn cover_decide(x: &DefinableCoset, xs: &[DefinableCoset]) -> Result<bool> {
    for xi in xs {
        x.check_compatible(xi)?;
    }
    let Some(x0) = x.coset() else {
        return Err(Error::Precondition("the covered coset is empty".into()));
    };
    let h = x0.lattice();
    let mut survivors: Vec<&AffineLattice> = Vec::new();
    let mut k0 = h.clone();
    for c in xs.iter().filter_map(|c| c.coset()) {
        let meet = h.intersect(c.lattice())?;
        if index_of(&meet, h)?.is_finite() {
            k0 = k0.intersect(c.lattice())?;
            survivors.push(c);
        }
    }
    let count = |l: &Lattice| -> Result<BigInt> {
        match index_of(&k0, l)? {
            IndexValue::Finite(v) => Ok(v),
            IndexValue::Infinite => unreachable!("survivors have finite index"),
        }
    };
    let mut total = count(h)?;
    let mut stack: Vec<(usize, AffineLattice, bool)> = vec![(0, x0.clone(), false)];
    while let Some((start, current, even)) = stack.pop() {
        for (i, xi) in survivors.iter().enumerate().skip(start) {
            if let Some(next) = current.intersect(xi)? {
                let c = count(next.lattice())?;
                if even {
                    total += c;
                } else {
                    total -= c;
                }
                stack.push((i + 1, next, !even));
            }
        }
    }
    Ok(total.is_zero())
}

/// `Ker f` when `c` is `None`, else the fiber `f⁻¹(c)`.
pub fn kernel_and_fiber(s: &Structure, c: Option<&TorusPoint>) -> Result<DefinableCoset> {
    let n = s.rank();
    let d = s.torus_dim();
    if let Some(p) = c {
        if p.dim() != d {
            return Err(Error::dims(d, p.dim()));
        }
    }
    let mut q = s.character_denominator();
    if let Some(p) = c {
        q = q.lcm(&p.denominator());
    }
    let qr = BigRational::from_integer(q.clone());
    let rows = s
        .character()
        .iter()
        .map(|r| r.iter().map(|x| (x * &qr).to_integer()).collect())
        .collect();
    let map = IntMatrix::from_rows(n, rows)?;
    let shift: IntVec = match c {
        Some(p) => p.coords().iter().map(|x| (x * &qr).to_integer()).collect(),
        None => vec![BigInt::zero(); d],
    };
    match solve(&map, &Lattice::scalar(d, &q), &shift)? {
        None => Ok(DefinableCoset::empty(1, n)),
        Some(sol) => DefinableCoset::from_affine(1, n, sol),
    }
}
