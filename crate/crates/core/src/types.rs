//! pp*-type fingerprints and the back-and-forth extension step.
//!
//! A fingerprint of `ā` records `f̄(ā)` and, for each basis formula
//! `∃ȳ φ(x̄, ȳ)`, either `⊥` (no witness) or the closed torus coset spanned
//! by `f̄` of the witnesses.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::hash::Hash;
use std::str::FromStr;
use std::sync::OnceLock;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::finite::{Elem, FiniteModel};
use crate::formula::{render, Atom, Formula, PpFormula, Symbol, Term, Var, EQ};
use crate::lattice::{solve, IntMatrix, IntVec, Lattice};
use crate::modlat::ModLattice;
use crate::solver::flatten;
use crate::structure::Structure;
use crate::torus::{closure_of, ClosedTorusSubgroup, TorusCoset, TorusPoint};

/// Enumeration bounds for [`basis_generate`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Caps {
    /// Largest number of existentially bound variables.
    pub bound_vars: usize,
    /// Largest number of atoms in a conjunction.
    pub atoms: usize,
    /// Largest absolute value of a coefficient.
    pub coeff: i64,
}

impl Default for Caps {
    fn default() -> Self {
        Caps {
            bound_vars: 1,
            atoms: 2,
            coeff: 2,
        }
    }
}

impl Caps {
    pub fn new(bound_vars: usize, atoms: usize, coeff: i64) -> Self {
        Caps {
            bound_vars,
            atoms,
            coeff,
        }
    }

    /// Next caps to try after a completeness failure.
    pub fn escalate(&self) -> Caps {
        Caps {
            bound_vars: self.bound_vars + 1,
            atoms: self.atoms,
            coeff: self.coeff,
        }
    }
}

impl fmt::Display for Caps {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{}", self.bound_vars, self.atoms, self.coeff)
    }
}

impl FromStr for Caps {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        let [k, a, c] = parts.as_slice() else {
            return Err(format!("expected \"k,atoms,coeff\", found \"{s}\""));
        };
        let num = |x: &str| x.parse::<i64>().map_err(|_| format!("'{x}' is not an integer"));
        let (k, a, c) = (num(k)?, num(a)?, num(c)?);
        if k < 0 || a < 1 || c < 1 {
            return Err("caps need k >= 0, atoms >= 1 and coeff >= 1".into());
        }
        Ok(Caps::new(k as usize, a as usize, c))
    }
}

/// A basis formula; its solution subgroup of `A^{m+k}` is computed on demand.
#[derive(Clone, Debug)]
pub struct BasisFormula {
    pub formula: PpFormula,
    solutions: OnceLock<Lattice>,
}

impl PartialEq for BasisFormula {
    fn eq(&self, other: &Self) -> bool {
        self.formula == other.formula
    }
}

impl Eq for BasisFormula {}

impl BasisFormula {
    pub fn new(formula: PpFormula) -> Self {
        BasisFormula {
            formula,
            solutions: OnceLock::new(),
        }
    }

    pub fn bound_arity(&self) -> usize {
        self.formula.bound_arity()
    }

    /// Solutions of the quantifier-free body in `Z^{(m+k) N}`, free blocks first.
    pub fn solutions(&self, s: &Structure) -> Result<&Lattice> {
        if let Some(l) = self.solutions.get() {
            return Ok(l);
        }
        let l = body_lattice(s, &self.formula)?;
        Ok(self.solutions.get_or_init(|| l))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FormulaBasis {
    pub arity: usize,
    pub caps: Caps,
    pub formulas: Vec<BasisFormula>,
    /// Every conjunction closure reached its fixpoint and, on a finite
    /// structure, coefficients cover all residues modulo the exponent.
    pub saturated: bool,
}

fn names(prefix: &str, n: usize) -> Vec<String> {
    if n == 1 {
        vec![prefix.to_string()]
    } else {
        (1..=n).map(|i| format!("{prefix}{i}")).collect()
    }
}

fn var_of(i: usize, m: usize) -> Var {
    if i < m {
        Var::Free(i)
    } else {
        Var::Bound(i - m)
    }
}

fn reduce_coeff(c: i64, exponent: Option<i64>) -> i64 {
    match exponent {
        Some(e) => {
            let r = c.rem_euclid(e);
            if 2 * r > e {
                r - e
            } else {
                r
            }
        }
        None => c,
    }
}

/// Argument rows of a homogeneous atom over `nvars` variables, free ones first.
fn atom_rows(atom: &Atom, m: usize, nvars: usize) -> Result<Vec<Vec<i64>>> {
    atom.args
        .iter()
        .map(|t| {
            if t.constant() != 0 {
                return Err(Error::Precondition("basis formulas have no constants".into()));
            }
            let mut row = vec![0; nvars];
            for (sym, &c) in t.coeffs() {
                let j = match sym {
                    Symbol::Var(Var::Free(i)) => *i,
                    Symbol::Var(Var::Bound(j)) => m + j,
                    Symbol::Param(p) => {
                        return Err(Error::Precondition(format!("basis formulas have no parameters, found {p}")))
                    }
                };
                if j >= nvars {
                    return Err(Error::Precondition("variable out of range".into()));
                }
                row[j] += c;
            }
            Ok(row)
        })
        .collect()
}

fn predicate<'a>(s: &'a Structure, name: &str, arity: usize) -> Result<&'a Lattice> {
    match s.predicate(name) {
        Some((a, l)) if a == arity => Ok(l),
        Some((a, _)) => Err(Error::Signature(format!("{name} has arity {a}, used with {arity}"))),
        None => Err(Error::Signature(format!("unknown predicate {name}"))),
    }
}

fn atom_lattice(s: &Structure, pred_lattice: &Lattice, rows: &[Vec<i64>], nvars: usize) -> Result<Lattice> {
    let n = s.rank();
    let a = rows.len();
    let mut map = IntMatrix::zeros(a * n, nvars * n);
    for (i, row) in rows.iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            if c != 0 {
                for r in 0..n {
                    map[(i * n + r, j * n + r)] = BigInt::from(c);
                }
            }
        }
    }
    let zero = vec![BigInt::zero(); a * n];
    Ok(solve(&map, pred_lattice, &zero)?
        .expect("homogeneous systems are solvable")
        .lattice()
        .clone())
}

fn body_lattice(s: &Structure, phi: &PpFormula) -> Result<Lattice> {
    let m = phi.free_arity();
    let nvars = m + phi.bound_arity();
    let mut l = Lattice::full(nvars * s.rank());
    for atom in phi.atoms() {
        let rows = atom_rows(atom, m, nvars)?;
        let p = predicate(s, &atom.pred, rows.len())?;
        l = l.intersect(&atom_lattice(s, p, &rows, nvars)?)?;
    }
    Ok(l)
}

/// Annihilators modulo the exponent `e` of a finite structure.
///
/// A subgroup `S ⊇ e·Z^D` is stored as `S^⊥ = {u : u·v ≡ 0 (mod e) for v ∈ S}`.
/// Formula duals use bound blocks first, then free blocks.
struct Dual {
    e: i64,
    n: usize,
    preds: HashMap<String, Vec<Vec<i64>>>,
    /// Rows of `e·F`, integral on a finite structure.
    ef: Vec<Vec<i64>>,
}

/// Largest exponent handled in machine integers.
const DUAL_LIMIT: i64 = 1 << 30;

fn annihilator_rows(l: &Lattice, e: i64) -> Result<Vec<Vec<i64>>> {
    let r = l.rank();
    let sol = solve(&l.basis_matrix(), &Lattice::scalar(r, &BigInt::from(e)), &vec![BigInt::zero(); r])?
        .expect("homogeneous systems are solvable");
    Ok(ModLattice::from_lattice(sol.lattice(), e)
        .nontrivial_rows()
        .map(<[i64]>::to_vec)
        .collect())
}

impl Dual {
    fn new(s: &Structure) -> Result<Option<Dual>> {
        if !s.is_finite() {
            return Ok(None);
        }
        let e = match s.invariant_factors().last() {
            None => 1,
            Some(x) => match x.to_i64() {
                Some(v) if v <= DUAL_LIMIT => v,
                _ => return Ok(None),
            },
        };
        let n = s.rank();
        let mut preds = HashMap::new();
        preds.insert(EQ.to_string(), annihilator_rows(s.relations(), e)?);
        for (name, sg) in s.subgroups() {
            preds.insert(name.clone(), annihilator_rows(&sg.lattice, e)?);
        }
        let scaled = s.scaled_character();
        let den = s.character_denominator();
        let ef = (0..s.torus_dim())
            .map(|t| {
                (0..n)
                    .map(|c| (&scaled[(t, c)] * e / &den).to_i64().expect("e·F is integral and small"))
                    .collect()
            })
            .collect();
        Ok(Some(Dual { e, n, preds, ef }))
    }

    fn atom_gens(&self, pred: &str, rows: &[Vec<i64>], m: usize, k: usize, out: &mut Vec<Vec<i64>>) {
        let n = self.n;
        let nvars = m + k;
        for y in &self.preds[pred] {
            let mut g = vec![0i64; nvars * n];
            for (i, row) in rows.iter().enumerate() {
                for (j, &c) in row.iter().enumerate() {
                    if c == 0 {
                        continue;
                    }
                    let blk = if j < m { k + j } else { j - m };
                    for r in 0..n {
                        g[blk * n + r] = (g[blk * n + r] + c * y[i * n + r]).rem_euclid(self.e);
                    }
                }
            }
            out.push(g);
        }
    }

    fn atom(&self, pred: &str, rows: &[Vec<i64>], m: usize, k: usize) -> ModLattice {
        let mut gens = Vec::new();
        self.atom_gens(pred, rows, m, k, &mut gens);
        ModLattice::new((m + k) * self.n, self.e, gens)
    }

    fn formula(&self, s: &Structure, phi: &PpFormula) -> Result<ModLattice> {
        let m = phi.free_arity();
        let k = phi.bound_arity();
        let mut gens = Vec::new();
        for atom in phi.atoms() {
            let rows = atom_rows(atom, m, m + k)?;
            predicate(s, &atom.pred, rows.len())?;
            self.atom_gens(&atom.pred, &rows, m, k, &mut gens);
        }
        Ok(ModLattice::new((m + k) * self.n, self.e, gens))
    }
}

struct AtomCandidate {
    atom: Atom,
    pred: String,
    rows: Vec<Vec<i64>>,
    vars: u64,
}

fn term_of(row: &[i64], m: usize) -> Term {
    Term::linear(row.iter().enumerate().filter(|(_, &c)| c != 0).map(|(j, &c)| (var_of(j, m), c)))
}

fn atoms_for(s: &Structure, m: usize, nvars: usize, caps: &Caps) -> Vec<AtomCandidate> {
    let exponent = s.invariant_factors().last().and_then(|e| e.to_i64()).filter(|e| *e > 0 && s.is_finite());
    let c = caps.coeff;
    let mut out = Vec::new();
    let mut seen_rows: HashSet<(String, Vec<Vec<i64>>)> = HashSet::new();
    let mut push = |pred: &str, rows: Vec<Vec<i64>>, out: &mut Vec<AtomCandidate>| {
        if rows.iter().all(|r| r.iter().all(|&x| x == 0)) || !seen_rows.insert((pred.to_string(), rows.clone())) {
            return;
        }
        let vars = rows
            .iter()
            .flat_map(|r| r.iter().enumerate().filter(|(_, &x)| x != 0).map(|(j, _)| j))
            .fold(0u64, |acc, j| acc | 1 << j);
        let atom = Atom::new(pred, rows.iter().map(|r| term_of(r, m)).collect());
        out.push(AtomCandidate {
            atom,
            pred: pred.to_string(),
            rows,
            vars,
        });
    };

    // Eq atoms: arbitrary linear forms, up to sign.
    let width = (2 * c + 1) as usize;
    let total = width.checked_pow(nvars as u32).unwrap_or(usize::MAX);
    for code in 0..total {
        let mut x = code;
        let mut row: Vec<i64> = (0..nvars)
            .map(|_| {
                let v = (x % width) as i64 - c;
                x /= width;
                reduce_coeff(v, exponent)
            })
            .collect();
        match row.iter().find(|&&v| v != 0) {
            Some(&lead) if lead < 0 => row.iter_mut().for_each(|v| *v = reduce_coeff(-*v, exponent)),
            Some(_) => {}
            None => continue,
        }
        push(EQ, vec![row], &mut out);
    }

    // Distinguished subgroups: each argument is 0 or a multiple of one variable.
    let mut monomials: Vec<Vec<i64>> = vec![vec![0; nvars]];
    for j in 0..nvars {
        for k in (-c..=c).filter(|&k| k != 0) {
            let k = reduce_coeff(k, exponent);
            if k == 0 {
                continue;
            }
            let mut r = vec![0; nvars];
            r[j] = k;
            if !monomials.contains(&r) {
                monomials.push(r);
            }
        }
    }
    for (name, sg) in s.subgroups() {
        let total = monomials.len().pow(sg.arity as u32);
        for code in 0..total {
            let mut x = code;
            let rows: Vec<Vec<i64>> = (0..sg.arity)
                .map(|_| {
                    let r = monomials[x % monomials.len()].clone();
                    x /= monomials.len();
                    r
                })
                .collect();
            push(name, rows, &mut out);
        }
    }
    out
}

/// Closes `atoms` under `meet` for conjunctions of at most `depth` atoms.
///
/// Conjunctions are built in increasing atom order; a lattice reached again
/// is only re-expanded when it is reached through a smaller last atom.
/// Returns the first conjunction found for each lattice, in discovery order,
/// and whether no new lattice appears one step past `depth`.
fn conjunction_closure<L: Clone + Eq + Hash>(
    atoms: &[L],
    depth: usize,
    meet: impl Fn(&L, &L) -> Result<L>,
) -> Result<(Vec<(Vec<usize>, L)>, bool)> {
    let mut best: HashMap<L, usize> = HashMap::new();
    let mut found = Vec::new();
    let mut level: Vec<(Vec<usize>, L)> = Vec::new();
    for (i, a) in atoms.iter().enumerate() {
        if !best.contains_key(a) {
            best.insert(a.clone(), i);
            found.push((vec![i], a.clone()));
            level.push((vec![i], a.clone()));
        }
    }
    let mut d = 1;
    while !level.is_empty() {
        let mut next = Vec::new();
        for (used, l) in &level {
            let last = *used.last().expect("conjunctions are nonempty");
            for (j, a) in atoms.iter().enumerate().skip(last + 1) {
                let c = meet(l, a)?;
                match best.get(&c) {
                    None if d == depth => return Ok((found, false)),
                    None => {
                        best.insert(c.clone(), j);
                        let mut u = used.clone();
                        u.push(j);
                        found.push((u.clone(), c.clone()));
                        next.push((u, c));
                    }
                    Some(&b) if b > j && d < depth => {
                        best.insert(c.clone(), j);
                        let mut u = used.clone();
                        u.push(j);
                        next.push((u, c));
                    }
                    Some(_) => {}
                }
            }
        }
        if d == depth {
            break;
        }
        level = next;
        d += 1;
    }
    Ok((found, true))
}

/// Enumerates pp formulas in `m` free variables within `caps`, one per
/// distinct solution subgroup of `A^{m+k}` for each `k ≤ caps.bound_vars`.
///
/// When quantifiers are allowed and `A` is finite, the canonical diagram
/// formula of every tuple follows, whatever its size.
///
/// Finite structures are handled through annihilators modulo the exponent;
/// [`basis_generate_exact`] gives the same basis with exact lattices.
pub fn basis_generate(s: &Structure, m: usize, caps: Caps) -> Result<FormulaBasis> {
    match Dual::new(s)? {
        Some(dual) => generate(s, m, caps, |atoms, c, k| {
            let duals: Vec<ModLattice> = atoms.iter().map(|a| dual.atom(&a.pred, &a.rows, m, k)).collect();
            let (found, closed) = conjunction_closure(&duals, c.atoms, |a, b| Ok(a.sum(b)))?;
            Ok((found.into_iter().map(|(u, _)| (u, None)).collect(), closed))
        }),
        None => basis_generate_exact(s, m, caps),
    }
}

/// [`basis_generate`] with exact solution lattices throughout.
pub fn basis_generate_exact(s: &Structure, m: usize, caps: Caps) -> Result<FormulaBasis> {
    generate(s, m, caps, |atoms, c, k| {
        let lats: Vec<Lattice> = atoms
            .iter()
            .map(|a| atom_lattice(s, predicate(s, &a.pred, a.rows.len())?, &a.rows, m + k))
            .collect::<Result<_>>()?;
        let (found, closed) = conjunction_closure(&lats, c.atoms, |a, b| a.intersect(b))?;
        Ok((found.into_iter().map(|(u, l)| (u, Some(l))).collect(), closed))
    })
}

/// Tuples up to this many get their canonical diagram formula in the basis.
pub const CANONICAL_LIMIT: usize = 1 << 12;

/// Atoms true of the generators `g` of `A`, as argument rows over `g`:
/// a basis of `{L : L·g ∈ P}` for every predicate `P`, reduced modulo `e`.
fn diagram(s: &Structure, gens: &[IntVec], e: i64) -> Result<Vec<(String, Vec<Vec<i64>>)>> {
    let n = s.rank();
    let r = gens.len();
    let big_e = BigInt::from(e);
    let mut preds: Vec<(String, usize, &Lattice)> = vec![(EQ.to_string(), 1, s.relations())];
    preds.extend(s.subgroups().iter().map(|(name, sg)| (name.clone(), sg.arity, &sg.lattice)));
    let mut out = Vec::new();
    for (name, a, lattice) in preds {
        let mut map = IntMatrix::zeros(a * n, a * r);
        for j in 0..a {
            for (i, g) in gens.iter().enumerate() {
                for c in 0..n {
                    map[(j * n + c, j * r + i)] = g[c].clone();
                }
            }
        }
        let sol = solve(&map, lattice, &vec![BigInt::zero(); a * n])?.expect("homogeneous systems are solvable");
        for v in sol.lattice().basis() {
            let rows: Vec<Vec<i64>> = (0..a)
                .map(|j| {
                    (0..r)
                        .map(|i| reduce_coeff(v[j * r + i].mod_floor(&big_e).to_i64().expect("reduced"), Some(e)))
                        .collect()
                })
                .collect();
            if rows.iter().any(|row| row.iter().any(|&x| x != 0)) {
                out.push((name.clone(), rows));
            }
        }
    }
    Ok(out)
}

/// For each tuple `ā`, the formula `E ȳ. D(ȳ) & x̄ = T ȳ` where `ȳ` ranges over
/// generator images satisfying the diagram `D` and `T ḡ = ā`. Kept once per
/// distinct partition they induce.
fn canonical_formulas(s: &Structure, m: usize) -> Result<Vec<BasisFormula>> {
    let Some(dual) = Dual::new(s)? else {
        return Ok(Vec::new());
    };
    let Ok(model) = FiniteModel::new(s) else {
        return Ok(Vec::new());
    };
    let r = model.moduli().len();
    let total = match model.size().checked_pow(m as u32) {
        Some(t) if t <= CANONICAL_LIMIT && m > 0 && r > 0 => t,
        _ => return Ok(Vec::new()),
    };
    let gens: Vec<IntVec> = (0..r).map(|i| model.vector(model.generator(i))).collect();
    let base: Vec<Atom> = diagram(s, &gens, dual.e)?
        .into_iter()
        .map(|(pred, rows)| {
            let args = rows
                .iter()
                .map(|row| {
                    let mut v = vec![0; m];
                    v.extend(row);
                    term_of(&v, m)
                })
                .collect();
            Atom::new(pred, args)
        })
        .collect();
    let free = names("x", m);
    let bound = names("y", r);
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for code in 0..total {
        let mut atoms = base.clone();
        for (j, x) in model.decode(code, m).into_iter().enumerate() {
            let mut row = vec![0i64; m + r];
            row[j] = 1;
            for (i, c) in model.coords(x).into_iter().enumerate() {
                row[m + i] = reduce_coeff(-(c as i64), Some(dual.e));
            }
            atoms.push(Atom::eq(term_of(&row, m)));
        }
        let b = BasisFormula::new(PpFormula::new(free.clone(), bound.clone(), atoms));
        if seen.insert(dual_parts(&dual, s, &b)?) {
            out.push(b);
        }
    }
    Ok(out)
}

type Conjunctions = (Vec<(Vec<usize>, Option<Lattice>)>, bool);

fn generate(
    s: &Structure,
    m: usize,
    caps: Caps,
    close: impl Fn(&[AtomCandidate], &Caps, usize) -> Result<Conjunctions>,
) -> Result<FormulaBasis> {
    if caps.atoms == 0 || caps.coeff <= 0 {
        return Err(Error::Precondition("caps must be positive".into()));
    }
    let exponent = s.invariant_factors().last().and_then(|e| e.to_i64()).unwrap_or(0);
    let mut saturated = s.is_finite() && 2 * caps.coeff + 1 >= exponent;
    let mut keyed: Vec<(usize, usize, String, BasisFormula)> = Vec::new();
    for k in 0..=caps.bound_vars {
        let nvars = m + k;
        if nvars == 0 || nvars > 63 {
            continue;
        }
        let atoms = atoms_for(s, m, nvars, &caps);
        let bound_mask: u64 = ((1u64 << nvars) - 1) & !((1u64 << m) - 1);
        let (found, closed) = close(&atoms, &caps, k)?;
        saturated &= closed;
        let free = names("x", m);
        let bound = names("y", k);
        for (used, lattice) in found {
            let vars = used.iter().fold(0u64, |acc, &i| acc | atoms[i].vars);
            if vars & bound_mask != bound_mask {
                continue;
            }
            let body = used.iter().map(|&i| atoms[i].atom.clone()).collect();
            let b = BasisFormula::new(PpFormula::new(free.clone(), bound.clone(), body));
            if let Some(l) = lattice {
                let _ = b.solutions.set(l);
            }
            let text = render(&Formula::Pp(b.formula.clone()));
            keyed.push((k, used.len(), text, b));
        }
    }
    keyed.sort_by(|a, b| (a.0, a.1, &a.2).cmp(&(b.0, b.1, &b.2)));
    let mut formulas: Vec<BasisFormula> = keyed.into_iter().map(|t| t.3).collect();
    if caps.bound_vars > 0 {
        formulas.extend(canonical_formulas(s, m)?);
    }
    Ok(FormulaBasis {
        arity: m,
        caps,
        formulas,
        saturated,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Entry {
    Bottom,
    Coset(TorusCoset),
}

impl fmt::Display for Entry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Entry::Bottom => write!(f, "⊥"),
            Entry::Coset(c) => write!(f, "{c}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Fingerprint {
    pub f_values: Vec<TorusPoint>,
    pub entries: Vec<Entry>,
}

/// Witnesses `{ȳ : (ā, ȳ) ∈ S}` as a translate in `Z^{kN}`.
fn fiber(s: &Structure, b: &BasisFormula, flat: &[BigInt]) -> Result<Option<crate::lattice::AffineLattice>> {
    let n = s.rank();
    let mn = flat.len();
    let kn = b.bound_arity() * n;
    let mut map = IntMatrix::zeros(mn + kn, kn);
    for i in 0..kn {
        map[(mn + i, i)] = BigInt::from(1);
    }
    let mut shift: IntVec = flat.iter().map(|x| -x).collect();
    shift.extend(std::iter::repeat(BigInt::zero()).take(kn));
    solve(&map, b.solutions(s)?, &shift)
}

fn entry(s: &Structure, b: &BasisFormula, flat: &[BigInt]) -> Result<Entry> {
    let Some(w) = fiber(s, b, flat)? else {
        return Ok(Entry::Bottom);
    };
    let n = s.rank();
    let dim = b.bound_arity() * s.torus_dim();
    if n == 0 {
        return Ok(Entry::Coset(TorusCoset::point(TorusPoint::zero(dim))));
    }
    let gens: Vec<TorusPoint> = w.lattice().basis().iter().map(|g| s.f_blocks(g)).collect();
    let group = closure_of(&gens, dim)?;
    Ok(Entry::Coset(TorusCoset::new(s.f_blocks(w.rep()), group)?))
}

fn check_arity(s: &Structure, tuple: &[IntVec], m: usize) -> Result<()> {
    if tuple.len() != m {
        return Err(Error::dims(m, tuple.len()));
    }
    tuple.iter().try_for_each(|v| s.check_element(v))
}

pub fn fingerprint(s: &Structure, tuple: &[IntVec], basis: &FormulaBasis) -> Result<Fingerprint> {
    check_arity(s, tuple, basis.arity)?;
    let flat = flatten(tuple);
    Ok(Fingerprint {
        f_values: tuple.iter().map(|v| s.f(v)).collect(),
        entries: basis
            .formulas
            .iter()
            .map(|b| entry(s, b, &flat))
            .collect::<Result<_>>()?,
    })
}

/// First point where the fingerprints of `a` and `b` differ, if any.
pub fn type_difference(s: &Structure, a: &[IntVec], b: &[IntVec], basis: &FormulaBasis) -> Result<Option<String>> {
    if a.len() != b.len() {
        return Err(Error::dims(a.len(), b.len()));
    }
    check_arity(s, a, basis.arity)?;
    check_arity(s, b, basis.arity)?;
    if a.iter().zip(b).any(|(x, y)| s.f(x) != s.f(y)) {
        return Ok(Some("f-values differ".into()));
    }
    let (fa, fb) = (flatten(a), flatten(b));
    for bf in &basis.formulas {
        let (ea, eb) = (entry(s, bf, &fa)?, entry(s, bf, &fb)?);
        if ea != eb {
            return Ok(Some(format!(
                "{}: {} vs {}",
                render(&Formula::Pp(bf.formula.clone())),
                ea,
                eb
            )));
        }
    }
    Ok(None)
}

pub fn eq_ppstar_type(s: &Structure, a: &[IntVec], b: &[IntVec], basis: &FormulaBasis) -> Result<bool> {
    Ok(type_difference(s, a, b, basis)?.is_none())
}

/// Finds `d` with `tp(ā c) = tp(b̄ d)` over `next` (a basis of arity `m + 1`).
pub fn extend(
    s: &Structure,
    a: &[IntVec],
    b: &[IntVec],
    c: &IntVec,
    basis: &FormulaBasis,
    next: &FormulaBasis,
) -> Result<IntVec> {
    if next.arity != basis.arity + 1 {
        return Err(Error::Precondition(format!(
            "extension basis has arity {}, expected {}",
            next.arity,
            basis.arity + 1
        )));
    }
    s.check_element(c)?;
    let model = FiniteModel::new(s)?;
    if let Some(why) = type_difference(s, a, b, basis)? {
        return Err(Error::TypeMismatch(why));
    }
    let mut ac = a.to_vec();
    ac.push(c.clone());
    let target = fingerprint(s, &ac, next)?;
    let ce = model.elem(c);
    let candidates = std::iter::once(ce).chain((0..model.size() as Elem).filter(|&d| d != ce));
    for d in candidates.filter(|&d| model.f_raw(d) == model.f_raw(ce)) {
        let mut bd = b.to_vec();
        bd.push(model.vector(d));
        if fingerprint(s, &bd, next)? == target {
            return Ok(model.vector(d));
        }
    }
    Err(Error::BasisIncomplete(format!(
        "no extension found at caps {}; try {}",
        next.caps,
        next.caps.escalate()
    )))
}

/// Largest `|A|^m` for which [`TypeClasses`] tabulates every tuple.
pub const CLASS_LIMIT: usize = 1 << 22;

/// Partition of `A^m` into fingerprint classes, computed on a finite model.
///
/// For a basis formula with solution group `S`, the entry of `ā` is `⊥`
/// off `π(S)`, and on `π(S)` it is constant exactly on cosets of
/// `K = π{(x̄, ȳ) ∈ S : f̄(ȳ) ∈ H}`, `H` the closure of `f̄(S_0)`.
#[derive(Clone, Debug)]
pub struct TypeClasses {
    arity: usize,
    classes: Vec<u32>,
}

fn tuple_gens(model: &FiniteModel, l: &Lattice, m: usize, n: usize) -> Vec<Vec<Elem>> {
    l.basis()
        .iter()
        .map(|row| (0..m).map(|i| model.elem(&row[i * n..(i + 1) * n])).collect())
        .collect()
}

fn span(model: &FiniteModel, gens: &[Vec<Elem>], m: usize) -> Vec<usize> {
    let total = model.size().pow(m as u32);
    let mut inside = vec![false; total];
    inside[0] = true;
    let mut members = vec![0usize];
    let mut i = 0;
    while i < members.len() {
        let t = model.decode(members[i], m);
        for g in gens {
            let u: Vec<Elem> = t.iter().zip(g).map(|(&x, &y)| model.add(x, y)).collect();
            let c = model.encode(&u);
            if !inside[c] {
                inside[c] = true;
                members.push(c);
            }
        }
        i += 1;
    }
    members
}

fn kernel_part(s: &Structure, b: &BasisFormula, m: usize) -> Result<Lattice> {
    let n = s.rank();
    let k = b.bound_arity();
    let d = s.torus_dim();
    let mn = m * n;
    let nn = (m + k) * n;
    let sol = b.solutions(s)?;
    if k == 0 || d == 0 || n == 0 {
        return Ok(sol.project(0..mn));
    }
    let mut zero_free = IntMatrix::zeros(nn, k * n);
    for i in 0..k * n {
        zero_free[(mn + i, i)] = BigInt::from(1);
    }
    let s0 = solve(&zero_free, sol, &vec![BigInt::zero(); nn])?.expect("homogeneous");
    let gens: Vec<TorusPoint> = s0.lattice().basis().iter().map(|g| s.f_blocks(g)).collect();
    let h: ClosedTorusSubgroup = closure_of(&gens, k * d)?;
    let lden = s.character_denominator();
    let scaled = s.scaled_character();
    let lambda = h.annihilator().basis();
    let mut map = IntMatrix::zeros(lambda.len(), nn);
    for (r, l) in lambda.iter().enumerate() {
        for blk in 0..k {
            for t in 0..d {
                let coeff = &l[blk * d + t];
                if coeff.is_zero() {
                    continue;
                }
                for col in 0..n {
                    let v = coeff * &scaled[(t, col)];
                    map[(r, mn + blk * n + col)] += v;
                }
            }
        }
    }
    let q = solve(&map, &Lattice::scalar(lambda.len(), &lden), &vec![BigInt::zero(); lambda.len()])?
        .expect("homogeneous");
    Ok(sol.intersect(q.lattice())?.project(0..mn))
}

fn exact_labels(model: &FiniteModel, s: &Structure, b: &BasisFormula, m: usize, total: usize) -> Result<Vec<u64>> {
    let n = s.rank();
    let pi = b.solutions(s)?.project(0..m * n);
    let kern = kernel_part(s, b, m)?;
    let pi_members = span(model, &tuple_gens(model, &pi, m, n), m);
    let k_members = span(model, &tuple_gens(model, &kern, m, n), m);
    let mut label = vec![u64::MAX; total];
    let mut next = 0u64;
    for &c in &pi_members {
        if label[c] != u64::MAX {
            continue;
        }
        let t = model.decode(c, m);
        for &kc in &k_members {
            let u = model.decode(kc, m);
            let sum: Vec<Elem> = t.iter().zip(&u).map(|(&x, &y)| model.add(x, y)).collect();
            label[model.encode(&sum)] = next;
        }
        next += 1;
    }
    Ok(label)
}

/// `(π(S)^⊥, K^⊥)` for a basis formula, both in free coordinates.
fn dual_parts(dual: &Dual, s: &Structure, b: &BasisFormula) -> Result<(ModLattice, ModLattice)> {
    let n = dual.n;
    let kn = b.bound_arity() * n;
    let full = dual.formula(s, &b.formula)?;
    let pi = full.tail(kn);
    if kn == 0 || dual.ef.is_empty() {
        return Ok((pi.clone(), pi));
    }
    let gens = (0..b.bound_arity()).flat_map(|j| {
        dual.ef.iter().map(move |row| {
            let mut v = vec![0; kn];
            v[j * n..(j + 1) * n].copy_from_slice(row);
            v
        })
    });
    let c = ModLattice::new(kn, dual.e, gens).intersect(&full.head(kn));
    let dim = full.dim();
    let kern = full
        .with(c.nontrivial_rows().map(|r| {
            let mut v = r.to_vec();
            v.resize(dim, 0);
            v
        }))
        .tail(kn);
    Ok((pi, kern))
}

fn dual_labels(model: &FiniteModel, dual: &Dual, pi: &ModLattice, kern: &ModLattice, m: usize, total: usize) -> Vec<u64> {
    let e = dual.e;
    let vecs: Vec<Vec<i64>> = (0..model.size() as Elem)
        .map(|x| model.vector(x).iter().map(|v| v.mod_floor(&BigInt::from(e)).to_i64().expect("reduced")).collect())
        .collect();
    let pi_rows: Vec<&[i64]> = pi.nontrivial_rows().collect();
    let k_rows: Vec<&[i64]> = kern.nontrivial_rows().collect();
    let mut ids: HashMap<Vec<i64>, u64> = HashMap::new();
    let mut flat = Vec::with_capacity(m * dual.n);
    (0..total)
        .map(|code| {
            flat.clear();
            for x in model.decode(code, m) {
                flat.extend_from_slice(&vecs[x as usize]);
            }
            let value = |r: &[i64]| r.iter().zip(&flat).fold(0i64, |acc, (a, b)| (acc + a * b) % e);
            if pi_rows.iter().any(|r| value(r) != 0) {
                return u64::MAX;
            }
            let key: Vec<i64> = k_rows.iter().map(|r| value(r)).collect();
            let next = ids.len() as u64;
            *ids.entry(key).or_insert(next)
        })
        .collect()
}

impl TypeClasses {
    pub fn new(model: &FiniteModel, s: &Structure, basis: &FormulaBasis) -> Result<TypeClasses> {
        TypeClasses::build(model, s, basis, Dual::new(s)?)
    }

    /// [`TypeClasses::new`] with exact lattices throughout.
    pub fn new_exact(model: &FiniteModel, s: &Structure, basis: &FormulaBasis) -> Result<TypeClasses> {
        TypeClasses::build(model, s, basis, None)
    }

    fn build(model: &FiniteModel, s: &Structure, basis: &FormulaBasis, dual: Option<Dual>) -> Result<TypeClasses> {
        let m = basis.arity;
        let total = model
            .size()
            .checked_pow(m as u32)
            .filter(|&t| t <= CLASS_LIMIT)
            .ok_or(Error::SizeLimit {
                size: model.size() as u64,
                limit: CLASS_LIMIT as u64,
            })?;
        let mut classes = vec![0u32; total];
        let mut refine = |labels: &dyn Fn(usize) -> u64| {
            let mut ids: HashMap<(u32, u64), u32> = HashMap::new();
            for (code, cls) in classes.iter_mut().enumerate() {
                let key = (*cls, labels(code));
                let next = ids.len() as u32;
                *cls = *ids.entry(key).or_insert(next);
            }
        };
        let fid: HashMap<&[u64], u64> = {
            let mut h = HashMap::new();
            for e in 0..model.size() as Elem {
                let len = h.len() as u64;
                h.entry(model.f_raw(e)).or_insert(len);
            }
            h
        };
        for i in 0..m {
            refine(&|code| {
                let t = model.decode(code, m);
                fid[model.f_raw(t[i])]
            });
        }
        let mut seen = HashSet::new();
        for b in &basis.formulas {
            let label = match &dual {
                Some(dual) => {
                    let (pi, kern) = dual_parts(dual, s, b)?;
                    if !seen.insert((pi.clone(), kern.clone())) {
                        continue;
                    }
                    dual_labels(model, dual, &pi, &kern, m, total)
                }
                None => exact_labels(model, s, b, m, total)?,
            };
            refine(&|code| label[code]);
        }
        Ok(TypeClasses { arity: m, classes })
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn class_of(&self, model: &FiniteModel, t: &[Elem]) -> u32 {
        self.classes[model.encode(t)]
    }

    pub fn classes(&self) -> &[u32] {
        &self.classes
    }

    pub fn same(&self, model: &FiniteModel, a: &[Elem], b: &[Elem]) -> bool {
        self.class_of(model, a) == self.class_of(model, b)
    }

    /// [`extend`] against tabulated classes of arity `m` and `m + 1`.
    pub fn extend(&self, next: &TypeClasses, model: &FiniteModel, a: &[Elem], b: &[Elem], c: Elem) -> Result<Elem> {
        if !self.same(model, a, b) {
            return Err(Error::TypeMismatch("tuples have different fingerprints".into()));
        }
        let mut ac = a.to_vec();
        ac.push(c);
        let target = next.class_of(model, &ac);
        let mut bd = b.to_vec();
        bd.push(c);
        let candidates = std::iter::once(c).chain((0..model.size() as Elem).filter(|&d| d != c));
        for d in candidates.filter(|&d| model.f_raw(d) == model.f_raw(c)) {
            *bd.last_mut().unwrap() = d;
            if next.class_of(model, &bd) == target {
                return Ok(d);
            }
        }
        Err(Error::BasisIncomplete("no extension found".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::int_vec;
    use crate::solver::{eval_pp, Params};
    use crate::structure::StructureBuilder;
    use num_rational::BigRational;

    fn z4(f: bool) -> Structure {
        let mut b = StructureBuilder::new("z4", 1).relation(int_vec(&[4]));
        if f {
            b = b.character(1, vec![vec![BigRational::new(1.into(), 4.into())]]);
        }
        b.build().unwrap()
    }

    fn el(x: i64) -> Vec<IntVec> {
        vec![int_vec(&[x])]
    }

    #[test]
    fn z4_basis_subgroups() {
        let s = z4(false);
        let basis = basis_generate(&s, 1, Caps::new(1, 2, 2)).unwrap();
        let mut groups: Vec<Lattice> = basis
            .formulas
            .iter()
            .map(|b| eval_pp(&s, &b.formula, &Params::new()).unwrap().group().unwrap().clone())
            .collect();
        groups.sort();
        groups.dedup();
        let expected: Vec<Lattice> = [1, 2, 4].iter().map(|&k| Lattice::scalar(1, &k.into())).collect();
        let mut expected = expected;
        expected.sort();
        assert_eq!(groups, expected);
        assert!(basis.saturated);
        let qf = basis_generate(&s, 1, Caps::new(0, 2, 2)).unwrap();
        assert!(qf.formulas.iter().all(|b| b.bound_arity() == 0));
        assert_eq!(basis_generate(&s, 1, Caps::new(1, 2, 2)).unwrap(), basis);
    }

    #[test]
    fn fingerprint_examples() {
        let s = z4(true);
        let basis = basis_generate(&s, 1, Caps::new(2, 3, 4)).unwrap();
        assert_eq!(type_difference(&s, &el(1), &el(3), &basis).unwrap().as_deref(), Some("f-values differ"));
        assert!(eq_ppstar_type(&s, &el(1), &el(1), &basis).unwrap());
        let s = z4(false);
        let basis = basis_generate(&s, 1, Caps::new(1, 2, 2)).unwrap();
        assert_eq!(fingerprint(&s, &el(1), &basis).unwrap(), fingerprint(&s, &el(3), &basis).unwrap());
        assert!(!eq_ppstar_type(&s, &el(1), &el(2), &basis).unwrap());
    }

    #[test]
    fn extend_examples() {
        let s = z4(false);
        let b1 = basis_generate(&s, 1, Caps::new(1, 2, 2)).unwrap();
        let b2 = basis_generate(&s, 2, Caps::new(1, 2, 2)).unwrap();
        let d = extend(&s, &el(1), &el(3), &int_vec(&[2]), &b1, &b2).unwrap();
        assert_eq!(d, int_vec(&[2]));
        let d = extend(&s, &el(1), &el(1), &int_vec(&[3]), &b1, &b2).unwrap();
        assert_eq!(d, int_vec(&[3]));
        assert!(matches!(
            extend(&s, &el(1), &el(2), &int_vec(&[0]), &b1, &b2),
            Err(Error::TypeMismatch(_))
        ));
    }

    #[test]
    fn classes_match_direct_fingerprints() {
        let s = StructureBuilder::new("g", 2)
            .relations(vec![int_vec(&[2, 0]), int_vec(&[0, 4])])
            .subgroup("P", 1, vec![int_vec(&[1, 2])])
            .character(1, vec![vec![BigRational::new(0.into(), 1.into()), BigRational::new(1.into(), 2.into())]])
            .build()
            .unwrap();
        let model = FiniteModel::new(&s).unwrap();
        let basis = basis_generate(&s, 1, Caps::new(1, 2, 2)).unwrap();
        let classes = TypeClasses::new(&model, &s, &basis).unwrap();
        let prints: Vec<Fingerprint> = (0..model.size() as Elem)
            .map(|e| fingerprint(&s, &[model.vector(e)], &basis).unwrap())
            .collect();
        for a in 0..model.size() as Elem {
            for b in 0..model.size() as Elem {
                assert_eq!(classes.same(&model, &[a], &[b]), prints[a as usize] == prints[b as usize]);
            }
        }
    }

    #[test]
    fn modular_and_exact_paths_agree() {
        let s = StructureBuilder::new("g", 2)
            .relations(vec![int_vec(&[2, 0]), int_vec(&[0, 4])])
            .subgroup("P", 1, vec![int_vec(&[1, 2])])
            .character(1, vec![vec![BigRational::new(1.into(), 2.into()), BigRational::new(1.into(), 4.into())]])
            .build()
            .unwrap();
        let model = FiniteModel::new(&s).unwrap();
        for (m, caps) in [(1, Caps::new(2, 2, 2)), (2, Caps::new(1, 2, 2))] {
            let fast = basis_generate(&s, m, caps).unwrap();
            let exact = basis_generate_exact(&s, m, caps).unwrap();
            assert_eq!(fast, exact);
            let a = TypeClasses::new(&model, &s, &fast).unwrap();
            let b = TypeClasses::new_exact(&model, &s, &exact).unwrap();
            assert_eq!(a.classes(), b.classes());
        }
    }

    #[test]
    fn caps_parse() {
        assert_eq!("2,3,4".parse::<Caps>().unwrap(), Caps::new(2, 3, 4));
        assert!("2,3".parse::<Caps>().is_err());
        assert!("2,0,4".parse::<Caps>().is_err());
    }
}
