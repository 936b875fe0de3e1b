//! Explicit finite models: `A ≅ ⊕ Z/m_i`, elements numbered `0..|A|`, with
//! membership tables for every predicate and a table of `f`-values. Used by
//! the exhaustive oracles and the automorphism search.

use std::collections::BTreeSet;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::formula::{PpFormula, PpStarFormula, Symbol, Var, EQ, UNIT};
use crate::lattice::{snf, IntVec};
use crate::solver::Params;
use crate::structure::Structure;
use crate::torus::TorusPoint;

pub type Elem = u32;

/// Largest `|A|` a [`FiniteModel`] will be built for.
pub const MODEL_LIMIT: u64 = 1 << 16;

#[derive(Clone, Debug)]
pub struct PredicateTable {
    pub arity: usize,
    /// Indexed by the mixed-radix code of a tuple.
    pub members: Vec<bool>,
    /// Generating tuples of the subgroup.
    pub gens: Vec<Vec<Elem>>,
}

#[derive(Clone, Debug)]
pub struct FiniteModel {
    rank: usize,
    mods: Vec<u64>,
    strides: Vec<u64>,
    size: usize,
    /// Row `j` of `V`, restricted to the nontrivial cyclic factors.
    coord_map: Vec<Vec<BigInt>>,
    gen_vecs: Vec<IntVec>,
    relations: crate::lattice::Lattice,
    fden: u64,
    fvals: Vec<Vec<u64>>,
    preds: Vec<(String, PredicateTable)>,
}

impl FiniteModel {
    pub fn new(s: &Structure) -> Result<FiniteModel> {
        let Some(order) = s.order() else {
            return Err(Error::Precondition("structure is infinite".into()));
        };
        let size = order.to_u64().filter(|&x| x <= MODEL_LIMIT).ok_or_else(|| Error::SizeLimit {
            size: order.to_u64().unwrap_or(u64::MAX),
            limit: MODEL_LIMIT,
        })?;
        let n = s.rank();
        let sm = snf(&s.relations().basis_matrix());
        let vinv = sm.v.inverse_unimodular().expect("SNF transforms are unimodular");
        let mut mods = Vec::new();
        let mut coord_map = Vec::new();
        let mut gen_vecs = Vec::new();
        for j in 0..n {
            let dj = sm.d[(j, j)].to_u64().expect("finite factor");
            if dj > 1 {
                mods.push(dj);
                coord_map.push((0..n).map(|i| sm.v[(i, j)].clone()).collect());
                gen_vecs.push(s.reduce(vinv.row(j)));
            }
        }
        let mut strides = Vec::with_capacity(mods.len());
        let mut acc = 1u64;
        for &m in &mods {
            strides.push(acc);
            acc *= m;
        }
        debug_assert_eq!(acc, size);
        let fden = s.character_denominator().to_u64().expect("small denominators");
        let mut model = FiniteModel {
            rank: n,
            mods,
            strides,
            size: size as usize,
            coord_map,
            gen_vecs,
            relations: s.relations().clone(),
            fden,
            fvals: Vec::new(),
            preds: Vec::new(),
        };
        let scaled = s.scaled_character();
        let gen_f: Vec<Vec<u64>> = model
            .gen_vecs
            .iter()
            .map(|g| {
                scaled
                    .apply(g)
                    .expect("rank")
                    .iter()
                    .map(|x| x.mod_floor(&BigInt::from(fden)).to_u64().unwrap())
                    .collect()
            })
            .collect();
        let d = s.torus_dim();
        model.fvals = (0..model.size as Elem)
            .map(|e| {
                let c = model.coords(e);
                (0..d)
                    .map(|t| c.iter().zip(&gen_f).map(|(ci, gf)| ci * gf[t] % fden).sum::<u64>() % fden)
                    .collect()
            })
            .collect();
        for (name, sg) in s.subgroups() {
            let gens: Vec<Vec<Elem>> = sg
                .lattice
                .basis()
                .iter()
                .map(|row| row.chunks(n.max(1)).take(sg.arity).map(|c| model.elem(c)).collect())
                .filter(|t: &Vec<Elem>| t.iter().any(|&x| x != 0))
                .collect();
            let table = model.closure_table(sg.arity, &gens)?;
            model.preds.push((name.clone(), table));
        }
        Ok(model)
    }

    fn closure_table(&self, arity: usize, gens: &[Vec<Elem>]) -> Result<PredicateTable> {
        let total = (self.size as u64)
            .checked_pow(arity as u32)
            .filter(|&t| t <= 1 << 24)
            .ok_or(Error::SizeLimit {
                size: self.size as u64,
                limit: MODEL_LIMIT,
            })? as usize;
        let mut members = vec![false; total];
        members[0] = true;
        let mut queue = vec![vec![0 as Elem; arity]];
        while let Some(t) = queue.pop() {
            for g in gens {
                let u: Vec<Elem> = t.iter().zip(g).map(|(&a, &b)| self.add(a, b)).collect();
                let code = self.encode(&u);
                if !members[code] {
                    members[code] = true;
                    queue.push(u);
                }
            }
        }
        Ok(PredicateTable {
            arity,
            members,
            gens: gens.to_vec(),
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Orders of the cyclic factors, in divisibility order.
    pub fn moduli(&self) -> &[u64] {
        &self.mods
    }

    /// Element of coordinate `1` in the `i`-th cyclic factor.
    pub fn generator(&self, i: usize) -> Elem {
        self.strides[i] as Elem
    }

    pub fn exponent(&self) -> u64 {
        self.mods.last().copied().unwrap_or(1)
    }

    pub fn coords(&self, e: Elem) -> Vec<u64> {
        let e = e as u64;
        self.mods
            .iter()
            .zip(&self.strides)
            .map(|(&m, &s)| (e / s) % m)
            .collect()
    }

    pub fn from_coords(&self, c: &[u64]) -> Elem {
        c.iter()
            .zip(&self.mods)
            .zip(&self.strides)
            .map(|((&x, &m), &s)| (x % m) * s)
            .sum::<u64>() as Elem
    }

    pub fn add(&self, a: Elem, b: Elem) -> Elem {
        let (a, b) = (a as u64, b as u64);
        let mut out = 0;
        for (&m, &s) in self.mods.iter().zip(&self.strides) {
            out += (((a / s) % m + (b / s) % m) % m) * s;
        }
        out as Elem
    }

    pub fn neg(&self, a: Elem) -> Elem {
        self.scale(a, -1)
    }

    pub fn scale(&self, a: Elem, k: i64) -> Elem {
        let a = a as u64;
        let mut out = 0;
        for (&m, &s) in self.mods.iter().zip(&self.strides) {
            let km = k.rem_euclid(m as i64) as u64;
            out += (((a / s) % m) * km % m) * s;
        }
        out as Elem
    }

    /// Element represented by `v ∈ Z^N`.
    pub fn elem(&self, v: &[BigInt]) -> Elem {
        let c: Vec<u64> = self
            .coord_map
            .iter()
            .zip(&self.mods)
            .map(|(col, &m)| {
                let y: BigInt = col.iter().zip(v).map(|(a, b)| a * b).sum();
                y.mod_floor(&BigInt::from(m)).to_u64().unwrap()
            })
            .collect();
        self.from_coords(&c)
    }

    /// Canonical vector in `Z^N` for `e`.
    pub fn vector(&self, e: Elem) -> IntVec {
        let mut v = vec![BigInt::zero(); self.rank];
        for (c, g) in self.coords(e).iter().zip(&self.gen_vecs) {
            for (x, y) in v.iter_mut().zip(g) {
                *x += BigInt::from(*c) * y;
            }
        }
        self.relations.reduce(&v)
    }

    pub fn encode(&self, t: &[Elem]) -> usize {
        t.iter().rev().fold(0usize, |acc, &x| acc * self.size + x as usize)
    }

    pub fn decode(&self, mut code: usize, arity: usize) -> Vec<Elem> {
        (0..arity)
            .map(|_| {
                let x = code % self.size;
                code /= self.size;
                x as Elem
            })
            .collect()
    }

    /// Numerators of `f(e)` over [`Self::f_denominator`].
    pub fn f_raw(&self, e: Elem) -> &[u64] {
        &self.fvals[e as usize]
    }

    pub fn f_denominator(&self) -> u64 {
        self.fden
    }

    pub fn f_point(&self, e: Elem) -> TorusPoint {
        TorusPoint::new(
            self.fvals[e as usize]
                .iter()
                .map(|&x| BigRational::new(x.into(), self.fden.into()))
                .collect(),
        )
    }

    /// `f(e) == p` without leaving integer arithmetic when possible.
    pub fn f_matches(&self, e: Elem, p: &TorusPoint) -> bool {
        p.coords().iter().zip(self.f_raw(e)).all(|(q, &x)| {
            let scaled = q * BigRational::from_integer(self.fden.into());
            scaled.is_integer() && scaled.to_integer() == BigInt::from(x)
        })
    }

    pub fn predicates(&self) -> &[(String, PredicateTable)] {
        &self.preds
    }

    pub fn holds(&self, pred: &str, t: &[Elem]) -> Option<bool> {
        if pred == EQ {
            return Some(t.len() == 1 && t[0] == 0);
        }
        self.preds
            .iter()
            .find(|(n, _)| n == pred)
            .map(|(_, p)| p.arity == t.len() && p.members[self.encode(t)])
    }

    /// Every tuple of `A^arity`, in code order.
    pub fn tuples(&self, arity: usize) -> impl Iterator<Item = Vec<Elem>> + '_ {
        let total = self.size.pow(arity as u32);
        (0..total).map(move |c| self.decode(c, arity))
    }
}

/// Compiled term: `Σ coeff * slot + constant`.
struct Lin {
    parts: Vec<(usize, i64)>,
    constant: Elem,
}

struct Compiled<'a> {
    atoms: Vec<(&'a str, Vec<Lin>)>,
    free: usize,
    bound: usize,
}

fn compile<'a>(m: &FiniteModel, s: &Structure, phi: &'a PpFormula, args: &Params) -> Result<Compiled<'a>> {
    let free = phi.free_arity();
    let lookup = |name: &str| -> Result<Elem> {
        args.get(name)
            .or_else(|| s.parameters().get(name))
            .map(|v| m.elem(v))
            .ok_or_else(|| Error::Signature(format!("no value for parameter '{name}'")))
    };
    let mut atoms = Vec::new();
    for atom in phi.atoms() {
        let mut lins = Vec::new();
        for term in &atom.args {
            let mut parts = Vec::new();
            let mut constant = 0;
            if term.constant() != 0 {
                constant = m.scale(lookup(UNIT)?, term.constant());
            }
            for (sym, &c) in term.coeffs() {
                match sym {
                    Symbol::Var(Var::Free(i)) => parts.push((*i, c)),
                    Symbol::Var(Var::Bound(j)) => parts.push((free + j, c)),
                    Symbol::Param(p) => constant = m.add(constant, m.scale(lookup(p)?, c)),
                }
            }
            lins.push(Lin { parts, constant });
        }
        atoms.push((atom.pred.as_str(), lins));
    }
    Ok(Compiled {
        atoms,
        free,
        bound: phi.bound_arity(),
    })
}

impl Compiled<'_> {
    fn holds(&self, m: &FiniteModel, slots: &[Elem]) -> bool {
        self.atoms.iter().all(|(pred, lins)| {
            let vals: Vec<Elem> = lins
                .iter()
                .map(|l| {
                    l.parts
                        .iter()
                        .fold(l.constant, |acc, &(i, c)| m.add(acc, m.scale(slots[i], c)))
                })
                .collect();
            m.holds(pred, &vals).unwrap_or(false)
        })
    }
}

fn each_assignment(m: &FiniteModel, prefix: &[Elem], extra: usize, mut visit: impl FnMut(&[Elem]) -> bool) {
    let mut slots = prefix.to_vec();
    slots.extend(std::iter::repeat(0).take(extra));
    let start = prefix.len();
    loop {
        if visit(&slots) {
            return;
        }
        let mut i = start;
        loop {
            if i == slots.len() {
                return;
            }
            slots[i] += 1;
            if (slots[i] as usize) < m.size() {
                break;
            }
            slots[i] = 0;
            i += 1;
        }
    }
}

/// Solution set of `phi` in `A^m` by enumeration of all `(x, y)`.
pub fn brute_eval(m: &FiniteModel, s: &Structure, phi: &PpFormula, args: &Params) -> Result<BTreeSet<Vec<Elem>>> {
    let c = compile(m, s, phi, args)?;
    let mut out = BTreeSet::new();
    each_assignment(m, &[], c.free + c.bound, |slots| {
        if c.holds(m, slots) {
            out.insert(slots[..c.free].to_vec());
        }
        false
    });
    Ok(out)
}

/// Whether some witness `y` satisfies `psi(a, y)`, by enumeration.
pub fn brute_satisfies(m: &FiniteModel, s: &Structure, psi: &PpStarFormula, tuple: &[Elem], args: &Params) -> Result<bool> {
    let c = compile(m, s, psi.core(), args)?;
    if tuple.len() != c.free {
        return Err(Error::dims(c.free, tuple.len()));
    }
    for (v, p) in psi.f_constraints() {
        if let Var::Free(i) = v {
            if !m.f_matches(tuple[*i], p) {
                return Ok(false);
            }
        }
    }
    let bound: Vec<(usize, &TorusPoint)> = psi
        .f_constraints()
        .iter()
        .filter_map(|(v, p)| match v {
            Var::Bound(j) => Some((c.free + j, p)),
            Var::Free(_) => None,
        })
        .collect();
    let mut found = false;
    each_assignment(m, tuple, c.bound, |slots| {
        found = bound.iter().all(|(i, p)| m.f_matches(slots[*i], p)) && c.holds(m, slots);
        found
    });
    Ok(found)
}

/// `{x : f(x) = c}` (or the kernel), by enumeration.
pub fn brute_fiber(m: &FiniteModel, c: Option<&TorusPoint>) -> BTreeSet<Elem> {
    (0..m.size() as Elem)
        .filter(|&e| match c {
            Some(p) => m.f_matches(e, p),
            None => m.f_raw(e).iter().all(|x| x.is_zero()),
        })
        .collect()
}

/// Enumerated points of a definable coset.
pub fn points(m: &FiniteModel, c: &crate::solver::DefinableCoset) -> BTreeSet<Vec<Elem>> {
    if c.is_empty() {
        return BTreeSet::new();
    }
    m.tuples(c.arity())
        .filter(|t| {
            let flat: IntVec = t.iter().flat_map(|&e| m.vector(e)).collect();
            c.contains(&flat)
        })
        .collect()
}

pub fn to_vectors(m: &FiniteModel, t: &[Elem]) -> Vec<IntVec> {
    t.iter().map(|&e| m.vector(e)).collect()
}

/// `true` iff `k * e == 0`.
pub fn annihilated(m: &FiniteModel, e: Elem, k: u64) -> bool {
    m.coords(e).iter().zip(m.moduli()).all(|(&c, &md)| (c * (k % md)) % md == 0)
}
