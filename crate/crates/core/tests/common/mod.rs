#![allow(dead_code)]

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use ppstar::formula::{parse, Formula};
use ppstar::lattice::{int_vec, AffineLattice, IntMatrix, IntVec, Lattice};
use ppstar::solver::DefinableCoset;
use ppstar::structure::{Structure, StructureBuilder};

pub struct Shape {
    pub max_order: u64,
    pub max_rank: usize,
    pub max_subgroups: usize,
    pub max_torus_dim: usize,
    pub max_denominator: i64,
    pub parameters: usize,
}

pub const SMALL: Shape = Shape {
    max_order: 32,
    max_rank: 3,
    max_subgroups: 2,
    max_torus_dim: 2,
    max_denominator: 8,
    parameters: 0,
};

pub const PARAMETERS: [&str; 2] = ["a", "b"];

fn diagonal(rng: &mut ChaCha8Rng, n: usize, max_order: u64) -> Vec<i64> {
    loop {
        let d: Vec<i64> = (0..n).map(|_| rng.gen_range(1..=8)).collect();
        let order: u64 = d.iter().map(|&x| x as u64).product();
        if order <= max_order {
            return d;
        }
    }
}

/// Diagonal relations disguised by unimodular row and column moves.
fn disguise(rng: &mut ChaCha8Rng, diag: &[i64]) -> Vec<Vec<i64>> {
    let n = diag.len();
    let mut rows: Vec<Vec<i64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { diag[i] } else { 0 }).collect())
        .collect();
    for _ in 0..rng.gen_range(0..3) {
        if n < 2 {
            break;
        }
        let (i, j) = (rng.gen_range(0..n), rng.gen_range(0..n));
        if i == j {
            continue;
        }
        let k = rng.gen_range(-2..=2);
        if rng.gen_bool(0.5) {
            for c in 0..n {
                rows[i][c] += k * rows[j][c];
            }
        } else {
            for r in rows.iter_mut() {
                r[i] += k * r[j];
            }
        }
    }
    rows
}

pub fn random_vec(rng: &mut ChaCha8Rng, len: usize, bound: i64) -> IntVec {
    int_vec(&(0..len).map(|_| rng.gen_range(-bound..=bound)).collect::<Vec<_>>())
}

fn divisors(e: i64, cap: i64) -> Vec<i64> {
    (1..=cap.min(e)).filter(|q| e % q == 0).collect()
}

fn with_extras(rng: &mut ChaCha8Rng, mut b: StructureBuilder, n: usize, rels: &[Vec<i64>], shape: &Shape) -> Structure {
    for p in 0..rng.gen_range(0..=shape.max_subgroups) {
        let arity = rng.gen_range(1..=2);
        let gens = (0..rng.gen_range(1..=2)).map(|_| random_vec(rng, arity * n, 3)).collect();
        b = b.subgroup(format!("P{p}"), arity, gens);
    }
    for name in PARAMETERS.iter().take(shape.parameters) {
        b = b.parameter(*name, random_vec(rng, n, 5));
    }
    let base = b.clone().build().expect("random structure is valid");
    let finite = base.is_finite();
    let e: i64 = base
        .invariant_factors()
        .last()
        .and_then(|x| i64::try_from(x).ok())
        .unwrap_or(1);
    let d = rng.gen_range(0..=shape.max_torus_dim);
    if d > 0 {
        let qs: Vec<i64> = if finite {
            divisors(e.max(1), shape.max_denominator)
        } else {
            (1..=shape.max_denominator).collect()
        };
        let mut rows = Vec::new();
        for _ in 0..d {
            let q = *qs.choose(rng).expect("1 divides everything");
            let mut row = vec![0i64; n];
            for _ in 0..20 {
                let a: Vec<i64> = (0..n).map(|_| rng.gen_range(0..q)).collect();
                if rels.iter().all(|r| r.iter().zip(&a).map(|(x, y)| x * y).sum::<i64>() % q == 0) {
                    row = a;
                    break;
                }
            }
            rows.push(row.iter().map(|&x| BigRational::new(BigInt::from(x), BigInt::from(q))).collect());
        }
        b = b.character(d, rows);
    }
    b.build().expect("random character is well defined")
}

/// A random finite structure within `shape`.
pub fn finite_structure(rng: &mut ChaCha8Rng, name: &str, shape: &Shape) -> Structure {
    let n = rng.gen_range(1..=shape.max_rank);
    let diag = diagonal(rng, n, shape.max_order);
    let rels = disguise(rng, &diag);
    let b = StructureBuilder::new(name, n).relations(rels.iter().map(|r| int_vec(r)).collect());
    with_extras(rng, b, n, &rels, shape)
}

/// A structure of rank at most 2 with a free summand.
pub fn infinite_structure(rng: &mut ChaCha8Rng, name: &str, shape: &Shape) -> Structure {
    let n = rng.gen_range(1..=2);
    let rels: Vec<Vec<i64>> = if n == 2 && rng.gen_bool(0.5) {
        vec![vec![0, rng.gen_range(1..=6)]]
    } else {
        Vec::new()
    };
    let b = StructureBuilder::new(name, n).relations(rels.iter().map(|r| int_vec(r)).collect());
    with_extras(rng, b, n, &rels, shape)
}

/// Random rational point of `T^d` with denominators up to `q`.
pub fn torus_text(rng: &mut ChaCha8Rng, d: usize, q: i64) -> String {
    let coords: Vec<String> = (0..d)
        .map(|_| {
            let den = rng.gen_range(1..=q);
            let num = rng.gen_range(0..den);
            let r = BigRational::new(num.into(), den.into());
            format!("{}/{}", r.numer(), r.denom())
        })
        .collect();
    if d == 1 {
        coords[0].clone()
    } else {
        format!("({})", coords.join(", "))
    }
}

pub struct FormulaShape {
    pub max_bound: usize,
    pub max_atoms: usize,
    pub coeff: i64,
    pub f_constraints: bool,
    pub negation: bool,
    pub params: bool,
}

fn term_text(rng: &mut ChaCha8Rng, symbols: &[String], coeff: i64) -> String {
    let mut parts = Vec::new();
    for sym in symbols {
        if rng.gen_bool(0.45) {
            let c = rng.gen_range(-coeff..=coeff);
            match c {
                0 => {}
                1 => parts.push(sym.clone()),
                -1 => parts.push(format!("-{sym}")),
                c => parts.push(format!("{c}*{sym}")),
            }
        }
    }
    if parts.is_empty() {
        return "0".into();
    }
    let mut out = parts[0].clone();
    for p in &parts[1..] {
        if let Some(rest) = p.strip_prefix('-') {
            out.push_str(&format!(" - {rest}"));
        } else {
            out.push_str(&format!(" + {p}"));
        }
    }
    out
}

/// Random formula text over `s` with the given free variables.
pub fn formula_text(rng: &mut ChaCha8Rng, s: &Structure, free: &[String], shape: &FormulaShape) -> String {
    let k = rng.gen_range(0..=shape.max_bound);
    let bound: Vec<String> = (1..=k).map(|i| format!("y{i}")).collect();
    let mut symbols: Vec<String> = free.iter().chain(&bound).cloned().collect();
    if shape.params {
        symbols.extend(s.parameters().keys().cloned());
    }
    let preds: Vec<(String, usize)> = std::iter::once(("Eq".to_string(), 1))
        .chain(s.subgroups().iter().map(|(n, sg)| (n.clone(), sg.arity)))
        .collect();
    let mut atoms = Vec::new();
    for _ in 0..rng.gen_range(1..=shape.max_atoms) {
        let (name, arity) = preds.choose(rng).expect("Eq is always present");
        if name == "Eq" && rng.gen_bool(0.3) {
            atoms.push(format!(
                "{} = {}",
                term_text(rng, &symbols, shape.coeff),
                term_text(rng, &symbols, shape.coeff)
            ));
        } else {
            let args: Vec<String> = (0..*arity).map(|_| term_text(rng, &symbols, shape.coeff)).collect();
            atoms.push(format!("{name}({})", args.join(", ")));
        }
    }
    let vars: Vec<&String> = free.iter().chain(&bound).collect();
    let negated = shape.negation && rng.gen_bool(0.2);
    if shape.f_constraints && !negated && s.torus_dim() > 0 && !vars.is_empty() {
        let k = rng.gen_range(0..=2.min(vars.len()));
        for v in vars.choose_multiple(rng, k).collect::<Vec<_>>() {
            atoms.push(format!("f({v}) = {}", torus_text(rng, s.torus_dim(), 8)));
        }
    }
    let mut prefix = String::new();
    if negated {
        prefix.push_str("! ");
    }
    if k > 0 {
        if k > 1 && rng.gen_bool(0.3) {
            prefix.push_str(&format!("E {}. E {}. ", bound[0], bound[1..].join(", ")));
        } else {
            prefix.push_str(&format!("E {}. ", bound.join(", ")));
        }
    }
    format!("{prefix}{}", atoms.join(" & "))
}

pub fn parse_with(s: &Structure, text: &str, free: &[String]) -> Formula {
    parse(text, &s.signature().with_vars(free.to_vec())).unwrap_or_else(|e| panic!("{text}: {e}"))
}

pub fn names(prefix: &str, m: usize) -> Vec<String> {
    (1..=m).map(|i| format!("{prefix}{i}")).collect()
}

/// Random subgroup of `A^m` containing the relations, as a lattice in `Z^{mN}`.
pub fn random_subgroup(rng: &mut ChaCha8Rng, s: &Structure, m: usize, gens: std::ops::RangeInclusive<usize>, bound: i64) -> Lattice {
    let gens = rng.gen_range(gens);
    let n = s.rank();
    let mut rows: Vec<IntVec> = s.relations().power(m).basis().to_vec();
    rows.extend((0..gens).map(|_| random_vec(rng, m * n, bound)));
    Lattice::from_generators(m * n, rows).expect("dimensions agree")
}

pub fn coset(rep: IntVec, group: Lattice, m: usize) -> DefinableCoset {
    DefinableCoset::from_affine(m, rep.len() / m.max(1), AffineLattice::new(rep, group).expect("dimensions agree"))
        .expect("valid coset")
}

/// `X` plus covering cosets; when `designed`, the cosets of a finite-index
/// subgroup of `X`'s group (or some of them) are used.
pub fn cover_instance(
    rng: &mut ChaCha8Rng,
    s: &Structure,
    m: usize,
    designed: bool,
    reps_of: impl Fn(&DefinableCoset, &Lattice) -> Option<Vec<IntVec>>,
) -> (DefinableCoset, Vec<DefinableCoset>) {
    let dim = m * s.rank();
    let h = random_subgroup(rng, s, m, 0..=2, 4);
    let x = coset(random_vec(rng, dim, 6), h.clone(), m);
    let mut cosets = Vec::new();
    if designed {
        let l = random_subgroup(rng, s, m, 1..=3, 4);
        let k = h.intersect(&l).unwrap();
        if let Some(reps) = reps_of(&x, &k).filter(|r| r.len() <= 4) {
            for r in reps {
                let group = if rng.gen_bool(0.3) { k.sum(&random_subgroup(rng, s, m, 1..=1, 3)).unwrap() } else { k.clone() };
                cosets.push(coset(r, group, m));
            }
            if cosets.len() > 1 && rng.gen_bool(0.3) {
                cosets.remove(rng.gen_range(0..cosets.len()));
            }
        }
    }
    while cosets.is_empty() || (!designed && cosets.len() < rng.gen_range(1..=4)) {
        let g = random_subgroup(rng, s, m, 0..=2, 4);
        cosets.push(coset(random_vec(rng, dim, 6), g, m));
    }
    cosets.truncate(4);
    (x, cosets)
}

pub fn random_matrix(rng: &mut ChaCha8Rng, max_dim: usize, bound: i64) -> IntMatrix {
    let r = rng.gen_range(1..=max_dim);
    let c = rng.gen_range(1..=max_dim);
    let rows: Vec<IntVec> = (0..r).map(|_| random_vec(rng, c, bound)).collect();
    IntMatrix::from_rows(c, rows).expect("rectangular")
}
