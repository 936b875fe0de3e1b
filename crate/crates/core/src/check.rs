//! Cross-validation of fingerprint equality against automorphic equivalence.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::finite::{to_vectors, Elem, FiniteModel};
use crate::orbit::OrbitOracle;
use crate::structure::Structure;
use crate::types::{basis_generate, fingerprint, Caps, Fingerprint, FormulaBasis, TypeClasses, CLASS_LIMIT};

/// Below this many tuples every pair is compared.
pub const EXHAUSTIVE_LIMIT: usize = 4096;
/// Mismatches listed in a report.
pub const REPORT_LIMIT: usize = 100;
/// Highest bound-variable cap tried by [`fixpoint_caps`].
pub const MAX_BOUND_VARS: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
    BasisIncomplete,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::BasisIncomplete => "BASIS_INCOMPLETE",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mismatch {
    pub a: Vec<Elem>,
    pub b: Vec<Elem>,
    pub fingerprint_equal: bool,
    pub orbit_equal: bool,
}

#[derive(Clone, Debug)]
pub struct CheckReport {
    pub structure: String,
    pub arity: usize,
    pub caps: Caps,
    pub pairs_checked: u64,
    pub soundness_failures: u64,
    pub completeness_failures: u64,
    pub mismatches: Vec<Mismatch>,
    pub verdict: Verdict,
    vectors: Vec<(Vec<String>, Vec<String>)>,
}

fn caps_json(c: &Caps) -> Value {
    json!({ "bound_vars": c.bound_vars, "atoms": c.atoms, "coeff": c.coeff })
}

impl CheckReport {
    pub fn to_json(&self) -> Value {
        let mismatches: Vec<Value> = self
            .mismatches
            .iter()
            .zip(&self.vectors)
            .map(|(m, (a, b))| {
                json!({
                    "a": a,
                    "b": b,
                    "fingerprint_equal": m.fingerprint_equal,
                    "orbit_equal": m.orbit_equal,
                })
            })
            .collect();
        let mut out = json!({
            "structure": self.structure,
            "arity": self.arity,
            "caps": caps_json(&self.caps),
            "pairs_checked": self.pairs_checked,
            "mismatches": mismatches,
            "verdict": self.verdict.as_str(),
        });
        if self.verdict == Verdict::BasisIncomplete {
            out["suggested_caps"] = caps_json(&self.caps.escalate());
        }
        out
    }
}

#[derive(Clone, Copy, Debug)]
pub struct CheckOptions {
    pub arity: usize,
    pub caps: Caps,
    pub trials: u64,
    pub seed: u64,
    pub orbit_limit: u64,
}

enum Types<'a> {
    Table(TypeClasses),
    Direct(&'a Structure, FormulaBasis, HashMap<Vec<Elem>, Fingerprint>),
}

impl Types<'_> {
    fn same(&mut self, model: &FiniteModel, a: &[Elem], b: &[Elem]) -> Result<bool> {
        match self {
            Types::Table(t) => Ok(t.same(model, a, b)),
            Types::Direct(s, basis, cache) => {
                let mut get = |t: &[Elem]| -> Result<Fingerprint> {
                    if let Some(f) = cache.get(t) {
                        return Ok(f.clone());
                    }
                    let f = fingerprint(s, &to_vectors(model, t), basis)?;
                    cache.insert(t.to_vec(), f.clone());
                    Ok(f)
                };
                Ok(get(a)? == get(b)?)
            }
        }
    }
}

fn tuple_strings(model: &FiniteModel, t: &[Elem]) -> Vec<String> {
    t.iter()
        .map(|&e| {
            let v: Vec<String> = model.vector(e).iter().map(|x| x.to_string()).collect();
            v.join(",")
        })
        .collect()
}

pub fn check_theorem(s: &Structure, opts: &CheckOptions) -> Result<CheckReport> {
    let model = FiniteModel::new(s)?;
    let mut oracle = OrbitOracle::new(model.clone(), opts.orbit_limit)?;
    let m = opts.arity;
    let basis = basis_generate(s, m, opts.caps)?;
    let total = model.size().checked_pow(m as u32).unwrap_or(usize::MAX);
    let tabulate = total <= CLASS_LIMIT;
    let mut types = if tabulate {
        Types::Table(TypeClasses::new(&model, s, &basis)?)
    } else {
        Types::Direct(s, basis, HashMap::new())
    };
    let mut pairs = 0u64;
    let mut soundness = 0u64;
    let mut completeness = 0u64;
    let mut mismatches = Vec::new();
    let mut compare = |a: &[Elem], b: &[Elem], types: &mut Types, oracle: &mut OrbitOracle| -> Result<()> {
        pairs += 1;
        let fp = types.same(&model, a, b)?;
        let orb = if tabulate {
            oracle.same_orbit(a, b)
        } else {
            oracle.witness(a, b).is_some()
        };
        if fp != orb {
            if orb {
                soundness += 1;
            } else {
                completeness += 1;
            }
            if mismatches.len() < REPORT_LIMIT {
                mismatches.push(Mismatch {
                    a: a.to_vec(),
                    b: b.to_vec(),
                    fingerprint_equal: fp,
                    orbit_equal: orb,
                });
            }
        }
        Ok(())
    };
    if total <= EXHAUSTIVE_LIMIT {
        let tuples: Vec<Vec<Elem>> = model.tuples(m).collect();
        for i in 0..tuples.len() {
            for j in i + 1..tuples.len() {
                compare(&tuples[i], &tuples[j], &mut types, &mut oracle)?;
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let gens = oracle.group().generators().to_vec();
    for _ in 0..opts.trials {
        let a: Vec<Elem> = (0..m).map(|_| rng.gen_range(0..model.size() as Elem)).collect();
        let b: Vec<Elem> = if gens.is_empty() || rng.gen_bool(0.5) {
            (0..m).map(|_| rng.gen_range(0..model.size() as Elem)).collect()
        } else {
            let mut t = a.clone();
            for _ in 0..rng.gen_range(1..=8) {
                t = gens[rng.gen_range(0..gens.len())].apply_tuple(&model, &t);
            }
            t
        };
        compare(&a, &b, &mut types, &mut oracle)?;
    }
    let verdict = if soundness > 0 {
        Verdict::Fail
    } else if completeness > 0 {
        Verdict::BasisIncomplete
    } else {
        Verdict::Pass
    };
    let vectors = mismatches
        .iter()
        .map(|mm: &Mismatch| (tuple_strings(&model, &mm.a), tuple_strings(&model, &mm.b)))
        .collect();
    Ok(CheckReport {
        structure: s.name().to_string(),
        arity: m,
        caps: opts.caps,
        pairs_checked: pairs,
        soundness_failures: soundness,
        completeness_failures: completeness,
        mismatches,
        verdict,
        vectors,
    })
}

fn same_partition(a: &[u32], b: &[u32]) -> bool {
    let mut fwd: HashMap<u32, u32> = HashMap::new();
    let mut back: HashMap<u32, u32> = HashMap::new();
    a.iter()
        .zip(b)
        .all(|(&x, &y)| *fwd.entry(x).or_insert(y) == y && *back.entry(y).or_insert(x) == x)
}

/// Escalates caps from `start` until the fingerprint partition of `A^m`
/// no longer changes between consecutive caps.
pub fn fixpoint_caps(s: &Structure, m: usize, start: Caps) -> Result<Caps> {
    let model = FiniteModel::new(s)?;
    let mut caps = start;
    let mut current = TypeClasses::new(&model, s, &basis_generate(s, m, caps)?)?;
    loop {
        let next_caps = caps.escalate();
        if next_caps.bound_vars > MAX_BOUND_VARS {
            return Err(Error::BasisIncomplete(format!(
                "no fixpoint reached below {} bound variables",
                MAX_BOUND_VARS + 1
            )));
        }
        let next = TypeClasses::new(&model, s, &basis_generate(s, m, next_caps)?)?;
        if same_partition(current.classes(), next.classes()) {
            return Ok(caps);
        }
        caps = next_caps;
        current = next;
    }
}
