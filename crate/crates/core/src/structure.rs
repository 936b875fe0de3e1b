//! Finitely generated abelian groups `A = Z^N / relations` with named
//! distinguished subgroups, named parameters and a rational character
//! `f : A -> T^d`.
//!
//! File format (JSON):
//!
//! ```json
//! { "name": "z4f", "ambient_rank": 1, "relations": [[4]],
//!   "subgroups": { "P": { "arity": 1, "generators": [[2]] } },
//!   "character": { "torus_dim": 1, "matrix": [["1/4"]] },
//!   "parameters": { "a": [1] } }
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::formula::{Signature, EQ};
use crate::lattice::{snf, IntMatrix, IntVec, Lattice};
use crate::torus::{format_rational, parse_rational, TorusPoint};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Subgroup {
    pub arity: usize,
    /// Preimage in `Z^{arity * N}`; always contains `relations^{⊕arity}`.
    pub lattice: Lattice,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Structure {
    name: String,
    rank: usize,
    relations: Lattice,
    subgroups: BTreeMap<String, Subgroup>,
    torus_dim: usize,
    /// `torus_dim x rank`; column `j` is `f(e_j)`.
    character: Vec<Vec<BigRational>>,
    parameters: BTreeMap<String, IntVec>,
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn reserved(s: &str) -> bool {
    s == EQ || s == "E" || s == "f"
}

fn fmt_vec(v: &[BigInt]) -> String {
    let parts: Vec<String> = v.iter().map(|x| x.to_string()).collect();
    format!("({})", parts.join(","))
}

#[derive(Clone, Debug)]
pub struct StructureBuilder {
    name: String,
    rank: usize,
    relations: Vec<IntVec>,
    subgroups: Vec<(String, usize, Vec<IntVec>)>,
    torus_dim: usize,
    character: Vec<Vec<BigRational>>,
    parameters: Vec<(String, IntVec)>,
}

impl StructureBuilder {
    pub fn new(name: impl Into<String>, rank: usize) -> Self {
        StructureBuilder {
            name: name.into(),
            rank,
            relations: Vec::new(),
            subgroups: Vec::new(),
            torus_dim: 0,
            character: Vec::new(),
            parameters: Vec::new(),
        }
    }

    pub fn relation(mut self, row: IntVec) -> Self {
        self.relations.push(row);
        self
    }

    pub fn relations(mut self, rows: Vec<IntVec>) -> Self {
        self.relations.extend(rows);
        self
    }

    pub fn subgroup(mut self, name: impl Into<String>, arity: usize, gens: Vec<IntVec>) -> Self {
        self.subgroups.push((name.into(), arity, gens));
        self
    }

    /// `matrix` is `torus_dim x rank`.
    pub fn character(mut self, torus_dim: usize, matrix: Vec<Vec<BigRational>>) -> Self {
        self.torus_dim = torus_dim;
        self.character = matrix;
        self
    }

    pub fn parameter(mut self, name: impl Into<String>, value: IntVec) -> Self {
        self.parameters.push((name.into(), value));
        self
    }

    pub fn build(self) -> Result<Structure> {
        let n = self.rank;
        for (i, r) in self.relations.iter().enumerate() {
            if r.len() != n {
                return Err(Error::schema(
                    format!("$.relations[{i}]"),
                    format!("expected length {n}, found {}", r.len()),
                ));
            }
        }
        let relations = Lattice::from_generators(n, self.relations.clone())?;
        let mut subgroups = BTreeMap::new();
        for (name, arity, gens) in self.subgroups {
            let path = format!("$.subgroups.{name}");
            if !is_identifier(&name) || reserved(&name) {
                return Err(Error::schema(path, "invalid or reserved subgroup name"));
            }
            if arity == 0 {
                return Err(Error::schema(format!("{path}.arity"), "arity must be at least 1"));
            }
            let mut rows = Vec::new();
            for (i, g) in gens.into_iter().enumerate() {
                if g.len() != arity * n {
                    return Err(Error::schema(
                        format!("{path}.generators[{i}]"),
                        format!("expected length {} (arity {arity} x rank {n}), found {}", arity * n, g.len()),
                    ));
                }
                rows.push(g);
            }
            rows.extend(relations.power(arity).basis().iter().cloned());
            let lattice = Lattice::from_generators(arity * n, rows)?;
            if subgroups.insert(name.clone(), Subgroup { arity, lattice }).is_some() {
                return Err(Error::schema(path, "duplicate subgroup name"));
            }
        }
        if self.character.len() != self.torus_dim {
            return Err(Error::schema(
                "$.character.matrix",
                format!("expected {} rows, found {}", self.torus_dim, self.character.len()),
            ));
        }
        let mut character = Vec::with_capacity(self.torus_dim);
        for (i, row) in self.character.iter().enumerate() {
            if row.len() != n {
                return Err(Error::schema(
                    format!("$.character.matrix[{i}]"),
                    format!("expected length {n}, found {}", row.len()),
                ));
            }
            character.push(row.iter().map(crate::torus::frac).collect::<Vec<_>>());
        }
        for r in &self.relations {
            let image: Vec<BigRational> = character
                .iter()
                .map(|row| {
                    row.iter()
                        .zip(r)
                        .map(|(c, x)| c * BigRational::from_integer(x.clone()))
                        .fold(BigRational::zero(), |a, b| a + b)
                })
                .collect();
            if let Some(bad) = image.iter().find(|q| !q.is_integer()) {
                let shown: Vec<String> = image.iter().map(format_rational).collect();
                return Err(Error::schema(
                    "$.character.matrix",
                    format!(
                        "character is not well defined on A: F·{} = ({}) has non-integer entry {}",
                        fmt_vec(r),
                        shown.join(", "),
                        format_rational(bad)
                    ),
                ));
            }
        }
        let mut parameters = BTreeMap::new();
        for (name, v) in self.parameters {
            let path = format!("$.parameters.{name}");
            if !is_identifier(&name) || reserved(&name) || subgroups.contains_key(&name) {
                return Err(Error::schema(path, "invalid or reserved parameter name"));
            }
            if v.len() != n {
                return Err(Error::schema(path, format!("expected length {n}, found {}", v.len())));
            }
            let v = relations.reduce(&v);
            if parameters.insert(name, v).is_some() {
                return Err(Error::schema(path, "duplicate parameter name"));
            }
        }
        Ok(Structure {
            name: self.name,
            rank: n,
            relations,
            subgroups,
            torus_dim: self.torus_dim,
            character,
            parameters,
        })
    }
}

struct Walk<'a> {
    value: &'a Value,
    path: String,
}

impl<'a> Walk<'a> {
    fn root(value: &'a Value) -> Self {
        Walk {
            value,
            path: "$".into(),
        }
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T> {
        Err(Error::schema(self.path.clone(), msg))
    }

    fn object(&self, allowed: &[&str]) -> Result<&'a Map<String, Value>> {
        let Some(obj) = self.value.as_object() else {
            return self.err("expected object");
        };
        if !allowed.is_empty() {
            if let Some(k) = obj.keys().find(|k| !allowed.contains(&k.as_str())) {
                return Err(Error::schema(format!("{}.{k}", self.path), "unknown field"));
            }
        }
        Ok(obj)
    }

    fn field(&self, key: &str) -> Result<Walk<'a>> {
        match self.value.get(key) {
            Some(v) => Ok(Walk {
                value: v,
                path: format!("{}.{key}", self.path),
            }),
            None => self.err(format!("missing field '{key}'")),
        }
    }

    fn opt_field(&self, key: &str) -> Option<Walk<'a>> {
        self.value.get(key).map(|v| Walk {
            value: v,
            path: format!("{}.{key}", self.path),
        })
    }

    fn items(&self) -> Result<Vec<Walk<'a>>> {
        let Some(arr) = self.value.as_array() else {
            return self.err("expected array");
        };
        Ok(arr
            .iter()
            .enumerate()
            .map(|(i, v)| Walk {
                value: v,
                path: format!("{}[{i}]", self.path),
            })
            .collect())
    }

    fn usize(&self) -> Result<usize> {
        match self.value.as_u64() {
            Some(v) => Ok(v as usize),
            None => self.err("expected non-negative integer"),
        }
    }

    fn string(&self) -> Result<&'a str> {
        match self.value.as_str() {
            Some(s) => Ok(s),
            None => self.err("expected string"),
        }
    }

    fn int_vec(&self) -> Result<IntVec> {
        self.items()?
            .iter()
            .map(|w| match w.value.as_i64() {
                Some(v) => Ok(BigInt::from(v)),
                None => w.err("expected integer"),
            })
            .collect()
    }

    fn rational(&self) -> Result<BigRational> {
        let s = self.string()?;
        parse_rational(s).or_else(|m| self.err(m))
    }
}

impl Structure {
    pub fn from_json(value: &Value) -> Result<Structure> {
        let root = Walk::root(value);
        root.object(&["name", "ambient_rank", "relations", "subgroups", "character", "parameters"])?;
        let name = root.field("name")?.string()?.to_string();
        let rank = root.field("ambient_rank")?.usize()?;
        let mut b = StructureBuilder::new(name, rank);
        for w in root.field("relations")?.items()? {
            let row = w.int_vec()?;
            if row.len() != rank {
                return w.err(format!("expected length {rank}, found {}", row.len()));
            }
            b = b.relation(row);
        }
        if let Some(sg) = root.opt_field("subgroups") {
            for (k, _) in sg.object(&[])? {
                let w = sg.field(k)?;
                w.object(&["arity", "generators"])?;
                let arity = w.field("arity")?.usize()?;
                let mut gens = Vec::new();
                for g in w.field("generators")?.items()? {
                    let v = g.int_vec()?;
                    if v.len() != arity * rank {
                        return g.err(format!(
                            "expected length {} (arity {arity} x rank {rank}), found {}",
                            arity * rank,
                            v.len()
                        ));
                    }
                    gens.push(v);
                }
                b = b.subgroup(k.clone(), arity, gens);
            }
        }
        if let Some(ch) = root.opt_field("character") {
            ch.object(&["torus_dim", "matrix"])?;
            let d = ch.field("torus_dim")?.usize()?;
            let rows = ch.field("matrix")?.items()?;
            if rows.len() != d {
                return ch
                    .field("matrix")?
                    .err(format!("expected {d} rows, found {}", rows.len()));
            }
            let mut matrix = Vec::with_capacity(d);
            for r in rows {
                let entries = r.items()?;
                if entries.len() != rank {
                    return r.err(format!("expected length {rank}, found {}", entries.len()));
                }
                matrix.push(entries.iter().map(Walk::rational).collect::<Result<Vec<_>>>()?);
            }
            b = b.character(d, matrix);
        }
        if let Some(ps) = root.opt_field("parameters") {
            for (k, _) in ps.object(&[])? {
                let w = ps.field(k)?;
                let v = w.int_vec()?;
                if v.len() != rank {
                    return w.err(format!("expected length {rank}, found {}", v.len()));
                }
                b = b.parameter(k.clone(), v);
            }
        }
        b.build()
    }

    pub fn from_json_str(text: &str) -> Result<Structure> {
        let value: Value = serde_json::from_str(text).map_err(|e| {
            Error::schema("$", format!("invalid JSON at line {} column {}: {e}", e.line(), e.column()))
        })?;
        Structure::from_json(&value)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Structure> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::schema("$", format!("cannot read {}: {e}", path.display())))?;
        Structure::from_json_str(&text)
    }

    pub fn to_json(&self) -> Value {
        let subgroups: Map<String, Value> = self
            .subgroups
            .iter()
            .map(|(k, s)| {
                let gens: Vec<Vec<String>> = s
                    .lattice
                    .basis()
                    .iter()
                    .map(|r| r.iter().map(|x| x.to_string()).collect())
                    .collect();
                let gens: Vec<Value> = gens
                    .into_iter()
                    .map(|r| Value::Array(r.into_iter().map(|x| Value::Number(x.parse().unwrap())).collect()))
                    .collect();
                (k.clone(), json!({ "arity": s.arity, "generators": gens }))
            })
            .collect();
        let ints = |v: &[BigInt]| -> Value {
            Value::Array(v.iter().map(|x| Value::Number(x.to_string().parse().unwrap())).collect())
        };
        json!({
            "name": self.name,
            "ambient_rank": self.rank,
            "relations": self.relations.basis().iter().map(|r| ints(r)).collect::<Vec<_>>(),
            "subgroups": subgroups,
            "character": {
                "torus_dim": self.torus_dim,
                "matrix": self.character.iter()
                    .map(|r| r.iter().map(format_rational).collect::<Vec<_>>())
                    .collect::<Vec<_>>(),
            },
            "parameters": self.parameters.iter()
                .map(|(k, v)| (k.clone(), ints(v)))
                .collect::<Map<String, Value>>(),
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// `N`, the number of generators.
    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn relations(&self) -> &Lattice {
        &self.relations
    }

    pub fn subgroups(&self) -> &BTreeMap<String, Subgroup> {
        &self.subgroups
    }

    pub fn torus_dim(&self) -> usize {
        self.torus_dim
    }

    pub fn character(&self) -> &[Vec<BigRational>] {
        &self.character
    }

    pub fn parameters(&self) -> &BTreeMap<String, IntVec> {
        &self.parameters
    }

    pub fn is_finite(&self) -> bool {
        self.relations.is_full_rank()
    }

    /// `|A|`, when finite.
    pub fn order(&self) -> Option<BigInt> {
        self.relations.covolume().finite().cloned()
    }

    /// Invariant factors of `A` (entries > 1), followed by a `0` for every
    /// free cyclic summand.
    pub fn invariant_factors(&self) -> Vec<BigInt> {
        let s = snf(&self.relations.basis_matrix());
        let mut out: Vec<BigInt> = s.invariant_factors().into_iter().filter(|d| !d.is_one()).collect();
        out.extend(std::iter::repeat(BigInt::zero()).take(self.rank - self.relations.rank()));
        out
    }

    /// The lattice defining predicate `name` (`Eq` is the zero subgroup of `A`).
    pub fn predicate(&self, name: &str) -> Option<(usize, &Lattice)> {
        if name == EQ {
            return Some((1, &self.relations));
        }
        self.subgroups.get(name).map(|s| (s.arity, &s.lattice))
    }

    pub fn signature(&self) -> Signature {
        Signature::new(
            self.subgroups.iter().map(|(k, s)| (k.clone(), s.arity)),
            self.parameters.keys().cloned(),
            self.torus_dim,
        )
    }

    /// Canonical representative of `v` modulo the relations.
    pub fn reduce(&self, v: &[BigInt]) -> IntVec {
        self.relations.reduce(v)
    }

    pub fn check_element(&self, v: &[BigInt]) -> Result<()> {
        if v.len() != self.rank {
            return Err(Error::dims(self.rank, v.len()));
        }
        Ok(())
    }

    /// Denominator common to every character entry.
    pub fn character_denominator(&self) -> BigInt {
        self.character
            .iter()
            .flatten()
            .fold(BigInt::one(), |acc, q| acc.lcm(q.denom()))
    }

    /// `F` scaled by [`Self::character_denominator`], as an integer matrix.
    pub fn scaled_character(&self) -> IntMatrix {
        let q = BigRational::from_integer(self.character_denominator());
        let rows = self
            .character
            .iter()
            .map(|r| r.iter().map(|c| (c * &q).to_integer()).collect())
            .collect();
        IntMatrix::from_rows(self.rank, rows).expect("character rows have rank entries")
    }

    pub fn f(&self, v: &[BigInt]) -> TorusPoint {
        TorusPoint::new(
            self.character
                .iter()
                .map(|row| {
                    row.iter()
                        .zip(v)
                        .map(|(c, x)| c * BigRational::from_integer(x.clone()))
                        .fold(BigRational::zero(), |a, b| a + b)
                })
                .collect(),
        )
    }

    /// `f` applied blockwise to a vector in `Z^{m N}`.
    pub fn f_blocks(&self, v: &[BigInt]) -> TorusPoint {
        let parts: Vec<TorusPoint> = v.chunks(self.rank.max(1)).map(|c| self.f(c)).collect();
        if self.rank == 0 {
            return TorusPoint::zero(0);
        }
        TorusPoint::concat(&parts)
    }
}
