//! Automorphisms of a finite structure that preserve every distinguished
//! subgroup and commute with `f`, and the orbits they induce on `A^m`.
//!
//! The group is found through a stabilizer chain on the cyclic generators
//! `g_0, ..., g_{r-1}` of `A`: level `i` collects automorphisms fixing
//! `g_0..g_{i-1}` that move `g_i` around its orbit.

use std::collections::{BTreeMap, VecDeque};

use num_bigint::BigUint;
use num_traits::One;

use crate::error::{Error, Result};
use crate::finite::{Elem, FiniteModel};

/// Default bound on `|A|` for orbit computations.
pub const DEFAULT_ORBIT_LIMIT: u64 = 64;

/// An automorphism, stored as the images of the cyclic generators.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Automorphism {
    images: Vec<Elem>,
}

impl Automorphism {
    pub fn identity(m: &FiniteModel) -> Self {
        Automorphism {
            images: (0..m.moduli().len()).map(|i| m.generator(i)).collect(),
        }
    }

    pub fn images(&self) -> &[Elem] {
        &self.images
    }

    pub fn apply(&self, m: &FiniteModel, e: Elem) -> Elem {
        m.coords(e)
            .iter()
            .zip(&self.images)
            .fold(0, |acc, (&c, &y)| m.add(acc, m.scale(y, c as i64)))
    }

    pub fn apply_tuple(&self, m: &FiniteModel, t: &[Elem]) -> Vec<Elem> {
        t.iter().map(|&e| self.apply(m, e)).collect()
    }

    /// `self ∘ other`.
    pub fn compose(&self, m: &FiniteModel, other: &Automorphism) -> Automorphism {
        Automorphism {
            images: other.images.iter().map(|&y| self.apply(m, y)).collect(),
        }
    }
}

struct Search<'a> {
    m: &'a FiniteModel,
    /// Per level, generator tuples of each predicate whose highest nonzero
    /// cyclic coordinate sits at that level.
    checks: Vec<Vec<(usize, Vec<Elem>)>>,
    /// Unary invariants every image of `g_i` must share with `g_i`.
    signature: Vec<Vec<bool>>,
}

impl<'a> Search<'a> {
    fn new(m: &'a FiniteModel) -> Self {
        let r = m.moduli().len();
        let mut checks = vec![Vec::new(); r];
        for (p, (_, table)) in m.predicates().iter().enumerate() {
            for g in &table.gens {
                let top = g
                    .iter()
                    .flat_map(|&e| m.coords(e).into_iter().enumerate().filter(|(_, c)| *c != 0).map(|(i, _)| i))
                    .max();
                if let Some(top) = top {
                    checks[top].push((p, g.clone()));
                }
            }
        }
        let unary: Vec<usize> = m
            .predicates()
            .iter()
            .enumerate()
            .filter(|(_, (_, t))| t.arity == 1)
            .map(|(i, _)| i)
            .collect();
        let signature = (0..m.size() as Elem)
            .map(|e| unary.iter().map(|&p| m.predicates()[p].1.members[e as usize]).collect())
            .collect();
        Search { m, checks, signature }
    }

    fn apply_partial(&self, images: &[Elem], e: Elem) -> Elem {
        self.m
            .coords(e)
            .iter()
            .zip(images)
            .fold(0, |acc, (&c, &y)| self.m.add(acc, self.m.scale(y, c as i64)))
    }

    fn candidate_ok(&self, level: usize, y: Elem) -> bool {
        let m = self.m;
        let g = m.generator(level);
        let order = m.moduli()[level];
        crate::finite::annihilated(m, y, order)
            && m.f_raw(y) == m.f_raw(g)
            && self.signature[y as usize] == self.signature[g as usize]
    }

    /// Subgroup generated by `span` and `y`, if adding `y` multiplies the
    /// order by exactly `order`.
    fn grow(&self, span: &[bool], size: usize, y: Elem, order: u64) -> Option<(Vec<bool>, usize)> {
        let m = self.m;
        let mut mult = y;
        for _ in 1..order {
            if span[mult as usize] {
                return None;
            }
            mult = m.add(mult, y);
        }
        let members: Vec<Elem> = (0..m.size() as Elem).filter(|&e| span[e as usize]).collect();
        let mut next = span.to_vec();
        let mut shift = y;
        for _ in 1..order {
            for &e in &members {
                next[m.add(e, shift) as usize] = true;
            }
            shift = m.add(shift, y);
        }
        Some((next, size * order as usize))
    }

    fn predicates_ok(&self, level: usize, images: &[Elem]) -> bool {
        self.checks[level].iter().all(|(p, g)| {
            let t: Vec<Elem> = g.iter().map(|&e| self.apply_partial(images, e)).collect();
            let table = &self.m.predicates()[*p].1;
            table.members[self.m.encode(&t)]
        })
    }

    /// Tries to place `y` as the image of `g_level`, updating the span.
    fn place(&self, level: usize, y: Elem, images: &mut Vec<Elem>, spans: &mut Vec<(Vec<bool>, usize)>) -> bool {
        if !self.candidate_ok(level, y) {
            return false;
        }
        let (span, size) = spans.last().unwrap();
        let Some(next) = self.grow(span, *size, y, self.m.moduli()[level]) else {
            return false;
        };
        images.push(y);
        if !self.predicates_ok(level, images) {
            images.pop();
            return false;
        }
        spans.push(next);
        true
    }

    fn complete(&self, images: &mut Vec<Elem>, spans: &mut Vec<(Vec<bool>, usize)>) -> bool {
        let level = images.len();
        if level == self.m.moduli().len() {
            return true;
        }
        for y in 0..self.m.size() as Elem {
            if self.place(level, y, images, spans) {
                if self.complete(images, spans) {
                    return true;
                }
                images.pop();
                spans.pop();
            }
        }
        false
    }

    /// An automorphism fixing `g_0..g_{level-1}` and sending `g_level` to `y`.
    fn find(&self, level: usize, y: Elem) -> Option<Automorphism> {
        let m = self.m;
        let mut span = vec![false; m.size()];
        span[0] = true;
        let mut spans = vec![(span, 1usize)];
        let mut images = Vec::new();
        for i in 0..level {
            let placed = self.place(i, m.generator(i), &mut images, &mut spans);
            debug_assert!(placed);
        }
        if !self.place(level, y, &mut images, &mut spans) {
            return None;
        }
        self.complete(&mut images, &mut spans).then_some(Automorphism { images })
    }
}

/// Generators of the automorphism group together with its order.
#[derive(Clone, Debug)]
pub struct AutGroup {
    generators: Vec<Automorphism>,
    order: BigUint,
}

impl AutGroup {
    pub fn new(m: &FiniteModel) -> AutGroup {
        let search = Search::new(m);
        let r = m.moduli().len();
        let mut generators: Vec<Automorphism> = Vec::new();
        let mut order = BigUint::one();
        for level in (0..r).rev() {
            let g = m.generator(level);
            let mut orbit = vec![false; m.size()];
            orbit[g as usize] = true;
            let mut members = vec![g];
            let mut excluded = vec![false; m.size()];
            loop {
                let mut i = 0;
                while i < members.len() {
                    let x = members[i];
                    for s in &generators {
                        let z = s.apply(m, x);
                        if !orbit[z as usize] {
                            orbit[z as usize] = true;
                            members.push(z);
                        }
                    }
                    i += 1;
                }
                let next = (0..m.size() as Elem)
                    .find(|&y| !orbit[y as usize] && !excluded[y as usize] && search.candidate_ok(level, y));
                let Some(y) = next else { break };
                match search.find(level, y) {
                    Some(sigma) => {
                        orbit[y as usize] = true;
                        members.push(y);
                        generators.push(sigma);
                    }
                    None => excluded[y as usize] = true,
                }
            }
            order *= BigUint::from(members.len());
        }
        AutGroup { generators, order }
    }

    pub fn generators(&self) -> &[Automorphism] {
        &self.generators
    }

    pub fn order(&self) -> &BigUint {
        &self.order
    }
}

/// Orbit data for `A^arity` under the automorphism group.
pub struct OrbitOracle {
    model: FiniteModel,
    group: AutGroup,
    labels: BTreeMap<usize, Vec<u32>>,
}

impl OrbitOracle {
    pub fn new(model: FiniteModel, limit: u64) -> Result<OrbitOracle> {
        if model.size() as u64 > limit {
            return Err(Error::SizeLimit {
                size: model.size() as u64,
                limit,
            });
        }
        let group = AutGroup::new(&model);
        Ok(OrbitOracle {
            model,
            group,
            labels: BTreeMap::new(),
        })
    }

    pub fn model(&self) -> &FiniteModel {
        &self.model
    }

    pub fn group(&self) -> &AutGroup {
        &self.group
    }

    /// Labels every tuple of `A^arity` by the least code in its orbit.
    fn labels(&mut self, arity: usize) -> &[u32] {
        let m = &self.model;
        let gens = &self.group.generators;
        self.labels.entry(arity).or_insert_with(|| {
            let total = m.size().pow(arity as u32);
            let mut label = vec![u32::MAX; total];
            for start in 0..total {
                if label[start] != u32::MAX {
                    continue;
                }
                label[start] = start as u32;
                let mut queue = vec![start];
                while let Some(c) = queue.pop() {
                    let t = m.decode(c, arity);
                    for s in gens {
                        let u = m.encode(&s.apply_tuple(m, &t));
                        if label[u] == u32::MAX {
                            label[u] = start as u32;
                            queue.push(u);
                        }
                    }
                }
            }
            label
        })
    }

    /// Orbit label of `t`; two tuples are automorphic iff labels agree.
    pub fn orbit_label(&mut self, t: &[Elem]) -> u32 {
        let code = self.model.encode(t);
        self.labels(t.len())[code]
    }

    pub fn same_orbit(&mut self, a: &[Elem], b: &[Elem]) -> bool {
        a.len() == b.len() && self.orbit_label(a) == self.orbit_label(b)
    }

    /// An automorphism sending `a` to `b`, if one exists.
    pub fn witness(&self, a: &[Elem], b: &[Elem]) -> Option<Automorphism> {
        let m = &self.model;
        if a.len() != b.len() {
            return None;
        }
        let mut seen: BTreeMap<Vec<Elem>, Automorphism> = BTreeMap::new();
        seen.insert(a.to_vec(), Automorphism::identity(m));
        let mut queue = VecDeque::from([a.to_vec()]);
        while let Some(t) = queue.pop_front() {
            let sigma = seen[&t].clone();
            if t == b {
                return Some(sigma);
            }
            for s in &self.group.generators {
                let u = s.apply_tuple(m, &t);
                if !seen.contains_key(&u) {
                    seen.insert(u.clone(), s.compose(m, &sigma));
                    queue.push_back(u);
                }
            }
        }
        None
    }
}

/// Whether some automorphism maps `a` to `b`.
pub fn orbit_oracle(model: &FiniteModel, a: &[Elem], b: &[Elem], limit: u64) -> Result<bool> {
    let mut oracle = OrbitOracle::new(model.clone(), limit)?;
    Ok(oracle.same_orbit(a, b))
}
