//! Rational points of the torus `T^m = R^m / Z^m` and its closed subgroups.
//!
//! A closed subgroup is stored only through its annihilator: the lattice of
//! integer characters `λ ∈ Z^m` with `λ·x ∈ Z` on the whole subgroup. The
//! subgroup itself is recovered as `{x : λ·x ∈ Z for every basis row λ}`.
//! Intersections of subgroups become sums of annihilators.

use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::{Arc, OnceLock};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::lattice::{solve, snf, IntMatrix, IntVec, Lattice, Snf};

/// Fractional part, in `[0, 1)`.
pub fn frac(q: &BigRational) -> BigRational {
    q - q.floor()
}

fn dot_q(a: &[BigInt], x: &[BigRational]) -> BigRational {
    a.iter()
        .zip(x)
        .filter(|(c, _)| !c.is_zero())
        .map(|(c, v)| v * BigRational::from_integer(c.clone()))
        .fold(BigRational::zero(), |acc, t| acc + t)
}

/// Parses `p/q` or a bare integer `p`.
pub fn parse_rational(s: &str) -> std::result::Result<BigRational, String> {
    let s = s.trim();
    let (num, den) = match s.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (s, "1"),
    };
    let num: BigInt = num.parse().map_err(|_| format!("malformed rational '{s}'"))?;
    let den: BigInt = den.parse().map_err(|_| format!("malformed rational '{s}'"))?;
    if den.is_zero() {
        return Err(format!("zero denominator in '{s}'"));
    }
    Ok(BigRational::new(num, den))
}

/// Serialized as `p/q` with `q > 0` and `gcd(p, q) = 1`.
pub fn format_rational(q: &BigRational) -> String {
    format!("{}/{}", q.numer(), q.denom())
}

/// A point of `T^m` with rational coordinates, each reduced into `[0, 1)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TorusPoint {
    coords: Vec<BigRational>,
}

impl TorusPoint {
    pub fn new(coords: Vec<BigRational>) -> Self {
        TorusPoint {
            coords: coords.iter().map(frac).collect(),
        }
    }

    pub fn zero(dim: usize) -> Self {
        TorusPoint {
            coords: vec![BigRational::zero(); dim],
        }
    }

    pub fn from_ratios(pairs: &[(i64, i64)]) -> Self {
        Self::new(
            pairs
                .iter()
                .map(|&(p, q)| BigRational::new(p.into(), q.into()))
                .collect(),
        )
    }

    pub fn parse_strings(items: &[String]) -> std::result::Result<Self, String> {
        Ok(Self::new(
            items
                .iter()
                .map(|s| parse_rational(s))
                .collect::<std::result::Result<_, _>>()?,
        ))
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[BigRational] {
        &self.coords
    }

    pub fn is_zero(&self) -> bool {
        self.coords.iter().all(Zero::is_zero)
    }

    pub fn add(&self, other: &TorusPoint) -> TorusPoint {
        TorusPoint::new(self.coords.iter().zip(&other.coords).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &TorusPoint) -> TorusPoint {
        TorusPoint::new(self.coords.iter().zip(&other.coords).map(|(a, b)| a - b).collect())
    }

    pub fn scale(&self, k: &BigInt) -> TorusPoint {
        let k = BigRational::from_integer(k.clone());
        TorusPoint::new(self.coords.iter().map(|a| a * &k).collect())
    }

    pub fn concat(parts: &[TorusPoint]) -> TorusPoint {
        TorusPoint {
            coords: parts.iter().flat_map(|p| p.coords.iter().cloned()).collect(),
        }
    }

    pub fn slice(&self, range: std::ops::Range<usize>) -> TorusPoint {
        TorusPoint {
            coords: self.coords[range].to_vec(),
        }
    }

    /// Lowest common denominator of the coordinates.
    pub fn denominator(&self) -> BigInt {
        self.coords
            .iter()
            .fold(BigInt::one(), |acc, c| acc.lcm(c.denom()))
    }

    pub fn to_strings(&self) -> Vec<String> {
        self.coords.iter().map(format_rational).collect()
    }

    /// Max over coordinates of the circle distance `min(t, 1 - t)`.
    pub fn distance(&self, other: &TorusPoint) -> BigRational {
        let one = BigRational::one();
        self.sub(other)
            .coords
            .into_iter()
            .map(|t| {
                let u = &one - &t;
                if t < u {
                    t
                } else {
                    u
                }
            })
            .max()
            .unwrap_or_else(BigRational::zero)
    }
}

impl fmt::Display for TorusPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn one(q: &BigRational) -> String {
            if q.is_zero() {
                "0".to_string()
            } else {
                format_rational(q)
            }
        }
        if self.coords.len() == 1 {
            write!(f, "{}", one(&self.coords[0]))
        } else {
            let parts: Vec<String> = self.coords.iter().map(one).collect();
            write!(f, "({})", parts.join(", "))
        }
    }
}

/// Closed subgroup of `T^m`, encoded by its annihilator lattice in `Z^m`.
#[derive(Clone)]
pub struct ClosedTorusSubgroup {
    annihilator: Lattice,
    smith: Arc<OnceLock<Snf>>,
}

impl PartialEq for ClosedTorusSubgroup {
    fn eq(&self, other: &Self) -> bool {
        self.annihilator == other.annihilator
    }
}

impl Eq for ClosedTorusSubgroup {}

impl Hash for ClosedTorusSubgroup {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.annihilator.hash(state)
    }
}

impl fmt::Debug for ClosedTorusSubgroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ClosedTorusSubgroup")
            .field("annihilator", &self.annihilator)
            .finish()
    }
}

impl ClosedTorusSubgroup {
    pub fn from_annihilator(annihilator: Lattice) -> Self {
        ClosedTorusSubgroup {
            annihilator,
            smith: Arc::new(OnceLock::new()),
        }
    }

    /// The subgroup `{0}`.
    pub fn trivial(dim: usize) -> Self {
        Self::from_annihilator(Lattice::full(dim))
    }

    /// All of `T^m`.
    pub fn whole(dim: usize) -> Self {
        Self::from_annihilator(Lattice::zero(dim))
    }

    pub fn dim(&self) -> usize {
        self.annihilator.dim()
    }

    pub fn annihilator(&self) -> &Lattice {
        &self.annihilator
    }

    fn smith(&self) -> &Snf {
        self.smith.get_or_init(|| snf(&self.annihilator.basis_matrix()))
    }

    pub fn contains(&self, x: &TorusPoint) -> bool {
        x.dim() == self.dim()
            && self
                .annihilator
                .basis()
                .iter()
                .all(|l| dot_q(l, x.coords()).is_integer())
    }

    /// Number of elements; `None` when the subgroup has positive dimension.
    pub fn order(&self) -> Option<BigInt> {
        self.annihilator.covolume().finite().cloned()
    }

    pub fn intersect(&self, other: &ClosedTorusSubgroup) -> Result<ClosedTorusSubgroup> {
        Ok(Self::from_annihilator(self.annihilator.sum(&other.annihilator)?))
    }

    /// Images of the annihilator basis rows at `x`, reduced mod 1: a complete
    /// invariant of the coset `x + self`.
    fn residues(&self, x: &TorusPoint) -> Vec<BigRational> {
        self.annihilator
            .basis()
            .iter()
            .map(|l| frac(&dot_q(l, x.coords())))
            .collect()
    }

    // Point x with (basis · x) ≡ targets (mod 1); a function of the residues only.
    fn point_with_residues(&self, targets: &[BigRational]) -> TorusPoint {
        let m = self.dim();
        let s = self.smith();
        let r = self.annihilator.rank();
        let ub: Vec<BigRational> = (0..r).map(|i| dot_q(s.u.row(i), targets)).collect();
        let mut y = vec![BigRational::zero(); m];
        for (i, yi) in y.iter_mut().enumerate().take(r) {
            *yi = &ub[i] / BigRational::from_integer(s.d[(i, i)].clone());
        }
        let x: Vec<BigRational> = (0..m).map(|i| dot_q(s.v.row(i), &y)).collect();
        TorusPoint::new(x)
    }

    /// Canonical representative of `x + self`.
    pub fn canonical_rep(&self, x: &TorusPoint) -> TorusPoint {
        if self.annihilator.rank() == 0 {
            return TorusPoint::zero(self.dim());
        }
        self.point_with_residues(&self.residues(x))
    }
}

/// A coset of a closed subgroup of `T^m`, or the empty set.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum TorusCoset {
    Empty { dim: usize },
    Coset {
        rep: TorusPoint,
        group: ClosedTorusSubgroup,
    },
}

impl TorusCoset {
    pub fn new(rep: TorusPoint, group: ClosedTorusSubgroup) -> Result<Self> {
        if rep.dim() != group.dim() {
            return Err(Error::dims(group.dim(), rep.dim()));
        }
        let rep = group.canonical_rep(&rep);
        Ok(TorusCoset::Coset { rep, group })
    }

    /// The singleton `{p}`.
    pub fn point(p: TorusPoint) -> Self {
        let group = ClosedTorusSubgroup::trivial(p.dim());
        TorusCoset::Coset { rep: p, group }
    }

    pub fn subgroup(group: ClosedTorusSubgroup) -> Self {
        TorusCoset::Coset {
            rep: TorusPoint::zero(group.dim()),
            group,
        }
    }

    pub fn empty(dim: usize) -> Self {
        TorusCoset::Empty { dim }
    }

    pub fn dim(&self) -> usize {
        match self {
            TorusCoset::Empty { dim } => *dim,
            TorusCoset::Coset { group, .. } => group.dim(),
        }
    }

    pub fn is_empty(&self) -> bool {
        matches!(self, TorusCoset::Empty { .. })
    }

    pub fn rep(&self) -> Option<&TorusPoint> {
        match self {
            TorusCoset::Empty { .. } => None,
            TorusCoset::Coset { rep, .. } => Some(rep),
        }
    }

    pub fn group(&self) -> Option<&ClosedTorusSubgroup> {
        match self {
            TorusCoset::Empty { .. } => None,
            TorusCoset::Coset { group, .. } => Some(group),
        }
    }

    /// `self ⊆ other` as sets.
    pub fn is_subset_of(&self, other: &TorusCoset) -> Result<bool> {
        match self {
            TorusCoset::Empty { .. } => Ok(true),
            TorusCoset::Coset { .. } => Ok(&coset_intersect(self, other)? == self),
        }
    }
}

impl fmt::Display for TorusCoset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TorusCoset::Empty { .. } => write!(f, "EMPTY"),
            TorusCoset::Coset { rep, group } => write!(f, "{} + ann {}", rep, group.annihilator()),
        }
    }
}

/// Smallest closed subgroup of `T^m` containing every generator.
pub fn closure_of(gens: &[TorusPoint], dim: usize) -> Result<ClosedTorusSubgroup> {
    let mut rows = Vec::with_capacity(gens.len());
    let mut moduli = Vec::with_capacity(gens.len());
    for g in gens {
        if g.dim() != dim {
            return Err(Error::dims(dim, g.dim()));
        }
        let q = g.denominator();
        if q.is_one() {
            continue;
        }
        let qr = BigRational::from_integer(q.clone());
        let row: IntVec = g.coords().iter().map(|c| (c * &qr).to_integer()).collect();
        rows.push(row);
        moduli.push(Lattice::scalar(1, &q));
    }
    if rows.is_empty() {
        return Ok(ClosedTorusSubgroup::trivial(dim));
    }
    // χ·a_i ≡ 0 (mod q_i) for each generator a_i / q_i.
    let map = IntMatrix::from_rows(dim, rows)?;
    let parts: Vec<&Lattice> = moduli.iter().collect();
    let target = Lattice::direct_sum(&parts);
    let zero = vec![BigInt::zero(); map.rows()];
    let sol = solve(&map, &target, &zero)?.expect("zero is always a solution");
    Ok(ClosedTorusSubgroup::from_annihilator(sol.lattice().clone()))
}

pub fn member(x: &TorusPoint, c: &TorusCoset) -> Result<bool> {
    if x.dim() != c.dim() {
        return Err(Error::dims(c.dim(), x.dim()));
    }
    Ok(match c {
        TorusCoset::Empty { .. } => false,
        TorusCoset::Coset { rep, group } => group.contains(&x.sub(rep)),
    })
}

/// Solves `rows · x ≡ targets (mod 1)` for a rational point `x`, if any.
fn solve_mod_one(dim: usize, rows: &[IntVec], targets: &[BigRational]) -> Result<Option<TorusPoint>> {
    if rows.is_empty() {
        return Ok(Some(TorusPoint::zero(dim)));
    }
    let m = IntMatrix::from_rows(dim, rows.to_vec())?;
    let s = snf(&m);
    let r = s.invariant_factors().len();
    let ub: Vec<BigRational> = (0..rows.len()).map(|i| dot_q(s.u.row(i), targets)).collect();
    if ub[r..].iter().any(|q| !q.is_integer()) {
        return Ok(None);
    }
    let mut y = vec![BigRational::zero(); dim];
    for i in 0..r {
        y[i] = &ub[i] / BigRational::from_integer(s.d[(i, i)].clone());
    }
    let x = (0..dim).map(|i| dot_q(s.v.row(i), &y)).collect();
    Ok(Some(TorusPoint::new(x)))
}

pub fn coset_intersect(c1: &TorusCoset, c2: &TorusCoset) -> Result<TorusCoset> {
    if c1.dim() != c2.dim() {
        return Err(Error::dims(c1.dim(), c2.dim()));
    }
    let dim = c1.dim();
    let (TorusCoset::Coset { rep: r1, group: g1 }, TorusCoset::Coset { rep: r2, group: g2 }) = (c1, c2)
    else {
        return Ok(TorusCoset::empty(dim));
    };
    if g1 == g2 {
        return Ok(if r1 == r2 { c1.clone() } else { TorusCoset::empty(dim) });
    }
    let group = g1.intersect(g2)?;
    let mut rows = Vec::new();
    let mut targets = Vec::new();
    for (g, r) in [(g1, r1), (g2, r2)] {
        for l in g.annihilator().basis() {
            targets.push(dot_q(l, r.coords()));
            rows.push(l.clone());
        }
    }
    match solve_mod_one(dim, &rows, &targets)? {
        Some(x) => TorusCoset::new(x, group),
        None => Ok(TorusCoset::empty(dim)),
    }
}

// Feasibility of { w : a·w ≤ b } by Fourier–Motzkin elimination.
fn fm_feasible(mut ineqs: Vec<(Vec<BigRational>, BigRational)>, vars: usize) -> bool {
    for v in (0..vars).rev() {
        let mut pos = Vec::new();
        let mut neg = Vec::new();
        let mut keep = Vec::new();
        for (a, b) in ineqs {
            if a[v].is_positive() {
                pos.push((a, b));
            } else if a[v].is_negative() {
                neg.push((a, b));
            } else {
                keep.push((a, b));
            }
        }
        for (ap, bp) in &pos {
            for (an, bn) in &neg {
                let sp = -&an[v];
                let sn = ap[v].clone();
                let a: Vec<BigRational> = ap.iter().zip(an).map(|(x, y)| x * &sp + y * &sn).collect();
                let b = bp * &sp + bn * &sn;
                keep.push((a, b));
            }
        }
        keep.sort();
        keep.dedup();
        ineqs = keep;
    }
    ineqs.iter().all(|(_, b)| !b.is_negative())
}

// Is there δ with |δ_j| ≤ eps and basis·δ = s?
fn box_meets_affine(basis: &[IntVec], s: &[BigRational], eps: &BigRational, dim: usize) -> bool {
    // Row-reduce [basis | s] over Q to express pivot variables through free ones.
    let mut rows: Vec<Vec<BigRational>> = basis
        .iter()
        .zip(s)
        .map(|(l, t)| {
            let mut r: Vec<BigRational> = l.iter().map(|c| BigRational::from_integer(c.clone())).collect();
            r.push(t.clone());
            r
        })
        .collect();
    let mut pivots = Vec::new();
    let mut rank = 0;
    for col in 0..dim {
        let Some(p) = (rank..rows.len()).find(|&i| !rows[i][col].is_zero()) else {
            continue;
        };
        rows.swap(rank, p);
        let inv = rows[rank][col].recip();
        for x in rows[rank].iter_mut() {
            *x *= &inv;
        }
        for i in 0..rows.len() {
            if i != rank && !rows[i][col].is_zero() {
                let f = rows[i][col].clone();
                let src = rows[rank].clone();
                for (x, y) in rows[i].iter_mut().zip(&src) {
                    *x -= &f * y;
                }
            }
        }
        pivots.push(col);
        rank += 1;
    }
    if rows[rank..].iter().any(|r| !r[dim].is_zero()) {
        return false;
    }
    let free: Vec<usize> = (0..dim).filter(|c| !pivots.contains(c)).collect();
    let nf = free.len();
    // δ_j as affine function of free variables: (coeffs, constant)
    let mut exprs: Vec<(Vec<BigRational>, BigRational)> = vec![(vec![BigRational::zero(); nf], BigRational::zero()); dim];
    for (k, &f) in free.iter().enumerate() {
        exprs[f].0[k] = BigRational::one();
    }
    for (i, &p) in pivots.iter().enumerate() {
        let coeffs = free.iter().map(|&f| -&rows[i][f]).collect();
        exprs[p] = (coeffs, rows[i][dim].clone());
    }
    let mut ineqs = Vec::with_capacity(2 * dim);
    for (a, c) in exprs {
        // a·w + c ≤ eps  and  -(a·w + c) ≤ eps
        ineqs.push((a.clone(), eps - &c));
        ineqs.push((a.iter().map(|x| -x).collect(), eps + &c));
    }
    fm_feasible(ineqs, nf)
}

/// `dist(x, c) ≤ eps` in the max-of-circle-distances metric.
pub fn approx_member(x: &TorusPoint, c: &TorusCoset, eps: &BigRational) -> Result<bool> {
    if eps.is_negative() {
        return Err(Error::Precondition("eps must be non-negative".into()));
    }
    if x.dim() != c.dim() {
        return Err(Error::dims(c.dim(), x.dim()));
    }
    let TorusCoset::Coset { rep, group } = c else {
        return Ok(false);
    };
    if group.contains(&x.sub(rep)) {
        return Ok(true);
    }
    if eps >= &BigRational::new(1.into(), 2.into()) {
        return Ok(true);
    }
    let basis = group.annihilator().basis();
    let diff: Vec<BigRational> = rep.coords().iter().zip(x.coords()).map(|(a, b)| a - b).collect();
    let t: Vec<BigRational> = basis.iter().map(|l| dot_q(l, &diff)).collect();
    // z_i ranges over integers with |t_i + z_i| ≤ eps · Σ_j |λ_ij|
    let ranges: Vec<(BigInt, BigInt)> = basis
        .iter()
        .zip(&t)
        .map(|(l, ti)| {
            let radius = eps * BigRational::from_integer(l.iter().map(|c| c.abs()).sum());
            ((-&radius - ti).ceil().to_integer(), (&radius - ti).floor().to_integer())
        })
        .collect();
    if ranges.iter().any(|(lo, hi)| lo > hi) {
        return Ok(false);
    }
    let mut z: Vec<BigInt> = ranges.iter().map(|(lo, _)| lo.clone()).collect();
    loop {
        let s: Vec<BigRational> = t
            .iter()
            .zip(&z)
            .map(|(ti, zi)| ti + BigRational::from_integer(zi.clone()))
            .collect();
        if box_meets_affine(basis, &s, eps, x.dim()) {
            return Ok(true);
        }
        // odometer step
        let mut i = 0;
        loop {
            if i == z.len() {
                return Ok(false);
            }
            if z[i] < ranges[i].1 {
                z[i] += 1;
                break;
            }
            z[i] = ranges[i].0.clone();
            i += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::int_vec;

    fn q(p: i64, d: i64) -> BigRational {
        BigRational::new(p.into(), d.into())
    }

    fn ann(dim: usize, rows: &[&[i64]]) -> ClosedTorusSubgroup {
        ClosedTorusSubgroup::from_annihilator(
            Lattice::from_generators(dim, rows.iter().map(|r| int_vec(r)).collect()).unwrap(),
        )
    }

    fn coset(rep: &[(i64, i64)], g: ClosedTorusSubgroup) -> TorusCoset {
        TorusCoset::new(TorusPoint::from_ratios(rep), g).unwrap()
    }

    #[test]
    fn closure_examples() {
        let g = closure_of(&[TorusPoint::from_ratios(&[(1, 3)])], 1).unwrap();
        assert_eq!(g, ann(1, &[&[3]]));
        assert_eq!(closure_of(&[], 2).unwrap(), ClosedTorusSubgroup::trivial(2));
        let g = closure_of(&[TorusPoint::from_ratios(&[(1, 2), (1, 3)])], 2).unwrap();
        assert_eq!(g, ann(2, &[&[2, 0], &[0, 3]]));
    }

    #[test]
    fn closure_brute_force_annihilator() {
        // χ ∈ [-6,6]^2 with χ1/2 + χ2/3 ∈ Z are exactly the members of span{(2,0),(0,3)}
        let g = closure_of(&[TorusPoint::from_ratios(&[(1, 2), (1, 3)])], 2).unwrap();
        for a in -6..=6i64 {
            for b in -6..=6i64 {
                let integral = (3 * a + 2 * b) % 6 == 0;
                assert_eq!(g.annihilator().contains(&int_vec(&[a, b])), integral, "({a},{b})");
            }
        }
    }

    #[test]
    fn member_examples() {
        let three = TorusCoset::subgroup(ann(1, &[&[3]]));
        assert!(member(&TorusPoint::from_ratios(&[(2, 3)]), &three).unwrap());
        assert!(!member(&TorusPoint::from_ratios(&[(1, 2)]), &three).unwrap());
        let c = coset(&[(1, 4)], ann(1, &[&[2]]));
        assert!(member(&TorusPoint::from_ratios(&[(3, 4)]), &c).unwrap());
        assert!(!member(&TorusPoint::zero(1), &TorusCoset::empty(1)).unwrap());
    }

    #[test]
    fn intersect_examples() {
        let a = coset(&[(1, 4)], ann(1, &[&[2]]));
        let b = coset(&[(1, 4)], ann(1, &[&[4]]));
        assert_eq!(coset_intersect(&a, &b).unwrap(), a);
        let z = coset(&[(0, 1)], ann(1, &[&[2]]));
        assert!(coset_intersect(&z, &a).unwrap().is_empty());
        assert_eq!(coset_intersect(&a, &a).unwrap(), a);
    }

    #[test]
    fn canonical_rep_independent_of_choice() {
        let g = ann(2, &[&[2, 1], &[0, 3]]);
        let x = TorusPoint::from_ratios(&[(1, 5), (2, 7)]);
        let c1 = TorusCoset::new(x.clone(), g.clone()).unwrap();
        // shift by a group element: (1/2, 0) satisfies 2·(1/2) ∈ Z and 0 ∈ Z
        let c2 = TorusCoset::new(x.add(&TorusPoint::from_ratios(&[(1, 2), (0, 1)])), g.clone()).unwrap();
        assert!(g.contains(&TorusPoint::from_ratios(&[(1, 2), (0, 1)])));
        assert_eq!(c1, c2);
        assert!(member(&x, &c1).unwrap());
    }

    #[test]
    fn approx_examples() {
        let pt = TorusCoset::point(TorusPoint::from_ratios(&[(1, 4)]));
        assert!(approx_member(&TorusPoint::from_ratios(&[(13, 50)]), &pt, &q(1, 10)).unwrap());
        let half = TorusCoset::point(TorusPoint::from_ratios(&[(1, 2)]));
        assert!(!approx_member(&TorusPoint::zero(1), &half, &q(1, 10)).unwrap());
        assert!(approx_member(&TorusPoint::zero(1), &half, &q(1, 2)).unwrap());
        assert!(!approx_member(&TorusPoint::zero(1), &TorusCoset::empty(1), &q(1, 2)).unwrap());
    }

    #[test]
    fn approx_wraps_around_and_uses_subtori() {
        let pt = TorusCoset::point(TorusPoint::from_ratios(&[(1, 20)]));
        assert!(approx_member(&TorusPoint::from_ratios(&[(19, 20)]), &pt, &q(1, 10)).unwrap());
        assert!(!approx_member(&TorusPoint::from_ratios(&[(19, 20)]), &pt, &q(1, 11)).unwrap());
        // the diagonal circle {(t, t)}; (0, 1/5) is at distance 1/10 from (1/10, 1/10)
        let diag = TorusCoset::subgroup(ann(2, &[&[1, -1]]));
        let x = TorusPoint::from_ratios(&[(0, 1), (1, 5)]);
        assert!(approx_member(&x, &diag, &q(1, 10)).unwrap());
        assert!(!approx_member(&x, &diag, &q(1, 11)).unwrap());
    }

    #[test]
    fn distance_is_circle_metric() {
        let a = TorusPoint::from_ratios(&[(1, 10), (1, 2)]);
        let b = TorusPoint::from_ratios(&[(9, 10), (1, 4)]);
        assert_eq!(a.distance(&b), q(1, 4));
    }
}
