//! Exact integer matrices and lattices (subgroups of `Z^n`).
//!
//! Every lattice is stored by its canonical row Hermite normal form: rows in
//! echelon order, strictly increasing pivot columns, positive pivots, and the
//! entries above each pivot reduced into `[0, pivot)`. Two lattices are equal
//! exactly when their stored bases are equal entry-wise, so `Eq`/`Hash` are
//! derived.

use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};

pub type IntVec = Vec<BigInt>;

pub fn int_vec(v: &[i64]) -> IntVec {
    v.iter().map(|&x| BigInt::from(x)).collect()
}

fn is_zero_vec(v: &[BigInt]) -> bool {
    v.iter().all(Zero::is_zero)
}

fn axpy(dst: &mut [BigInt], k: &BigInt, src: &[BigInt]) {
    if k.is_zero() {
        return;
    }
    for (d, s) in dst.iter_mut().zip(src) {
        if !s.is_zero() {
            *d += k * s;
        }
    }
}

pub fn dot(a: &[BigInt], b: &[BigInt]) -> BigInt {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Dense row-major integer matrix.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct IntMatrix {
    rows: usize,
    cols: usize,
    data: Vec<BigInt>,
}

impl IntMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        IntMatrix {
            rows,
            cols,
            data: vec![BigInt::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = BigInt::one();
        }
        m
    }

    pub fn from_rows(cols: usize, rows: Vec<IntVec>) -> Result<Self> {
        let mut data = Vec::with_capacity(rows.len() * cols);
        let n = rows.len();
        for r in rows {
            if r.len() != cols {
                return Err(Error::dims(cols, r.len()));
            }
            data.extend(r);
        }
        Ok(IntMatrix {
            rows: n,
            cols,
            data,
        })
    }

    /// Panics on ragged input; intended for literals.
    pub fn from_i64(cols: usize, rows: &[&[i64]]) -> Self {
        Self::from_rows(cols, rows.iter().map(|r| int_vec(r)).collect())
            .expect("ragged matrix literal")
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[BigInt] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_vecs(&self) -> Vec<IntVec> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)].clone();
            }
        }
        t
    }

    pub fn mul(&self, other: &IntMatrix) -> Result<IntMatrix> {
        if self.cols != other.rows {
            return Err(Error::dims(self.cols, other.rows));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = &self[(i, k)];
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let b = &other[(k, j)];
                    if !b.is_zero() {
                        out[(i, j)] += a * b;
                    }
                }
            }
        }
        Ok(out)
    }

    /// `self * v` for a column vector `v`.
    pub fn apply(&self, v: &[BigInt]) -> Result<IntVec> {
        if v.len() != self.cols {
            return Err(Error::dims(self.cols, v.len()));
        }
        Ok((0..self.rows).map(|i| dot(self.row(i), v)).collect())
    }

    pub fn is_diagonal(&self) -> bool {
        (0..self.rows).all(|i| (0..self.cols).all(|j| i == j || self[(i, j)].is_zero()))
    }

    /// Fraction-free (Bareiss) determinant.
    pub fn determinant(&self) -> Result<BigInt> {
        if self.rows != self.cols {
            return Err(Error::dims(self.rows, self.cols));
        }
        let n = self.rows;
        if n == 0 {
            return Ok(BigInt::one());
        }
        let mut a: Vec<IntVec> = self.row_vecs();
        let mut sign = BigInt::one();
        let mut prev = BigInt::one();
        for k in 0..n - 1 {
            if a[k][k].is_zero() {
                match (k + 1..n).find(|&i| !a[i][k].is_zero()) {
                    Some(i) => {
                        a.swap(i, k);
                        sign = -sign;
                    }
                    None => return Ok(BigInt::zero()),
                }
            }
            for i in k + 1..n {
                for j in k + 1..n {
                    let v = &a[i][j] * &a[k][k] - &a[i][k] * &a[k][j];
                    a[i][j] = v / &prev;
                }
            }
            prev = a[k][k].clone();
        }
        Ok(sign * &a[n - 1][n - 1])
    }
}

impl std::ops::Index<(usize, usize)> for IntMatrix {
    type Output = BigInt;
    fn index(&self, (i, j): (usize, usize)) -> &BigInt {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for IntMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut BigInt {
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Display for IntMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for i in 0..self.rows {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "[")?;
            for j in 0..self.cols {
                if j > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{}", self[(i, j)])?;
            }
            write!(f, "]")?;
        }
        write!(f, "]")
    }
}

/// Index of a sublattice: finite, or infinite when the rank drops.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum IndexValue {
    Finite(BigInt),
    Infinite,
}

impl IndexValue {
    pub fn is_finite(&self) -> bool {
        matches!(self, IndexValue::Finite(_))
    }

    pub fn finite(&self) -> Option<&BigInt> {
        match self {
            IndexValue::Finite(n) => Some(n),
            IndexValue::Infinite => None,
        }
    }
}

impl fmt::Display for IndexValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IndexValue::Finite(n) => write!(f, "{n}"),
            IndexValue::Infinite => write!(f, "INFINITE"),
        }
    }
}

/// A subgroup of `Z^dim`, kept in canonical Hermite normal form.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Lattice {
    dim: usize,
    basis: Vec<IntVec>,
}

impl IntMatrix {
    /// Integer inverse, when `self` is square with determinant `±1`.
    pub fn inverse_unimodular(&self) -> Option<IntMatrix> {
        let n = self.rows;
        if n != self.cols {
            return None;
        }
        let rows = (0..n)
            .map(|i| {
                let mut r = self.row(i).to_vec();
                r.extend((0..n).map(|j| if i == j { BigInt::one() } else { BigInt::zero() }));
                r
            })
            .collect();
        let echelon = hermite_rows(2 * n, rows);
        if echelon.len() != n || echelon.iter().enumerate().any(|(i, r)| (0..n).any(|j| r[j] != BigInt::from((i == j) as u8))) {
            return None;
        }
        let inv = echelon.into_iter().map(|r| r[n..].to_vec()).collect();
        IntMatrix::from_rows(n, inv).ok()
    }
}

fn pivot_of(row: &[BigInt]) -> Option<usize> {
    row.iter().position(|x| !x.is_zero())
}

// Row echelon form by extended-gcd row combination, then off-pivot reduction.
fn hermite_rows(dim: usize, rows: Vec<IntVec>) -> Vec<IntVec> {
    let mut pending: Vec<IntVec> = rows.into_iter().filter(|r| !is_zero_vec(r)).collect();
    let mut basis: Vec<IntVec> = Vec::new();
    let mut pivots: Vec<usize> = Vec::new();
    for col in 0..dim {
        if pending.is_empty() {
            break;
        }
        let mut with: Vec<IntVec> = Vec::new();
        let mut without: Vec<IntVec> = Vec::new();
        for r in pending.drain(..) {
            if r[col].is_zero() {
                without.push(r);
            } else {
                with.push(r);
            }
        }
        pending = without;
        // Smallest leading entry first keeps the gcd steps short.
        with.sort_by(|a, b| a[col].abs().cmp(&b[col].abs()));
        let mut iter = with.into_iter();
        let Some(mut piv) = iter.next() else { continue };
        for mut r in iter {
            let a = piv[col].clone();
            let b = r[col].clone();
            if (&b % &a).is_zero() {
                let q = &b / &a;
                let neg = -q;
                axpy(&mut r, &neg, &piv);
            } else {
                let eg = a.extended_gcd(&b);
                let (g, s, t) = (eg.gcd, eg.x, eg.y);
                let new_piv: IntVec = piv.iter().zip(&r).map(|(p, q)| &s * p + &t * q).collect();
                let ag = &a / &g;
                let bg = &b / &g;
                let new_r: IntVec = piv.iter().zip(&r).map(|(p, q)| &bg * p - &ag * q).collect();
                piv = new_piv;
                r = new_r;
            }
            debug_assert!(r[col].is_zero());
            if !is_zero_vec(&r) {
                pending.push(r);
            }
        }
        if piv[col].is_negative() {
            for x in piv.iter_mut() {
                *x = -&*x;
            }
        }
        basis.push(piv);
        pivots.push(col);
    }
    debug_assert!(pending.iter().all(|r| is_zero_vec(r)));
    for i in 0..basis.len() {
        let c = pivots[i];
        let (head, tail) = basis.split_at_mut(i);
        let prow = &tail[0];
        let p = &prow[c];
        for row in head.iter_mut() {
            if !row[c].is_zero() {
                let q = row[c].div_floor(p);
                let neg = -q;
                axpy(row, &neg, prow);
            }
        }
    }
    basis
}

impl Lattice {
    pub fn zero(dim: usize) -> Self {
        Lattice {
            dim,
            basis: Vec::new(),
        }
    }

    pub fn full(dim: usize) -> Self {
        Lattice {
            dim,
            basis: IntMatrix::identity(dim).row_vecs(),
        }
    }

    /// `k Z^dim`.
    pub fn scalar(dim: usize, k: &BigInt) -> Self {
        if k.is_zero() {
            return Self::zero(dim);
        }
        let mut basis = IntMatrix::identity(dim).row_vecs();
        for (i, r) in basis.iter_mut().enumerate() {
            r[i] = k.abs();
        }
        Lattice { dim, basis }
    }

    pub fn from_generators(dim: usize, gens: Vec<IntVec>) -> Result<Self> {
        for g in &gens {
            if g.len() != dim {
                return Err(Error::dims(dim, g.len()));
            }
        }
        Ok(Lattice {
            dim,
            basis: hermite_rows(dim, gens),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[IntVec] {
        &self.basis
    }

    pub fn basis_matrix(&self) -> IntMatrix {
        IntMatrix::from_rows(self.dim, self.basis.clone()).expect("basis rows have lattice dimension")
    }

    pub fn pivots(&self) -> Vec<usize> {
        self.basis
            .iter()
            .map(|r| pivot_of(r).expect("basis rows are nonzero"))
            .collect()
    }

    pub fn is_full_rank(&self) -> bool {
        self.rank() == self.dim
    }

    fn check_dim(&self, v: &[BigInt]) -> Result<()> {
        if v.len() != self.dim {
            return Err(Error::dims(self.dim, v.len()));
        }
        Ok(())
    }

    /// Coefficients of `v` in the stored basis, if `v` lies in the lattice.
    pub fn coordinates(&self, v: &[BigInt]) -> Option<IntVec> {
        if v.len() != self.dim {
            return None;
        }
        let mut rest = v.to_vec();
        let mut coeffs = Vec::with_capacity(self.rank());
        for row in &self.basis {
            let c = pivot_of(row).expect("nonzero basis row");
            if let Some(first) = pivot_of(&rest) {
                if first < c {
                    return None;
                }
            }
            let (q, r) = rest[c].div_rem(&row[c]);
            if !r.is_zero() {
                return None;
            }
            let neg = -&q;
            axpy(&mut rest, &neg, row);
            coeffs.push(q);
        }
        is_zero_vec(&rest).then_some(coeffs)
    }

    pub fn contains(&self, v: &[BigInt]) -> bool {
        self.coordinates(v).is_some()
    }

    /// Canonical representative of `v + self`: pivot coordinates land in `[0, pivot)`.
    pub fn reduce(&self, v: &[BigInt]) -> IntVec {
        let mut out = v.to_vec();
        for row in &self.basis {
            let c = pivot_of(row).expect("nonzero basis row");
            let q = out[c].div_floor(&row[c]);
            let neg = -q;
            axpy(&mut out, &neg, row);
        }
        out
    }

    pub fn is_sublattice_of(&self, other: &Lattice) -> bool {
        self.dim == other.dim && self.basis.iter().all(|r| other.contains(r))
    }

    pub fn sum(&self, other: &Lattice) -> Result<Lattice> {
        if self.dim != other.dim {
            return Err(Error::dims(self.dim, other.dim));
        }
        let mut gens = self.basis.clone();
        gens.extend(other.basis.iter().cloned());
        Lattice::from_generators(self.dim, gens)
    }

    pub fn intersect(&self, other: &Lattice) -> Result<Lattice> {
        intersect(self, other)
    }

    /// Image under `v -> map * v`, where `map` is `P x dim`.
    pub fn image(&self, map: &IntMatrix) -> Result<Lattice> {
        if map.cols() != self.dim {
            return Err(Error::dims(self.dim, map.cols()));
        }
        let gens = self
            .basis
            .iter()
            .map(|b| map.apply(b))
            .collect::<Result<Vec<_>>>()?;
        Lattice::from_generators(map.rows(), gens)
    }

    /// Keep the coordinates in `range`.
    pub fn project(&self, range: std::ops::Range<usize>) -> Lattice {
        let dim = range.len();
        let gens = self.basis.iter().map(|b| b[range.clone()].to_vec()).collect();
        Lattice::from_generators(dim, gens).expect("projected rows have matching length")
    }

    pub fn direct_sum(parts: &[&Lattice]) -> Lattice {
        let dim: usize = parts.iter().map(|p| p.dim).sum();
        let mut basis = Vec::new();
        let mut offset = 0;
        for p in parts {
            for r in &p.basis {
                let mut v = vec![BigInt::zero(); dim];
                v[offset..offset + p.dim].clone_from_slice(r);
                basis.push(v);
            }
            offset += p.dim;
        }
        // A block-diagonal arrangement of canonical bases is already canonical.
        Lattice { dim, basis }
    }

    /// `self ⊕ self ⊕ ... ` (`k` copies).
    pub fn power(&self, k: usize) -> Lattice {
        let parts: Vec<&Lattice> = std::iter::repeat(self).take(k).collect();
        Lattice::direct_sum(&parts)
    }

    /// Index of `self` in `Z^dim` (`Infinite` unless full rank).
    pub fn covolume(&self) -> IndexValue {
        if !self.is_full_rank() {
            return IndexValue::Infinite;
        }
        let mut p = BigInt::one();
        for (row, c) in self.basis.iter().zip(self.pivots()) {
            p *= &row[c];
        }
        IndexValue::Finite(p)
    }
}

impl fmt::Display for Lattice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "span{{")?;
        for (i, r) in self.basis.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "(")?;
            for (j, x) in r.iter().enumerate() {
                if j > 0 {
                    write!(f, ",")?;
                }
                write!(f, "{x}")?;
            }
            write!(f, ")")?;
        }
        write!(f, "}} in Z^{}", self.dim)
    }
}

pub fn hnf(m: &IntMatrix) -> Lattice {
    Lattice {
        dim: m.cols(),
        basis: hermite_rows(m.cols(), m.row_vecs()),
    }
}

/// Smith normal form certificate: `u * m * v = d`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Snf {
    pub u: IntMatrix,
    pub d: IntMatrix,
    pub v: IntMatrix,
}

impl Snf {
    /// Nonzero diagonal entries, in divisibility order.
    pub fn invariant_factors(&self) -> Vec<BigInt> {
        let n = self.d.rows().min(self.d.cols());
        (0..n)
            .map(|i| self.d[(i, i)].clone())
            .filter(|x| !x.is_zero())
            .collect()
    }
}

pub fn snf(m: &IntMatrix) -> Snf {
    let (r, c) = (m.rows(), m.cols());
    let mut d = m.clone();
    let mut u = IntMatrix::identity(r);
    let mut v = IntMatrix::identity(c);

    fn row_axpy(m: &mut IntMatrix, dst: usize, k: &BigInt, src: usize) {
        for j in 0..m.cols() {
            let s = m[(src, j)].clone();
            if !s.is_zero() {
                m[(dst, j)] += k * s;
            }
        }
    }
    fn col_axpy(m: &mut IntMatrix, dst: usize, k: &BigInt, src: usize) {
        for i in 0..m.rows() {
            let s = m[(i, src)].clone();
            if !s.is_zero() {
                m[(i, dst)] += k * s;
            }
        }
    }
    fn swap_rows(m: &mut IntMatrix, a: usize, b: usize) {
        if a != b {
            for j in 0..m.cols() {
                let t = m[(a, j)].clone();
                m[(a, j)] = m[(b, j)].clone();
                m[(b, j)] = t;
            }
        }
    }
    fn swap_cols(m: &mut IntMatrix, a: usize, b: usize) {
        if a != b {
            for i in 0..m.rows() {
                let t = m[(i, a)].clone();
                m[(i, a)] = m[(i, b)].clone();
                m[(i, b)] = t;
            }
        }
    }

    for t in 0..r.min(c) {
        loop {
            let mut best: Option<(usize, usize)> = None;
            for i in t..r {
                for j in t..c {
                    if d[(i, j)].is_zero() {
                        continue;
                    }
                    if best.map_or(true, |(bi, bj)| d[(i, j)].abs() < d[(bi, bj)].abs()) {
                        best = Some((i, j));
                    }
                }
            }
            let Some((bi, bj)) = best else {
                return finish(u, d, v);
            };
            swap_rows(&mut d, t, bi);
            swap_rows(&mut u, t, bi);
            swap_cols(&mut d, t, bj);
            swap_cols(&mut v, t, bj);

            let mut clean = true;
            for i in t + 1..r {
                if d[(i, t)].is_zero() {
                    continue;
                }
                let q = -(&d[(i, t)] / &d[(t, t)]);
                row_axpy(&mut d, i, &q, t);
                row_axpy(&mut u, i, &q, t);
                clean &= d[(i, t)].is_zero();
            }
            for j in t + 1..c {
                if d[(t, j)].is_zero() {
                    continue;
                }
                let q = -(&d[(t, j)] / &d[(t, t)]);
                col_axpy(&mut d, j, &q, t);
                col_axpy(&mut v, j, &q, t);
                clean &= d[(t, j)].is_zero();
            }
            if !clean {
                continue;
            }
            let p = d[(t, t)].clone();
            let bad = (t + 1..r).find(|&i| (t + 1..c).any(|j| !(&d[(i, j)] % &p).is_zero()));
            match bad {
                Some(i) => {
                    let one = BigInt::one();
                    row_axpy(&mut d, t, &one, i);
                    row_axpy(&mut u, t, &one, i);
                }
                None => break,
            }
        }
        if d[(t, t)].is_negative() {
            for j in 0..c {
                let x = -&d[(t, j)];
                d[(t, j)] = x;
            }
            for j in 0..r {
                let x = -&u[(t, j)];
                u[(t, j)] = x;
            }
        }
    }
    finish(u, d, v)
}

fn finish(u: IntMatrix, d: IntMatrix, v: IntMatrix) -> Snf {
    Snf { u, d, v }
}

/// Intersection of row spans, via the echelon form of `[a a; b 0]`.
pub fn intersect(a: &Lattice, b: &Lattice) -> Result<Lattice> {
    if a.dim != b.dim {
        return Err(Error::dims(a.dim, b.dim));
    }
    let n = a.dim;
    if a.rank() == 0 || b.rank() == 0 {
        return Ok(Lattice::zero(n));
    }
    let mut rows = Vec::with_capacity(a.rank() + b.rank());
    for r in &a.basis {
        let mut v = r.clone();
        v.extend(r.iter().cloned());
        rows.push(v);
    }
    for r in &b.basis {
        let mut v = r.clone();
        v.extend(std::iter::repeat(BigInt::zero()).take(n));
        rows.push(v);
    }
    let echelon = hermite_rows(2 * n, rows);
    let gens = echelon
        .into_iter()
        .filter(|r| pivot_of(r).map_or(false, |p| p >= n))
        .map(|r| r[n..].to_vec())
        .collect();
    Lattice::from_generators(n, gens)
}

/// `[sup : sub]`; errors when `sub` is not contained in `sup`.
pub fn index_of(sub: &Lattice, sup: &Lattice) -> Result<IndexValue> {
    if sub.dim != sup.dim {
        return Err(Error::dims(sup.dim, sub.dim));
    }
    let mut coords = Vec::with_capacity(sub.rank());
    for r in &sub.basis {
        match sup.coordinates(r) {
            Some(c) => coords.push(c),
            None => return Err(Error::NotContained),
        }
    }
    if sub.rank() < sup.rank() {
        return Ok(IndexValue::Infinite);
    }
    let m = IntMatrix::from_rows(sup.rank(), coords)?;
    Ok(IndexValue::Finite(m.determinant()?.abs()))
}

/// A translate `rep + lattice` with `rep` reduced modulo the lattice.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct AffineLattice {
    rep: IntVec,
    lattice: Lattice,
}

impl AffineLattice {
    pub fn new(rep: IntVec, lattice: Lattice) -> Result<Self> {
        lattice.check_dim(&rep)?;
        let rep = lattice.reduce(&rep);
        Ok(AffineLattice { rep, lattice })
    }

    pub fn rep(&self) -> &[BigInt] {
        &self.rep
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn dim(&self) -> usize {
        self.lattice.dim
    }

    pub fn contains(&self, v: &[BigInt]) -> bool {
        if v.len() != self.dim() {
            return false;
        }
        let diff: IntVec = v.iter().zip(&self.rep).map(|(a, b)| a - b).collect();
        self.lattice.contains(&diff)
    }

    pub fn intersect(&self, other: &AffineLattice) -> Result<Option<AffineLattice>> {
        let n = self.dim();
        if other.dim() != n {
            return Err(Error::dims(n, other.dim()));
        }
        let mut map = IntMatrix::zeros(2 * n, n);
        for i in 0..n {
            map[(i, i)] = BigInt::one();
            map[(n + i, i)] = BigInt::one();
        }
        let target = Lattice::direct_sum(&[&self.lattice, &other.lattice]);
        let mut shift = self.rep.clone();
        shift.extend(other.rep.iter().cloned());
        solve(&map, &target, &shift)
    }

    pub fn project(&self, range: std::ops::Range<usize>) -> AffineLattice {
        let lattice = self.lattice.project(range.clone());
        let rep = lattice.reduce(&self.rep[range]);
        AffineLattice { rep, lattice }
    }
}

/// Full preimage `{v : map * v - shift ∈ target}` as a translate, or `None` if empty.
pub fn solve(map: &IntMatrix, target: &Lattice, shift: &[BigInt]) -> Result<Option<AffineLattice>> {
    let p = map.rows();
    let n = map.cols();
    if target.dim != p {
        return Err(Error::dims(p, target.dim));
    }
    if shift.len() != p {
        return Err(Error::dims(p, shift.len()));
    }
    // Rows (map * e_i | e_i) and (t | 0); solutions are the tails of span
    // elements whose head equals `shift`.
    let mut rows = Vec::with_capacity(n + target.rank());
    for i in 0..n {
        let mut r: IntVec = (0..p).map(|k| map[(k, i)].clone()).collect();
        r.extend((0..n).map(|j| if i == j { BigInt::one() } else { BigInt::zero() }));
        rows.push(r);
    }
    for t in &target.basis {
        let mut r = t.clone();
        r.extend(std::iter::repeat(BigInt::zero()).take(n));
        rows.push(r);
    }
    let echelon = hermite_rows(p + n, rows);
    let mut residual = shift.to_vec();
    let mut acc = vec![BigInt::zero(); n];
    let mut kernel = Vec::new();
    for row in echelon {
        let c = pivot_of(&row).expect("nonzero echelon row");
        if c >= p {
            kernel.push(row[p..].to_vec());
            continue;
        }
        if let Some(first) = pivot_of(&residual) {
            if first < c {
                return Ok(None);
            }
        }
        let (q, r) = residual[c].div_rem(&row[c]);
        if !r.is_zero() {
            return Ok(None);
        }
        let neg = -&q;
        axpy(&mut residual, &neg, &row[..p]);
        axpy(&mut acc, &q, &row[p..]);
    }
    if !is_zero_vec(&residual) {
        return Ok(None);
    }
    let lattice = Lattice::from_generators(n, kernel)?;
    Ok(Some(AffineLattice::new(acc, lattice)?))
}
