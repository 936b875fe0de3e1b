//! Full-rank lattices `L ⊆ Z^D` with `e·Z^D ⊆ L`, in machine integers.
//!
//! Such a lattice is determined by its image in `(Z/e)^D`; its Hermite form
//! is upper triangular with diagonal entries dividing `e`, so all arithmetic
//! stays below `e²`.

use num_bigint::BigInt;
use num_traits::ToPrimitive;

use crate::lattice::Lattice;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ModLattice {
    dim: usize,
    modulus: i64,
    /// Row-major `dim x dim` Hermite basis.
    rows: Vec<i64>,
}

fn xgcd(a: i64, b: i64) -> (i64, i64, i64) {
    let (mut r0, mut r1) = (a, b);
    let (mut s0, mut s1) = (1i64, 0i64);
    let (mut t0, mut t1) = (0i64, 1i64);
    while r1 != 0 {
        let q = r0.div_euclid(r1);
        (r0, r1) = (r1, r0 - q * r1);
        (s0, s1) = (s1, s0 - q * s1);
        (t0, t1) = (t1, t0 - q * t1);
    }
    if r0 < 0 {
        (-r0, -s0, -t0)
    } else {
        (r0, s0, t0)
    }
}

impl ModLattice {
    /// Lattice spanned by `gens` and `e·Z^dim`.
    pub fn new(dim: usize, modulus: i64, gens: impl IntoIterator<Item = Vec<i64>>) -> ModLattice {
        assert!(modulus > 0, "modulus must be positive");
        let e = modulus;
        let mut pending: Vec<Vec<i64>> = gens
            .into_iter()
            .map(|g| {
                debug_assert_eq!(g.len(), dim);
                g.into_iter().map(|x| x.rem_euclid(e)).collect::<Vec<_>>()
            })
            .filter(|g| g.iter().any(|&x| x != 0))
            .collect();
        let mut rows = vec![0i64; dim * dim];
        for col in 0..dim {
            let mut piv = vec![0i64; dim];
            piv[col] = e;
            let mut rest = Vec::with_capacity(pending.len());
            for mut r in pending.drain(..) {
                if r[col] == 0 {
                    rest.push(r);
                    continue;
                }
                let (a, b) = (piv[col], r[col]);
                let (g, s, t) = xgcd(a, b);
                let (ag, bg) = (a / g, b / g);
                for j in col..dim {
                    let (p, q) = (piv[j], r[j]);
                    piv[j] = (s * p + t * q).rem_euclid(e);
                    r[j] = (bg * p - ag * q).rem_euclid(e);
                }
                piv[col] = g;
                r[col] = 0;
                if r.iter().any(|&x| x != 0) {
                    rest.push(r);
                }
            }
            pending = rest;
            rows[col * dim..(col + 1) * dim].copy_from_slice(&piv);
        }
        for c in 1..dim {
            let p = rows[c * dim + c];
            for j in 0..c {
                let q = rows[j * dim + c].div_euclid(p);
                if q != 0 {
                    for k in c..dim {
                        let v = rows[j * dim + k] - q * rows[c * dim + k];
                        rows[j * dim + k] = if k == c { v } else { v.rem_euclid(e) };
                    }
                }
            }
        }
        for c in 0..dim {
            for j in 0..c {
                debug_assert!(rows[j * dim + c] >= 0 && rows[j * dim + c] < rows[c * dim + c]);
            }
        }
        ModLattice { dim, modulus, rows }
    }

    /// `e·Z^dim`.
    pub fn scalar(dim: usize, modulus: i64) -> ModLattice {
        ModLattice::new(dim, modulus, std::iter::empty())
    }

    pub fn from_lattice(l: &Lattice, modulus: i64) -> ModLattice {
        let m = BigInt::from(modulus);
        ModLattice::new(
            l.dim(),
            modulus,
            l.basis()
                .iter()
                .map(|r| r.iter().map(|x| (x % &m).to_i64().expect("reduced")).collect()),
        )
    }

    pub fn to_lattice(&self) -> Lattice {
        let rows = (0..self.dim).map(|i| self.row(i).iter().map(|&x| BigInt::from(x)).collect()).collect();
        Lattice::from_generators(self.dim, rows).expect("rows have the lattice dimension")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn modulus(&self) -> i64 {
        self.modulus
    }

    pub fn row(&self, i: usize) -> &[i64] {
        &self.rows[i * self.dim..(i + 1) * self.dim]
    }

    /// Basis rows that are not multiples of `e` times a unit vector.
    pub fn nontrivial_rows(&self) -> impl Iterator<Item = &[i64]> {
        (0..self.dim).map(|i| self.row(i)).filter(move |r| r.iter().any(|&x| x != 0 && x != self.modulus))
    }

    pub fn contains(&self, v: &[i64]) -> bool {
        let mut w: Vec<i64> = v.iter().map(|x| x.rem_euclid(self.modulus)).collect();
        for i in 0..self.dim {
            let p = self.rows[i * self.dim + i];
            if w[i] % p != 0 {
                return false;
            }
            let q = w[i] / p;
            if q != 0 {
                for k in i..self.dim {
                    w[k] = (w[k] - q * self.rows[i * self.dim + k]).rem_euclid(self.modulus);
                }
            }
        }
        true
    }

    pub fn sum(&self, other: &ModLattice) -> ModLattice {
        debug_assert_eq!(self.dim, other.dim);
        self.with(other.nontrivial_rows().map(<[i64]>::to_vec))
    }

    pub fn with(&self, extra: impl IntoIterator<Item = Vec<i64>>) -> ModLattice {
        let gens: Vec<Vec<i64>> = self.nontrivial_rows().map(<[i64]>::to_vec).chain(extra).collect();
        ModLattice::new(self.dim, self.modulus, gens)
    }

    pub fn intersect(&self, other: &ModLattice) -> ModLattice {
        let d = self.dim;
        let mut gens = Vec::with_capacity(2 * d);
        for r in self.nontrivial_rows() {
            let mut v = r.to_vec();
            v.extend_from_slice(r);
            gens.push(v);
        }
        for r in other.nontrivial_rows() {
            let mut v = r.to_vec();
            v.extend(std::iter::repeat(0).take(d));
            gens.push(v);
        }
        let big = ModLattice::new(2 * d, self.modulus, gens);
        big.tail(d)
    }

    /// `L ∩ (0 × Z^{dim-c})`, as a lattice in the last `dim - c` coordinates.
    pub fn tail(&self, c: usize) -> ModLattice {
        let d = self.dim;
        let gens = (c..d).map(|i| self.row(i)[c..].to_vec());
        ModLattice::new(d - c, self.modulus, gens)
    }

    /// Projection of `L` to the first `c` coordinates.
    pub fn head(&self, c: usize) -> ModLattice {
        let gens = (0..c).map(|i| self.row(i)[..c].to_vec());
        ModLattice::new(c, self.modulus, gens)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::int_vec;

    fn reference(dim: usize, e: i64, gens: &[Vec<i64>]) -> Lattice {
        let mut rows: Vec<_> = gens.iter().map(|g| int_vec(g)).collect();
        for i in 0..dim {
            let mut r = vec![0; dim];
            r[i] = e;
            rows.push(int_vec(&r));
        }
        Lattice::from_generators(dim, rows).unwrap()
    }

    #[test]
    fn matches_exact_hermite_form() {
        let gens = vec![vec![3, 5, 7], vec![2, 2, 0], vec![0, 6, 9]];
        let m = ModLattice::new(3, 12, gens.clone());
        assert_eq!(m.to_lattice(), reference(3, 12, &gens));
        assert_eq!(ModLattice::from_lattice(&m.to_lattice(), 12), m);
    }

    #[test]
    fn intersection_and_blocks() {
        let a = ModLattice::new(2, 8, vec![vec![2, 0]]);
        let b = ModLattice::new(2, 8, vec![vec![4, 4]]);
        let exact = a.to_lattice().intersect(&b.to_lattice()).unwrap();
        assert_eq!(a.intersect(&b).to_lattice(), exact);
        assert_eq!(a.sum(&b).to_lattice(), a.to_lattice().sum(&b.to_lattice()).unwrap());
        let c = ModLattice::new(3, 6, vec![vec![1, 2, 3], vec![0, 2, 4]]);
        assert!(c.contains(&[1, 4, 7]));
        assert!(!c.contains(&[1, 0, 0]));
        assert_eq!(c.head(1).to_lattice(), c.to_lattice().project(0..1));
    }
}
