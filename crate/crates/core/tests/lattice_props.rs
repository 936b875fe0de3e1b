use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use proptest::prelude::*;

use ppstar::lattice::{dot, hnf, index_of, int_vec, intersect, snf, solve, IndexValue, IntMatrix, IntVec, Lattice};

fn matrix(max_rows: usize, max_cols: usize, bound: i64) -> impl Strategy<Value = IntMatrix> {
    (1..=max_rows, 1..=max_cols).prop_flat_map(move |(r, c)| {
        prop::collection::vec(prop::collection::vec(-bound..=bound, c), r).prop_map(move |rows| {
            IntMatrix::from_rows(c, rows.iter().map(|r| int_vec(r)).collect()).unwrap()
        })
    })
}

fn lattice_pair(max_dim: usize, bound: i64) -> impl Strategy<Value = (Lattice, Lattice)> {
    (1..=max_dim, 1..=4usize, 1..=4usize).prop_flat_map(move |(n, ra, rb)| {
        let gens = move |k| prop::collection::vec(prop::collection::vec(-bound..=bound, n), k);
        (gens(ra), gens(rb)).prop_map(move |(a, b)| (lat(n, &a), lat(n, &b)))
    })
}

fn lat(n: usize, rows: &[Vec<i64>]) -> Lattice {
    Lattice::from_generators(n, rows.iter().map(|r| int_vec(r)).collect()).unwrap()
}

fn box_points(n: usize, r: i64) -> Vec<IntVec> {
    let mut out = vec![Vec::new()];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|p: Vec<i64>| (-r..=r).map(move |x| [p.clone(), vec![x]].concat()))
            .collect();
    }
    out.iter().map(|p| int_vec(p)).collect()
}

fn is_hermite(l: &Lattice) -> bool {
    let pivots = l.pivots();
    if pivots.windows(2).any(|w| w[0] >= w[1]) {
        return false;
    }
    for (i, row) in l.basis().iter().enumerate() {
        let p = pivots[i];
        if row[..p].iter().any(|x| !x.is_zero()) || !row[p].is_positive() {
            return false;
        }
        for above in &l.basis()[..i] {
            if above[p].is_negative() || above[p] >= row[p] {
                return false;
            }
        }
    }
    true
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn hnf_is_echelon_and_idempotent(m in matrix(6, 6, 50)) {
        let h = hnf(&m);
        prop_assert!(is_hermite(&h));
        prop_assert_eq!(hnf(&h.basis_matrix()), h.clone());
        for i in 0..m.rows() {
            prop_assert!(h.contains(m.row(i)));
        }
        // Same span: every basis row is an integer combination of the input.
        let back = Lattice::from_generators(m.cols(), m.row_vecs()).unwrap();
        prop_assert_eq!(back, h);
    }

    #[test]
    fn snf_certificate(m in matrix(6, 6, 50)) {
        let s = snf(&m);
        prop_assert_eq!(s.u.mul(&m).unwrap().mul(&s.v).unwrap(), s.d.clone());
        prop_assert!(s.d.is_diagonal());
        prop_assert_eq!(s.u.determinant().unwrap().abs(), BigInt::one());
        prop_assert_eq!(s.v.determinant().unwrap().abs(), BigInt::one());
        let inv = s.invariant_factors();
        prop_assert!(inv.iter().all(|x| x.is_positive()));
        for w in inv.windows(2) {
            prop_assert!((&w[1] % &w[0]).is_zero());
        }
        prop_assert_eq!(inv.len(), hnf(&m).rank());
    }

    #[test]
    fn intersect_is_the_meet((a, b) in lattice_pair(3, 6)) {
        let c = intersect(&a, &b).unwrap();
        prop_assert!(c.is_sublattice_of(&a));
        prop_assert!(c.is_sublattice_of(&b));
        for p in box_points(a.dim(), 4) {
            prop_assert_eq!(c.contains(&p), a.contains(&p) && b.contains(&p));
        }
        prop_assert_eq!(a.intersect(&b).unwrap(), c);
    }

    #[test]
    fn index_is_multiplicative((a, b) in lattice_pair(4, 6)) {
        // c ⊆ s ⊆ a with c = a ∩ b and s = c + a ∩ 2b.
        let c = intersect(&a, &b).unwrap();
        let b2 = Lattice::from_generators(b.dim(), b.basis().iter().map(|r| r.iter().map(|x| x * 2).collect()).collect()).unwrap();
        let c2 = intersect(&a, &b2).unwrap();
        let whole = index_of(&c2, &a).unwrap();
        let lower = index_of(&c2, &c).unwrap();
        let upper = index_of(&c, &a).unwrap();
        match (whole, lower, upper) {
            (IndexValue::Finite(w), IndexValue::Finite(l), IndexValue::Finite(u)) => prop_assert_eq!(w, l * u),
            (IndexValue::Infinite, l, u) => prop_assert!(!l.is_finite() || !u.is_finite()),
            (IndexValue::Finite(_), l, u) => prop_assert!(l.is_finite() && u.is_finite()),
        }
        prop_assert_eq!(index_of(&a, &a).unwrap(), IndexValue::Finite(BigInt::one()));
    }

    #[test]
    fn solve_matches_box_search(
        (p, n) in (1..=3usize, 1..=3usize),
        seed in prop::collection::vec(-3i64..=3, 9),
        tgt in prop::collection::vec(prop::collection::vec(-4i64..=4, 3), 0..=3),
        shift in prop::collection::vec(-5i64..=5, 3),
    ) {
        let map = IntMatrix::from_rows(n, (0..p).map(|i| int_vec(&seed[i * 3..i * 3 + n])).collect()).unwrap();
        let target = lat(p, &tgt.iter().map(|r| r[..p].to_vec()).collect::<Vec<_>>());
        let shift = int_vec(&shift[..p]);
        let sol = solve(&map, &target, &shift).unwrap();
        for v in box_points(n, 10) {
            let image = map.apply(&v).unwrap();
            let diff: IntVec = image.iter().zip(&shift).map(|(a, b)| a - b).collect();
            let expected = target.contains(&diff);
            prop_assert_eq!(sol.as_ref().map_or(false, |s| s.contains(&v)), expected);
        }
        if let Some(s) = sol {
            let image = map.apply(s.rep()).unwrap();
            let diff: IntVec = image.iter().zip(&shift).map(|(a, b)| a - b).collect();
            prop_assert!(target.contains(&diff));
        }
    }

    #[test]
    fn reduce_is_a_canonical_rep((a, _b) in lattice_pair(3, 6), v in prop::collection::vec(-20i64..=20, 3), w in prop::collection::vec(-3i64..=3, 4)) {
        let v = int_vec(&v[..a.dim()]);
        let mut shifted = v.clone();
        for (row, k) in a.basis().iter().zip(&w) {
            for (x, y) in shifted.iter_mut().zip(row) {
                *x += y * k;
            }
        }
        prop_assert_eq!(a.reduce(&v), a.reduce(&shifted));
        let diff: IntVec = v.iter().zip(a.reduce(&v)).map(|(x, y)| x - y).collect();
        prop_assert!(a.contains(&diff));
    }
}

#[test]
fn dot_and_covolume() {
    assert_eq!(dot(&int_vec(&[1, 2, 3]), &int_vec(&[4, 5, 6])), BigInt::from(32));
    let l = lat(2, &[vec![2, 0], vec![0, 3]]);
    assert_eq!(l.covolume(), IndexValue::Finite(BigInt::from(6)));
    assert_eq!(lat(2, &[vec![1, 1]]).covolume(), IndexValue::Infinite);
}
