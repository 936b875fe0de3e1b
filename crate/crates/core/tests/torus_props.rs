use std::collections::BTreeSet;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use proptest::prelude::*;

use ppstar::lattice::{int_vec, Lattice};
use ppstar::torus::{approx_member, closure_of, coset_intersect, member, ClosedTorusSubgroup, TorusCoset, TorusPoint};

fn point(dim: usize, max_den: i64) -> impl Strategy<Value = TorusPoint> {
    prop::collection::vec((0i64..max_den, 1..=max_den), dim)
        .prop_map(|c| TorusPoint::from_ratios(&c.iter().map(|&(a, q)| (a % q, q)).collect::<Vec<_>>()))
}

fn gens(dim: usize) -> impl Strategy<Value = Vec<TorusPoint>> {
    prop::collection::vec(point(dim, 12), 0..=3)
}

/// All elements of the (finite) subgroup generated by `gens`.
fn generated(gens: &[TorusPoint], dim: usize) -> BTreeSet<TorusPoint> {
    let mut seen = BTreeSet::from([TorusPoint::zero(dim)]);
    let mut frontier = vec![TorusPoint::zero(dim)];
    while let Some(p) = frontier.pop() {
        for g in gens {
            let q = p.add(g);
            if seen.insert(q.clone()) {
                frontier.push(q);
            }
        }
    }
    seen
}

/// Every point of `T^dim` with coordinates in `(1/q)Z`.
fn grid(dim: usize, q: i64) -> Vec<TorusPoint> {
    let mut out = vec![Vec::new()];
    for _ in 0..dim {
        out = out
            .into_iter()
            .flat_map(|p: Vec<(i64, i64)>| (0..q).map(move |a| [p.clone(), vec![(a, q)]].concat()))
            .collect();
    }
    out.iter().map(|p| TorusPoint::from_ratios(p)).collect()
}

fn lcm_den(points: &[TorusPoint]) -> i64 {
    let q = points.iter().fold(BigInt::one(), |acc, p| num_integer::lcm(acc, p.denominator()));
    i64::try_from(q).unwrap()
}

fn min_distance(x: &TorusPoint, rep: &TorusPoint, elems: &BTreeSet<TorusPoint>) -> BigRational {
    elems.iter().map(|g| x.distance(&rep.add(g))).min().unwrap()
}

fn coset_case(dim: usize) -> impl Strategy<Value = (Vec<TorusPoint>, TorusPoint)> {
    (gens(dim), point(dim, 12))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn cosets_of_one_group_are_equal_or_disjoint(
        (dim, g, r1, r2) in (1..=3usize).prop_flat_map(|d| (Just(d), gens(d), point(d, 12), point(d, 12)))
    ) {
        let h = closure_of(&g, dim).unwrap();
        let c1 = TorusCoset::new(r1, h.clone()).unwrap();
        let c2 = TorusCoset::new(r2, h).unwrap();
        let meet = coset_intersect(&c1, &c2).unwrap();
        prop_assert!(meet.is_empty() || (meet == c1 && meet == c2));
        prop_assert_eq!(meet.is_empty(), !member(c1.rep().unwrap(), &c2).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn closure_is_sound_and_minimal((dim, g) in (1..=3usize).prop_flat_map(|d| (Just(d), gens(d)))) {
        let h = closure_of(&g, dim).unwrap();
        let elems = generated(&g, dim);
        for x in &g {
            prop_assert!(h.contains(x));
        }
        prop_assert_eq!(h.order(), Some(BigInt::from(elems.len())));
        let q = lcm_den(&g).max(1);
        if q.pow(dim as u32) <= 1728 {
            for x in grid(dim, q) {
                prop_assert_eq!(h.contains(&x), elems.contains(&x));
            }
        }
    }

    #[test]
    fn coset_intersection_is_exact(
        (dim, (g1, r1), (g2, r2), probes) in (1..=2usize).prop_flat_map(|d| {
            (Just(d), coset_case(d), coset_case(d), prop::collection::vec(point(d, 12), 8))
        })
    ) {
        let c1 = TorusCoset::new(r1.clone(), closure_of(&g1, dim).unwrap()).unwrap();
        let c2 = TorusCoset::new(r2.clone(), closure_of(&g2, dim).unwrap()).unwrap();
        let meet = coset_intersect(&c1, &c2).unwrap();
        let e1: BTreeSet<TorusPoint> = generated(&g1, dim).iter().map(|g| r1.add(g)).collect();
        let e2: BTreeSet<TorusPoint> = generated(&g2, dim).iter().map(|g| r2.add(g)).collect();
        let common: BTreeSet<TorusPoint> = e1.intersection(&e2).cloned().collect();
        match &meet {
            TorusCoset::Empty { .. } => prop_assert!(common.is_empty()),
            TorusCoset::Coset { rep, group } => {
                prop_assert!(common.contains(rep));
                prop_assert_eq!(group, &c1.group().unwrap().intersect(c2.group().unwrap()).unwrap());
                prop_assert_eq!(group.order(), Some(BigInt::from(common.len())));
            }
        }
        for x in probes.iter().chain(&common).chain(e1.iter().take(8)) {
            prop_assert_eq!(member(x, &meet).unwrap(), common.contains(x));
            prop_assert_eq!(member(x, &c1).unwrap(), e1.contains(x));
        }
    }

    #[test]
    fn approx_member_matches_nearest_point(
        (dim, (g, r), x) in (1..=2usize).prop_flat_map(|d| (Just(d), coset_case(d), point(d, 12))),
        eps_num in 0i64..=12,
        eps_den in 1i64..=24,
    ) {
        let c = TorusCoset::new(r.clone(), closure_of(&g, dim).unwrap()).unwrap();
        let eps = BigRational::new(eps_num.into(), eps_den.into());
        let nearest = min_distance(&x, &r, &generated(&g, dim));
        prop_assert_eq!(approx_member(&x, &c, &eps).unwrap(), nearest <= eps);
        prop_assert_eq!(approx_member(&x, &c, &BigRational::zero()).unwrap(), member(&x, &c).unwrap());
    }

    #[test]
    fn approx_member_is_monotone(
        (dim, ann, rep, x) in (1..=3usize).prop_flat_map(|d| {
            (Just(d), prop::collection::vec(prop::collection::vec(-3i64..=3, d), 0..=2), point(d, 12), point(d, 12))
        }),
        e1 in 0i64..=20,
        e2 in 0i64..=20,
    ) {
        // A possibly infinite closed subgroup, given by its annihilator.
        let ann = Lattice::from_generators(dim, ann.iter().map(|r| int_vec(r)).collect()).unwrap();
        let c = TorusCoset::new(rep, ClosedTorusSubgroup::from_annihilator(ann)).unwrap();
        let (lo, hi) = (e1.min(e2), e1.max(e2));
        let lo = BigRational::new(lo.into(), 40.into());
        let hi = BigRational::new(hi.into(), 40.into());
        if approx_member(&x, &c, &lo).unwrap() {
            prop_assert!(approx_member(&x, &c, &hi).unwrap());
        }
        prop_assert_eq!(approx_member(&x, &c, &BigRational::zero()).unwrap(), member(&x, &c).unwrap());
        if member(&x, &c).unwrap() {
            prop_assert!(approx_member(&x, &c, &lo).unwrap());
        }
    }
}

#[test]
fn subtorus_membership() {
    // Annihilator (1, -1): the diagonal circle in T^2.
    let h = ClosedTorusSubgroup::from_annihilator(Lattice::from_generators(2, vec![int_vec(&[1, -1])]).unwrap());
    assert_eq!(h.order(), None);
    assert!(h.contains(&TorusPoint::from_ratios(&[(1, 7), (1, 7)])));
    assert!(!h.contains(&TorusPoint::from_ratios(&[(1, 7), (2, 7)])));
    let c = TorusCoset::new(TorusPoint::from_ratios(&[(0, 1), (1, 2)]), h).unwrap();
    let x = TorusPoint::from_ratios(&[(1, 10), (1, 2)]);
    assert!(!approx_member(&x, &c, &BigRational::new(1.into(), 21.into())).unwrap());
    assert!(approx_member(&x, &c, &BigRational::new(1.into(), 20.into())).unwrap());
}
