mod common;

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{finite_structure, formula_text, names, parse_with, FormulaShape, Shape};
use ppstar::finite::{brute_eval, brute_satisfies, Elem, FiniteModel};
use ppstar::formula::{normalize, parse, render, Formula};
use ppstar::solver::Params;
use ppstar::structure::Structure;

const TINY: Shape = Shape {
    max_order: 16,
    max_rank: 2,
    max_subgroups: 2,
    max_torus_dim: 2,
    max_denominator: 8,
    parameters: 2,
};

const WIDE: FormulaShape = FormulaShape {
    max_bound: 3,
    max_atoms: 4,
    coeff: 5,
    f_constraints: true,
    negation: true,
    params: true,
};

fn solution_set(model: &FiniteModel, s: &Structure, phi: &Formula) -> BTreeSet<Vec<Elem>> {
    let none = Params::new();
    match phi {
        Formula::Pp(p) => brute_eval(model, s, p, &none).unwrap(),
        Formula::NegPp(n) => {
            let inside = brute_eval(model, s, n.inner(), &none).unwrap();
            model.tuples(n.inner().free_arity()).filter(|t| !inside.contains(t)).collect()
        }
        Formula::PpStar(p) => model
            .tuples(p.core().free_arity())
            .filter(|t| brute_satisfies(model, s, p, t, &none).unwrap())
            .collect(),
    }
}

#[test]
fn render_then_parse_is_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut count = 0;
    for i in 0..120 {
        let s = finite_structure(&mut rng, &format!("r{i}"), &TINY);
        for _ in 0..5 {
            let free = names("x", rng.gen_range(0..=3));
            let text = formula_text(&mut rng, &s, &free, &WIDE);
            let ast = parse_with(&s, &text, &free);
            let shown = render(&ast);
            let back = parse(&shown, &s.signature().with_vars(free.clone()))
                .unwrap_or_else(|e| panic!("{text} rendered as {shown}: {e}"));
            assert_eq!(back, ast, "{text} rendered as {shown}");
            assert_eq!(render(&back), shown);
            count += 1;
        }
    }
    assert!(count >= 500);
}

#[test]
fn normalize_preserves_solutions() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut checked = 0;
    for i in 0..100 {
        let s = finite_structure(&mut rng, &format!("n{i}"), &TINY);
        let model = FiniteModel::new(&s).unwrap();
        for _ in 0..4 {
            let free = names("x", rng.gen_range(1..=2));
            let text = formula_text(&mut rng, &s, &free, &WIDE);
            let ast = parse_with(&s, &text, &free);
            let norm = normalize(&ast);
            assert_eq!(normalize(&norm.formula), norm, "normalize is idempotent on {text}");
            assert_eq!(
                solution_set(&model, &s, &ast),
                solution_set(&model, &s, &norm.formula),
                "{text} vs {}",
                render(&norm.formula)
            );
            let core = norm.formula.core();
            let width = core.free_arity() + core.bound_arity() + norm.params.len() + 1;
            assert_eq!(norm.matrices.len(), core.atoms().len());
            assert!(norm.matrices.iter().all(|m| m.rows.iter().all(|r| r.len() == width)));
            checked += 1;
        }
    }
    assert_eq!(checked, 400);
}
