use std::collections::HashMap;

use jetsym::catalog;
use jetsym::expr::{Coordinate, Expression, NoFunctions};
use jetsym::field::VectorField;
use jetsym::jet::JetSpace;
use jetsym::manifold::build_manifold;
use jetsym::oracle::{Chart, Flow};
use jetsym::session::Item;
use proptest::prelude::*;

fn space() -> JetSpace {
    JetSpace::declare(&["t", "x", "y"], &["u"], 3, None).unwrap()
}

fn leaves(s: &JetSpace) -> Vec<Coordinate> {
    let mut out = s.independents();
    out.extend(s.jets_up_to(1));
    out
}

#[derive(Debug, Clone)]
enum Tree {
    Leaf(usize),
    Int(i64),
    Add(Box<Tree>, Box<Tree>),
    Sub(Box<Tree>, Box<Tree>),
    Mul(Box<Tree>, Box<Tree>),
    Div(Box<Tree>, Box<Tree>),
}

fn tree(depth: u32) -> impl Strategy<Value = Tree> {
    let leaf = prop_oneof![(0usize..7).prop_map(Tree::Leaf), (-3i64..=3).prop_map(Tree::Int)];
    leaf.prop_recursive(depth, 24, 2, |inner| {
        prop_oneof![
            3 => (inner.clone(), inner.clone()).prop_map(|(a, b)| Tree::Add(Box::new(a), Box::new(b))),
            2 => (inner.clone(), inner.clone()).prop_map(|(a, b)| Tree::Sub(Box::new(a), Box::new(b))),
            3 => (inner.clone(), inner.clone()).prop_map(|(a, b)| Tree::Mul(Box::new(a), Box::new(b))),
            1 => (inner.clone(), inner).prop_map(|(a, b)| Tree::Div(Box::new(a), Box::new(b))),
        ]
    })
}

fn build(t: &Tree, cs: &[Coordinate]) -> Expression {
    match t {
        Tree::Leaf(i) => Expression::coord(&cs[*i]),
        Tree::Int(n) => Expression::int(*n),
        Tree::Add(a, b) => &build(a, cs) + &build(b, cs),
        Tree::Sub(a, b) => &build(a, cs) - &build(b, cs),
        Tree::Mul(a, b) => &build(a, cs) * &build(b, cs),
        Tree::Div(a, b) => {
            let (a, b) = (build(a, cs), build(b, cs));
            a.checked_div(&b).unwrap_or(a)
        }
    }
}

/// Direct floating-point evaluation of the tree, following the same
/// zero-divisor fallback as `build`.
fn eval_tree(t: &Tree, cs: &[Coordinate], vals: &[f64]) -> f64 {
    match t {
        Tree::Leaf(i) => vals[*i],
        Tree::Int(n) => *n as f64,
        Tree::Add(a, b) => eval_tree(a, cs, vals) + eval_tree(b, cs, vals),
        Tree::Sub(a, b) => eval_tree(a, cs, vals) - eval_tree(b, cs, vals),
        Tree::Mul(a, b) => eval_tree(a, cs, vals) * eval_tree(b, cs, vals),
        Tree::Div(a, b) => {
            if build(b, cs).is_zero() {
                eval_tree(a, cs, vals)
            } else {
                eval_tree(a, cs, vals) / eval_tree(b, cs, vals)
            }
        }
    }
}

fn point(cs: &[Coordinate], vals: &[f64]) -> HashMap<Coordinate, f64> {
    cs.iter().cloned().zip(vals.iter().copied()).collect()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

fn values() -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(prop_oneof![-2.0..-0.5f64, 0.5..2.0f64], 7)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn canonical_form_is_confluent(a in tree(3), b in tree(3), c in tree(2)) {
        let s = space();
        let cs = leaves(&s);
        let (a, b, c) = (build(&a, &cs), build(&b, &cs), build(&c, &cs));
        prop_assert_eq!(&a + &b, &b + &a);
        prop_assert_eq!(&(&a + &b) + &c, &a + &(&b + &c));
        prop_assert_eq!(&a * &(&b + &c), &(&a * &b) + &(&a * &c));
        prop_assert_eq!(&(&a + &b) * &(&a - &b), &(&a * &a) - &(&b * &b));
        if let Some(q) = a.checked_div(&b) {
            prop_assert_eq!(&q * &b, a.clone());
        }
        prop_assert_eq!(s.parse(&a.to_string()).unwrap(), a);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn evaluation_is_a_homomorphism(a in tree(3), b in tree(3), vals in values()) {
        let s = space();
        let cs = leaves(&s);
        let p = point(&cs, &vals);
        let (ea, eb) = (build(&a, &cs), build(&b, &cs));
        let (Ok(va), Ok(vb)) = (ea.eval_numeric(&p, &NoFunctions), eb.eval_numeric(&p, &NoFunctions)) else {
            return Ok(());
        };
        prop_assume!(va.is_finite() && vb.is_finite() && va.abs() < 1e6 && vb.abs() < 1e6);
        let direct = eval_tree(&a, &cs, &vals);
        prop_assume!(direct.is_finite());
        prop_assert!(close(va, direct, 1e-8), "{va} vs {direct}");
        prop_assert!(close((&ea + &eb).eval_numeric(&p, &NoFunctions).unwrap(), va + vb, 1e-9));
        prop_assert!(close((&ea * &eb).eval_numeric(&p, &NoFunctions).unwrap(), va * vb, 1e-9));
    }

    #[test]
    fn total_derivatives_commute(a in tree(3)) {
        let s = space();
        let e = build(&a, &leaves(&s));
        for i in 0..3 {
            for j in 0..3 {
                let ij = s.total_derivative(&s.total_derivative(&e, i).unwrap(), j).unwrap();
                let ji = s.total_derivative(&s.total_derivative(&e, j).unwrap(), i).unwrap();
                prop_assert_eq!(ij, ji);
            }
        }
    }

    #[test]
    fn total_derivative_obeys_leibniz(a in tree(3), b in tree(3), i in 0usize..3) {
        let s = space();
        let cs = leaves(&s);
        let (a, b) = (build(&a, &cs), build(&b, &cs));
        let lhs = s.total_derivative(&(&a * &b), i).unwrap();
        let rhs = &(&s.total_derivative(&a, i).unwrap() * &b) + &(&a * &s.total_derivative(&b, i).unwrap());
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn prolongation_satisfies_every_recursion_step(
        xi in proptest::collection::vec(tree(2), 3),
        eta in tree(2),
    ) {
        let s = JetSpace::declare(&["t", "x", "y"], &["u"], 3, None).unwrap();
        let point_coords: Vec<Coordinate> = {
            let mut v = s.independents();
            v.push(s.dependent(0));
            v
        };
        // point field: coefficients over t, x, y, u only
        let remap = |t: &Tree| -> Expression {
            let mut cs = point_coords.clone();
            cs.extend(point_coords.iter().take(3).cloned());
            build(t, &cs)
        };
        let xi: Vec<Expression> = xi.iter().map(remap).collect();
        let eta = vec![remap(&eta)];
        let field = VectorField::new("X", xi.clone(), eta, &s).unwrap();
        let pf = field.prolong(&s, 2).unwrap();
        for k in 0..2 {
            for multi in s.multi_indices(k) {
                let base = pf.coefficient(&s.jet(0, &multi)).unwrap().clone();
                for i in 0..3 {
                    let mut up = multi.clone();
                    up.push(i as u8);
                    up.sort();
                    let mut expected = s.total_derivative(&base, i).unwrap();
                    for (j, xij) in xi.iter().enumerate() {
                        let mut uj = multi.clone();
                        uj.push(j as u8);
                        uj.sort();
                        let term = &Expression::coord(&s.jet(0, &uj)) * &s.total_derivative(xij, i).unwrap();
                        expected = &expected - &term;
                    }
                    prop_assert_eq!(pf.coefficient(&s.jet(0, &up)).unwrap(), &expected);
                }
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn manifold_reduction_is_idempotent(a in tree(3)) {
        let s = catalog::session().unwrap();
        let space = s.space().unwrap().clone();
        let Some(Item::Conditions(c)) = s.get("@catalog/cond-Lorentz") else { unreachable!() };
        let m = build_manifold(&space, &c.resolved_for(2)).unwrap();
        let mut cs = space.independents();
        cs.extend(space.jets_up_to(1));
        let e = build(&a, &cs);
        let once = m.reduce(&e).unwrap();
        prop_assert_eq!(m.reduce(&once).unwrap(), once);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn flows_compose(s1 in -0.6..0.6f64, s2 in -0.6..0.6f64, vals in proptest::collection::vec(-2.0..2.0f64, 13)) {
        let s = catalog::session().unwrap();
        let space = s.space().unwrap().clone();
        for op in ["@catalog/rotation.J", "@catalog/lorentz.J01", "(t + x)*d/dt + u^2*d/du"] {
            let field = s.operator(op).unwrap();
            let pf = field.prolong(&space, 2).unwrap();
            let chart = Chart::new(&space, 2);
            let flow = Flow::new(&pf, &chart).unwrap();
            let mut p = vec![0.0; chart.len()];
            p[..13].copy_from_slice(&vals);
            // keep the nonlinear field away from blow-up
            p[3] = p[3].clamp(-0.5, 0.5);
            let Ok(a) = flow.integrate(&p, s1, &NoFunctions) else { continue };
            let Ok(ab) = flow.integrate(&a.point, s2, &NoFunctions) else { continue };
            let Ok(direct) = flow.integrate(&p, s1 + s2, &NoFunctions) else { continue };
            for (x, y) in ab.point.iter().zip(&direct.point) {
                prop_assert!(close(*x, *y, 1e-9), "{op}: {x} vs {y}");
            }
        }
    }
}
