use jetsym::catalog;
use jetsym::expr::{Coordinate, Expression, NoFunctions, Rules};
use jetsym::jet::JetSpace;
use jetsym::oracle::{numeric_invariance, Chart, Flow, OracleOptions};
use jetsym::session::Session;

fn session() -> Session {
    catalog::session().unwrap()
}

fn q(n: i64, d: i64) -> Expression {
    Expression::int(n).checked_div(&Expression::int(d)).unwrap()
}

fn var(s: &JetSpace, name: &str) -> Expression {
    s.parse(name).unwrap()
}

/// Value and derivatives up to order 2 of `g(t, x, y)` at `base`, keyed by
/// the multi-index of each derivative.
fn derivatives(s: &JetSpace, g: &Expression, base: [f64; 3]) -> Vec<(Vec<u8>, f64)> {
    let xs = s.independents();
    let at = |e: &Expression| {
        e.eval_with(&|c: &Coordinate| xs.iter().position(|x| x == c).map(|i| base[i]), &NoFunctions)
            .unwrap()
    };
    s.jets_up_to(2)
        .iter()
        .map(|c| {
            let mut d = g.clone();
            for &i in c.multi_index() {
                d = d.diff(&xs[i as usize]);
            }
            (c.multi_index().to_vec(), at(&d))
        })
        .collect()
}

/// Compares the integrated prolonged flow against the 2-jet of the
/// transformed function `u~(X) = U(g(inverse(X)))`, where `lift` returns
/// `U`, `U'` and `U''` at a value and the chain rule assembles the jet.
fn contact_lift(op: &str, theta: f64, inverse: [Expression; 3], lift: impl Fn(f64) -> [f64; 3]) {
    let ses = session();
    let s = ses.space().unwrap().clone();
    let field = ses.operator(op).unwrap();
    let pf = field.prolong(&s, 2).unwrap();
    let chart = Chart::new(&s, 2);
    let flow = Flow::new(&pf, &chart).unwrap();
    let g = s.parse("1/3*t*x^2 - x*y + 2*y^3 + t^2*y - 3/2*x + 1/2").unwrap();
    let base = [0.7, -0.4, 1.1];
    let xs = s.independents();
    let mut start: Vec<(Coordinate, f64)> = xs.iter().cloned().zip(base).collect();
    start.extend(s.jets_up_to(2).into_iter().zip(derivatives(&s, &g, base)).map(|(c, (_, v))| (c, v)));
    let moved = flow.integrate(&chart.point(&start), theta, &NoFunctions).unwrap();
    assert!(moved.error_estimate < 1e-10, "{op}: error estimate {}", moved.error_estimate);
    let rules: Rules = xs.iter().cloned().zip(inverse).collect();
    let h = g.substitute_simultaneous(&rules).unwrap();
    let jet = derivatives(&s, &h, [moved.point[0], moved.point[1], moved.point[2]]);
    let d = |m: &[u8]| jet.iter().find(|(k, _)| k == m).unwrap().1;
    let [u, du, ddu] = lift(d(&[]));
    for (k, c) in chart.coords().iter().enumerate() {
        if c.is_jet() && c.order() <= 2 {
            let m = c.multi_index();
            let want = match m.len() {
                0 => u,
                1 => du * d(m),
                _ => ddu * d(&m[..1]) * d(&m[1..]) + du * d(m),
            };
            assert!(
                (moved.point[k] - want).abs() < 1e-9 * (1.0 + want.abs()),
                "{op}: {} flowed to {} but the lifted function gives {want}",
                c.label(),
                moved.point[k]
            );
        }
    }
}

#[test]
fn rotation_flow_is_a_contact_lift() {
    let s = session().space().unwrap().clone();
    // cos = 3/5, sin = 4/5
    let theta = (4.0f64).atan2(3.0);
    let (t, x, y) = (var(&s, "t"), var(&s, "x"), var(&s, "y"));
    let inverse = [t, &(&q(3, 5) * &x) + &(&q(4, 5) * &y), &(&q(-4, 5) * &x) + &(&q(3, 5) * &y)];
    contact_lift("@catalog/rotation.J", theta, inverse, |v| [v, 1.0, 0.0]);
}

#[test]
fn boost_flow_is_a_contact_lift() {
    let s = session().space().unwrap().clone();
    // cosh = 5/4, sinh = 3/4
    let theta = (0.75f64).asinh();
    let (t, x, y) = (var(&s, "t"), var(&s, "x"), var(&s, "y"));
    let inverse = [&(&q(5, 4) * &t) - &(&q(3, 4) * &x), &(&q(5, 4) * &x) - &(&q(3, 4) * &t), y];
    contact_lift("@catalog/lorentz.J01", theta, inverse, |v| [v, 1.0, 0.0]);
}

#[test]
fn scaling_with_dependent_weight_is_a_contact_lift() {
    let s = session().space().unwrap().clone();
    // x -> 2x, u -> 4u
    let theta = 2.0f64.ln();
    let half = |n: &str| &q(1, 2) * &var(&s, n);
    let inverse = [half("t"), half("x"), half("y")];
    contact_lift("t*d/dt + x*d/dx + y*d/dy + 2*u*d/du", theta, inverse, |v| [4.0 * v, 4.0, 0.0]);
}

#[test]
fn nonlinear_dependent_flow_is_a_contact_lift() {
    let s = session().space().unwrap().clone();
    // u -> u / (1 - u/16), far from the blow-up at the sample point
    let inverse = [var(&s, "t"), var(&s, "x"), var(&s, "y")];
    contact_lift("u^2*d/du", 1.0 / 16.0, inverse, |v| {
        let w = 1.0 - v / 16.0;
        [v / w, 1.0 / (w * w), 1.0 / (8.0 * w * w * w)]
    });
}

#[test]
fn closed_form_agrees_with_integration() {
    let ses = session();
    let s = ses.space().unwrap().clone();
    let chart = Chart::new(&s, 2);
    let p: Vec<f64> = (0..chart.len()).map(|i| 0.3 + 0.17 * i as f64 - 0.05 * (i * i % 7) as f64).collect();
    for op in [
        "@catalog/rotation.J",
        "@catalog/lorentz.J01",
        "@catalog/lorentz.J02",
        "@catalog/translation.x",
        "@catalog/translation.y",
    ] {
        let pf = ses.operator(op).unwrap().prolong(&s, 2).unwrap();
        let flow = Flow::new(&pf, &chart).unwrap();
        assert!(flow.has_closed_form(), "{op}");
        for theta in [-1.0, -0.3, 0.1, 0.7, 1.0] {
            let exact = flow.closed_form(&p, theta).unwrap();
            let numeric = flow.integrate(&p, theta, &NoFunctions).unwrap();
            for (a, b) in exact.iter().zip(&numeric.point) {
                assert!((a - b).abs() < 1e-9 * (1.0 + a.abs()), "{op} at {theta}: {a} vs {b}");
            }
        }
        assert_eq!(flow.flow(&p, 0.0, &NoFunctions).unwrap().point, p);
    }
}

#[test]
fn quarter_turn_rotates_base_and_gradient() {
    let ses = session();
    let s = ses.space().unwrap().clone();
    let pf = ses.operator("@catalog/rotation.J").unwrap().prolong(&s, 1).unwrap();
    let chart = Chart::new(&s, 1);
    let flow = Flow::new(&pf, &chart).unwrap();
    let c = |n: &str| s.parse(n).unwrap().as_coord().unwrap().clone();
    let p = chart.point(&[(c("x"), 1.0), (c("u_x"), 1.0)]);
    let mut q = p.clone();
    for _ in 0..8 {
        q = flow.integrate(&q, std::f64::consts::FRAC_PI_2 / 8.0, &NoFunctions).unwrap().point;
    }
    let at = |n: &str| q[chart.index_of(&c(n)).unwrap()];
    assert!(at("x").abs() < 1e-10 && (at("y") - 1.0).abs() < 1e-10);
    assert!(at("u_x").abs() < 1e-10 && (at("u_y") - 1.0).abs() < 1e-10);
}

#[test]
fn numeric_invariance_examples() {
    let ses = session();
    let s = ses.space().unwrap().clone();
    let pf = ses.operator("@catalog/rotation.J").unwrap().prolong(&s, 1).unwrap();
    let opts = OracleOptions::default();
    let inv = numeric_invariance(&pf, &[s.parse("u_x^2 + u_y^2").unwrap()], None, &opts, &NoFunctions).unwrap();
    assert!(inv.invariant && inv.max_deviation < 1e-11, "{inv:?}");
    assert_eq!(inv.points, 20);
    let not = numeric_invariance(&pf, &[s.parse("u_x").unwrap()], None, &opts, &NoFunctions).unwrap();
    assert!(!not.invariant && not.max_deviation > 1e-3);
}
