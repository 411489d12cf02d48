use std::collections::HashMap;

use super::*;
use crate::jet::JetSpace;

fn space() -> JetSpace {
    JetSpace::declare(&["t", "x", "y"], &["u"], 2, None)
        .unwrap()
        .with_function("f", 4)
        .unwrap()
        .with_function("K1", 3)
        .unwrap()
        .with_parameters(&["lambda0"])
        .unwrap()
}

fn p(s: &str) -> Expression {
    space().parse(s).unwrap()
}

fn c(s: &str) -> Coordinate {
    p(s).as_coord().unwrap().clone()
}

#[test]
fn parse_examples() {
    let e = p("u_x^2 + u_y^2");
    assert_eq!(e.numer().len(), 2);
    assert!(e.is_polynomial());
    assert!(p("0").equals_zero());
    assert!(p("(x*u_y - y*u_x) - (x*u_y - y*u_x)").equals_zero());
    assert!(!p("u_y").equals_zero());
    assert!(p("u_x - u_x").equals_zero());
}

#[test]
fn parse_errors() {
    let s = space();
    assert!(matches!(s.parse("u_x +"), Err(ExprError::Syntax { .. })));
    assert!(matches!(s.parse("u_x + z"), Err(ExprError::Undeclared { pos: 6, .. })));
    assert!(matches!(s.parse("u_xyt"), Err(ExprError::OrderExceeded { .. })));
    assert!(matches!(s.parse("f(t, x)"), Err(ExprError::Arity { .. })));
    assert!(matches!(s.parse("x/0"), Err(ExprError::Syntax { .. })));
    assert!(matches!(s.parse("(x"), Err(ExprError::Syntax { .. })));
}

#[test]
fn canonical_cancellation() {
    assert_eq!(p("(x^2 - y^2)/(x - y)"), p("x + y"));
    assert_eq!(p("(2*x)/(4*x*y)"), p("1/(2*y)"));
    assert_eq!(p("u_x/x + u_y/y"), p("(y*u_x + x*u_y)/(x*y)"));
    // monic denominator
    let e = p("1/(2*x + 4)");
    assert!(e.denom().leading_coeff().is_one());
}

#[test]
fn diff_examples() {
    assert_eq!(p("u_x^2 + u_y^2").diff(&c("u_x")), p("2*u_x"));
    assert_eq!(p("f(t,x,y,u)").diff(&c("u")), p("f_{4}(t,x,y,u)"));
    assert_eq!(p("u_x/x").diff(&c("x")), p("-u_x/x^2"));
    // chain rule through a composite argument
    assert_eq!(
        p("f(t, x^2 + y^2, y, u)").diff(&c("x")),
        p("2*x*f_{2}(t, x^2 + y^2, y, u)")
    );
}

#[test]
fn substitute_examples() {
    let mut rules = Rules::new();
    rules.insert(c("u_y"), p("y*u_x/x"));
    assert!(p("x*u_y - y*u_x").substitute(&rules).unwrap().equals_zero());
    assert!(p("y*u_x/x^2 - u_y/x").substitute(&rules).unwrap().equals_zero());
    assert_eq!(p("u_x").substitute(&Rules::new()).unwrap(), p("u_x"));
    let mut zero = Rules::new();
    zero.insert(c("u_x"), Expression::zero());
    zero.insert(c("u_y"), Expression::zero());
    assert!(p("u_x^2 + u_y^2").substitute(&zero).unwrap().equals_zero());
}

#[test]
fn substitute_errors() {
    let mut cyc = Rules::new();
    cyc.insert(c("u_x"), p("u_y"));
    cyc.insert(c("u_y"), p("u_x"));
    assert!(matches!(
        p("u_x").substitute(&cyc),
        Err(ExprError::CyclicRules { .. })
    ));
    let mut z = Rules::new();
    z.insert(c("u_x"), Expression::zero());
    assert!(matches!(
        p("u_y/u_x").substitute(&z),
        Err(ExprError::DomainRestriction { .. })
    ));
}

#[test]
fn substitute_is_idempotent_for_triangular_rules() {
    let mut rules = Rules::new();
    rules.insert(c("u_y"), p("y*u_x/x"));
    rules.insert(c("u_xy"), p("(y*u_xx - y*u_x/x)/x"));
    let e = p("u_y^2 + u_xy*u_x + f(t, x, u_y, u)");
    let once = e.substitute(&rules).unwrap();
    assert_eq!(once.substitute(&rules).unwrap(), once);
}

#[test]
fn substitute_inside_atoms() {
    let mut rules = Rules::new();
    rules.insert(c("u_x"), Expression::zero());
    let e = p("u_x*f(t, x, u_x, u) + f(t, u_x, y, u)");
    assert_eq!(e.substitute(&rules).unwrap(), p("f(t, 0, y, u)"));
}

#[test]
fn eval_examples() {
    let mut pt = HashMap::new();
    pt.insert(c("u_x"), 3.0);
    pt.insert(c("u_y"), 4.0);
    pt.insert(c("x"), 1.0);
    pt.insert(c("y"), 2.0);
    pt.insert(c("t"), 3.0);
    assert_eq!(p("u_x^2 + u_y^2").eval_numeric(&pt, &NoFunctions).unwrap(), 25.0);
    assert_eq!(p("x^2 + y^2").eval_numeric(&pt, &NoFunctions).unwrap(), 5.0);
    assert_eq!(p("t^2 - x^2 - y^2").eval_numeric(&pt, &NoFunctions).unwrap(), 4.0);
    assert!(matches!(
        p("u_t").eval_numeric(&pt, &NoFunctions),
        Err(ExprError::Unbound { .. })
    ));
    pt.insert(c("x"), 0.0);
    assert!(matches!(
        p("u_x/x").eval_numeric(&pt, &NoFunctions),
        Err(ExprError::DivisionByZero)
    ));
}

#[test]
fn print_round_trip() {
    let s = space();
    for text in [
        "u_x^2 + u_y^2",
        "-u_y",
        "y*u_x/x^2 - u_y/x",
        "(u_xy/(x*y)) - 3/2*u_x/x^3",
        "f_{1,4}(t, x^2 + y^2, y/x, u)*u_t - lambda0*u_t^2/t^2",
        "K1_{2}(t, y, u)*u_x",
        "(t^2 - x^2)/(2*t + x)",
        "-7/3",
    ] {
        let e = s.parse(text).unwrap();
        let printed = e.to_string();
        let again = s.parse(&printed).unwrap();
        assert_eq!(e, again, "{text} -> {printed}");
        assert_eq!(printed, again.to_string());
    }
    assert_eq!(p("x*u_y - y*u_x").to_string(), "x*u_y - y*u_x");
}

#[test]
fn solve_affine() {
    let (k, r) = p("t*u_x + x*u_t").solve_affine(&c("u_x")).unwrap();
    assert_eq!(k, p("t"));
    assert_eq!(r, p("x*u_t"));
    assert!(p("u_x^2 + 1").solve_affine(&c("u_x")).is_none());
    assert!(p("f(t,x,y,u_x)").solve_affine(&c("u_x")).is_none());
    assert!(p("1/u_x").solve_affine(&c("u_x")).is_none());
}

#[test]
fn singular_factors() {
    let f = p("u_x/(x^2*(t^2 - x^2 - y^2))").singular_factors();
    assert!(f.contains(&p("x")));
    assert!(f.contains(&p("x^2 + y^2 - t^2")));
    assert_eq!(f.len(), 2);
}
