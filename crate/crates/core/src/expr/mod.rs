//! Exact symbolic expressions.
//!
//! An [`Expression`] is an element of the field of rational functions over ℚ
//! whose variables are jet [`Coordinate`]s and opaque function applications
//! ([`Atom`]). Every value is kept in canonical form: numerator and
//! denominator are coprime and the denominator is monic in the graded
//! lexicographic order, so two expressions are equal iff their canonical
//! forms are identical and the zero test is exact.

mod coord;
mod eval;
mod gcd;
mod parse;
mod poly;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

pub use coord::{CoordKind, Coordinate, MultiIndex};
pub use eval::{CompiledExpr, FunctionTable, NoFunctions, PolyFunctions};
pub use gcd::gcd;
pub use parse::{parse_expression, SymbolTable, Symbol};
pub use poly::{mono_cmp, Atom, Mono, Poly, Var};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("undeclared symbol `{name}` at {pos}")]
    Undeclared { name: String, pos: usize },
    #[error("derivative `{name}` has order {order}, exceeding the declared maximum {max}")]
    OrderExceeded {
        name: String,
        order: usize,
        max: usize,
    },
    #[error("function `{name}` expects {expected} arguments, got {got}")]
    Arity {
        name: String,
        expected: usize,
        got: usize,
    },
    #[error("division by zero")]
    DivisionByZero,
    #[error("expression undefined where {vanishing} = 0")]
    DomainRestriction { vanishing: String },
    #[error("substitution rules are cyclic: right-hand side mentions `{coordinate}`")]
    CyclicRules { coordinate: String },
    #[error("no numeric binding for `{symbol}`")]
    Unbound { symbol: String },
}

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct Rational {
    num: Poly,
    den: Poly,
}

/// Canonical rational function. Cheap to clone; immutable.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Expression(Arc<Rational>);

/// Substitution map, applied simultaneously.
pub type Rules = BTreeMap<Coordinate, Expression>;

fn q(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

impl Expression {
    fn raw(num: Poly, den: Poly) -> Self {
        Expression(Arc::new(Rational { num, den }))
    }

    /// Normalizes `num/den`; `None` when `den` is zero.
    pub fn from_parts(num: Poly, den: Poly) -> Option<Self> {
        if den.is_zero() {
            return None;
        }
        if num.is_zero() {
            return Some(Self::zero());
        }
        if den.is_constant() {
            let c = den.constant_value().unwrap();
            return Some(Self::raw(num.scale(&c.recip()), Poly::one()));
        }
        let g = gcd(&num, &den);
        let (num, den) = if g.is_one() {
            (num, den)
        } else {
            (num.exact_div(&g).unwrap(), den.exact_div(&g).unwrap())
        };
        Some(Self::monic_den(num, den))
    }

    fn monic_den(num: Poly, den: Poly) -> Self {
        let (den, lc) = den.monic();
        let num = if lc.is_one() {
            num
        } else {
            num.scale(&lc.recip())
        };
        Self::raw(num, den)
    }

    pub fn from_poly(p: Poly) -> Self {
        Self::raw(p, Poly::one())
    }

    pub fn zero() -> Self {
        Self::from_poly(Poly::zero())
    }

    pub fn one() -> Self {
        Self::from_poly(Poly::one())
    }

    pub fn int(n: i64) -> Self {
        Self::from_poly(Poly::constant(q(n)))
    }

    pub fn rational(c: BigRational) -> Self {
        Self::from_poly(Poly::constant(c))
    }

    pub fn coord(c: &Coordinate) -> Self {
        Self::from_poly(Poly::var(Var::Coord(c.clone())))
    }

    pub fn atom(a: Atom) -> Self {
        Self::from_poly(Poly::var(Var::Atom(a)))
    }

    /// Applied opaque function `name(args)`.
    pub fn apply(name: &str, args: Vec<Expression>) -> Self {
        Self::atom(Atom::new(name, &[], args))
    }

    pub fn var(v: Var) -> Self {
        Self::from_poly(Poly::var(v))
    }

    pub fn numer(&self) -> &Poly {
        &self.0.num
    }

    pub fn denom(&self) -> &Poly {
        &self.0.den
    }

    pub fn numerator(&self) -> Expression {
        Self::from_poly(self.0.num.clone())
    }

    pub fn denominator(&self) -> Expression {
        Self::from_poly(self.0.den.clone())
    }

    /// Exact zero test on the canonical form.
    pub fn equals_zero(&self) -> bool {
        self.0.num.is_zero()
    }

    pub fn is_zero(&self) -> bool {
        self.equals_zero()
    }

    pub fn is_one(&self) -> bool {
        self.0.num.is_one() && self.0.den.is_one()
    }

    pub fn is_polynomial(&self) -> bool {
        self.0.den.is_one()
    }

    pub fn constant_value(&self) -> Option<BigRational> {
        if self.0.den.is_one() {
            self.0.num.constant_value()
        } else {
            None
        }
    }

    pub fn is_constant(&self) -> bool {
        self.constant_value().is_some()
    }

    /// The single variable this expression consists of, if any.
    pub fn as_var(&self) -> Option<&Var> {
        let n = &self.0.num;
        if !self.0.den.is_one() || !n.is_monomial() || !n.leading_coeff().is_one() {
            return None;
        }
        match n.leading_mono()?.factors() {
            [(v, 1)] => Some(v),
            _ => None,
        }
    }

    pub fn as_coord(&self) -> Option<&Coordinate> {
        match self.as_var()? {
            Var::Coord(c) => Some(c),
            Var::Atom(_) => None,
        }
    }

    pub fn checked_div(&self, other: &Expression) -> Option<Expression> {
        if other.is_zero() {
            return None;
        }
        let (a, b) = (&self.0.num, &self.0.den);
        let (c, d) = (&other.0.num, &other.0.den);
        Some(mul_parts(a, b, d, c))
    }

    pub fn recip(&self) -> Option<Expression> {
        Expression::one().checked_div(self)
    }

    pub fn pow(&self, e: i32) -> Option<Expression> {
        if e >= 0 {
            let e = e as u32;
            Some(Self::raw(self.0.num.pow(e), self.0.den.pow(e)).renormalized())
        } else {
            self.recip()?.pow(-e)
        }
    }

    fn renormalized(self) -> Self {
        // numerator/denominator powers of a coprime pair stay coprime; only
        // the leading coefficient needs fixing
        Self::monic_den(self.0.num.clone(), self.0.den.clone())
    }

    pub fn scale(&self, c: &BigRational) -> Expression {
        if c.is_zero() {
            return Self::zero();
        }
        Self::raw(self.0.num.scale(c), self.0.den.clone())
    }

    /// Top-level variables of numerator and denominator.
    pub fn vars(&self) -> BTreeSet<Var> {
        let mut s = self.0.num.vars();
        s.extend(self.0.den.vars());
        s
    }

    /// Every coordinate occurring anywhere, including inside atom arguments.
    pub fn coordinates(&self) -> BTreeSet<Coordinate> {
        let mut out = BTreeSet::new();
        self.collect_coordinates(&mut out);
        out
    }

    fn collect_coordinates(&self, out: &mut BTreeSet<Coordinate>) {
        for v in self.vars() {
            match v {
                Var::Coord(c) => {
                    out.insert(c);
                }
                Var::Atom(a) => {
                    for arg in a.args() {
                        arg.collect_coordinates(out);
                    }
                }
            }
        }
    }

    /// Every atom occurring anywhere, outermost first.
    pub fn atoms(&self) -> BTreeSet<Atom> {
        let mut out = BTreeSet::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms(&self, out: &mut BTreeSet<Atom>) {
        for v in self.vars() {
            if let Var::Atom(a) = v {
                for arg in a.args() {
                    arg.collect_atoms(out);
                }
                out.insert(a);
            }
        }
    }

    pub fn mentions(&self, c: &Coordinate) -> bool {
        self.vars().iter().any(|v| match v {
            Var::Coord(d) => d == c,
            Var::Atom(a) => a.args().iter().any(|e| e.mentions(c)),
        })
    }

    fn mentions_any(&self, rules: &Rules) -> bool {
        self.vars().iter().any(|v| var_affected(v, rules))
    }

    /// Highest derivative order of any jet coordinate; 0 when none.
    pub fn order(&self) -> usize {
        self.coordinates()
            .iter()
            .filter(|c| c.is_jet())
            .map(|c| c.order())
            .max()
            .unwrap_or(0)
    }

    /// Partial derivative treating every coordinate as an independent symbol.
    /// Atoms differentiate by the chain rule through their arguments.
    pub fn diff(&self, c: &Coordinate) -> Expression {
        let (n, d) = (&self.0.num, &self.0.den);
        let dn = poly_diff(n, c);
        if d.is_one() {
            return dn;
        }
        let dd = poly_diff(d, c);
        if dn.is_zero() && dd.is_zero() {
            return Self::zero();
        }
        let num = &(&dn * &Self::from_poly(d.clone())) - &(&Self::from_poly(n.clone()) * &dd);
        let den = Self::from_poly(d.mul(d));
        num.checked_div(&den).expect("nonzero denominator")
    }

    /// Writes `self = coeff * c + rest` when `self` is affine in `c`, with `c`
    /// absent from the denominator and from every atom argument.
    pub fn solve_affine(&self, c: &Coordinate) -> Option<(Expression, Expression)> {
        let v = Var::Coord(c.clone());
        if self.0.den.contains_var(&v) {
            return None;
        }
        let inside_atom = self.vars().iter().any(|w| match w {
            Var::Atom(a) => a.args().iter().any(|e| e.mentions(c)),
            Var::Coord(_) => false,
        });
        if inside_atom || self.0.num.degree_in(&v) != 1 {
            return None;
        }
        let parts = self.0.num.split_by(&v);
        let den = Self::from_poly(self.0.den.clone());
        let coeff = Self::from_poly(parts.get(&1).cloned().unwrap_or_else(Poly::zero))
            .checked_div(&den)
            .unwrap();
        let rest = Self::from_poly(parts.get(&0).cloned().unwrap_or_else(Poly::zero))
            .checked_div(&den)
            .unwrap();
        Some((coeff, rest))
    }

    /// Simultaneous substitution. Rejects rules whose right-hand sides mention
    /// a left-hand-side coordinate.
    pub fn substitute(&self, rules: &Rules) -> Result<Expression, ExprError> {
        for rhs in rules.values() {
            if let Some(c) = rules.keys().find(|c| rhs.mentions(c)) {
                return Err(ExprError::CyclicRules {
                    coordinate: c.label().to_string(),
                });
            }
        }
        self.substitute_simultaneous(rules)
    }

    /// Simultaneous substitution without the acyclicity check (for maps such
    /// as `x -> x + 1`).
    pub fn substitute_simultaneous(&self, rules: &Rules) -> Result<Expression, ExprError> {
        if rules.is_empty() || !self.mentions_any(rules) {
            return Ok(self.clone());
        }
        let mut cache = BTreeMap::new();
        let num = poly_subst(&self.0.num, rules, &mut cache)?;
        if self.0.den.is_one() {
            return Ok(num);
        }
        let den = poly_subst(&self.0.den, rules, &mut cache)?;
        num.checked_div(&den)
            .ok_or_else(|| ExprError::DomainRestriction {
                vanishing: self.denominator().to_string(),
            })
    }

    /// Factors of the denominator that must not vanish: each variable of its
    /// monomial content and the remaining cofactor, plus those of atom
    /// arguments.
    pub fn singular_factors(&self) -> BTreeSet<Expression> {
        let mut out = BTreeSet::new();
        self.collect_singular(&mut out);
        out
    }

    fn collect_singular(&self, out: &mut BTreeSet<Expression>) {
        let den = &self.0.den;
        if !den.is_constant() {
            let m = den.mono_content();
            for (v, _) in m.factors() {
                out.insert(Expression::var(v.clone()));
            }
            let rest = den.div_mono(&m).unwrap();
            if !rest.is_constant() {
                out.insert(Expression::from_poly(rest.monic().0));
            }
        }
        for v in self.vars() {
            if let Var::Atom(a) = v {
                for arg in a.args() {
                    arg.collect_singular(out);
                }
            }
        }
    }

    /// Rewrites every power `v^k` of the variable `v` via `f(k)`. Used for
    /// chart substitutions such as `s^(2k) -> r^k`. Applies inside atom
    /// arguments as well.
    pub fn map_powers<F>(&self, v: &Var, f: &F) -> Result<Expression, ExprError>
    where
        F: Fn(u32) -> Result<Expression, ExprError>,
    {
        let num = poly_map_powers(&self.0.num, v, f)?;
        let den = poly_map_powers(&self.0.den, v, f)?;
        num.checked_div(&den).ok_or(ExprError::DivisionByZero)
    }
}

fn var_affected(v: &Var, rules: &Rules) -> bool {
    match v {
        Var::Coord(c) => rules.contains_key(c),
        Var::Atom(a) => a.args().iter().any(|e| e.mentions_any(rules)),
    }
}

fn var_image(
    v: &Var,
    rules: &Rules,
    cache: &mut BTreeMap<Var, Expression>,
) -> Result<Expression, ExprError> {
    if let Some(e) = cache.get(v) {
        return Ok(e.clone());
    }
    let img = match v {
        Var::Coord(c) => rules
            .get(c)
            .cloned()
            .unwrap_or_else(|| Expression::coord(c)),
        Var::Atom(a) => {
            let args = a
                .args()
                .iter()
                .map(|e| e.substitute_simultaneous(rules))
                .collect::<Result<Vec<_>, _>>()?;
            Expression::atom(a.with_args(args))
        }
    };
    cache.insert(v.clone(), img.clone());
    Ok(img)
}

fn poly_subst(
    p: &Poly,
    rules: &Rules,
    cache: &mut BTreeMap<Var, Expression>,
) -> Result<Expression, ExprError> {
    // untouched terms stay polynomial; only affected factors go through
    // rational arithmetic
    let mut plain = Vec::new();
    let mut acc = Expression::zero();
    for (m, c) in p.terms() {
        let mut kept = Mono::one();
        let mut factor = Expression::rational(c.clone());
        let mut touched = false;
        for (v, e) in m.factors() {
            if var_affected(v, rules) {
                touched = true;
                let img = var_image(v, rules, cache)?;
                factor = &factor * &img.pow(*e as i32).expect("nonnegative power");
            } else {
                kept = kept.mul(&Mono::var(v.clone(), *e));
            }
        }
        if touched {
            let rest = Expression::from_poly(Poly::monomial(kept, BigRational::one()));
            acc = &acc + &(&factor * &rest);
        } else {
            plain.push((kept, c.clone()));
        }
    }
    Ok(&acc + &Expression::from_poly(Poly::from_terms(plain)))
}

fn poly_map_powers<F>(p: &Poly, v: &Var, f: &F) -> Result<Expression, ExprError>
where
    F: Fn(u32) -> Result<Expression, ExprError>,
{
    let mut acc = Expression::zero();
    for (m, c) in p.terms() {
        let mut term = Expression::rational(c.clone());
        for (w, e) in m.factors() {
            let img = if w == v {
                f(*e)?
            } else if let Var::Atom(a) = w {
                let args = a
                    .args()
                    .iter()
                    .map(|arg| arg.map_powers(v, f))
                    .collect::<Result<Vec<_>, _>>()?;
                Expression::atom(a.with_args(args)).pow(*e as i32).unwrap()
            } else {
                Expression::var(w.clone()).pow(*e as i32).unwrap()
            };
            term = &term * &img;
        }
        acc = &acc + &term;
    }
    Ok(acc)
}

/// d(atom)/dc by the chain rule over argument slots.
pub(crate) fn atom_diff(a: &Atom, c: &Coordinate) -> Expression {
    let mut acc = Expression::zero();
    for (i, arg) in a.args().iter().enumerate() {
        let d = arg.diff(c);
        if !d.is_zero() {
            acc = &acc + &(&d * &Expression::atom(a.with_slot(i as u8)));
        }
    }
    acc
}

fn poly_diff(p: &Poly, c: &Coordinate) -> Expression {
    let target = Var::Coord(c.clone());
    let mut plain = Vec::new();
    let mut chain = Expression::zero();
    let mut atom_derivs: BTreeMap<Atom, Expression> = BTreeMap::new();
    for (m, coeff) in p.terms() {
        for (v, e) in m.factors() {
            let lowered = m
                .div(&Mono::var(v.clone(), 1))
                .expect("factor divides its monomial");
            let k = coeff * q(*e as i64);
            match v {
                Var::Coord(_) if *v == target => plain.push((lowered, k)),
                Var::Coord(_) => {}
                Var::Atom(a) => {
                    let da = atom_derivs
                        .entry(a.clone())
                        .or_insert_with(|| atom_diff(a, c))
                        .clone();
                    if !da.is_zero() {
                        let rest = Expression::from_poly(Poly::monomial(lowered, k));
                        chain = &chain + &(&rest * &da);
                    }
                }
            }
        }
    }
    &Expression::from_poly(Poly::from_terms(plain)) + &chain
}

fn add_parts(a: &Poly, b: &Poly, c: &Poly, d: &Poly) -> Expression {
    if b.is_one() && d.is_one() {
        return Expression::from_poly(a.add(c));
    }
    if b == d {
        return Expression::from_parts(a.add(c), b.clone()).unwrap();
    }
    let g = gcd(b, d);
    let (b1, d1) = if g.is_one() {
        (b.clone(), d.clone())
    } else {
        (b.exact_div(&g).unwrap(), d.exact_div(&g).unwrap())
    };
    let num = a.mul(&d1).add(&c.mul(&b1));
    if num.is_zero() {
        return Expression::zero();
    }
    if g.is_one() {
        return Expression::monic_den(num, b1.mul(&d1).mul(&g));
    }
    let h = gcd(&num, &g);
    let (num, g) = if h.is_one() {
        (num, g)
    } else {
        (num.exact_div(&h).unwrap(), g.exact_div(&h).unwrap())
    };
    Expression::monic_den(num, b1.mul(&d1).mul(&g))
}

/// (a/b) * (c/d) for coprime pairs.
fn mul_parts(a: &Poly, b: &Poly, c: &Poly, d: &Poly) -> Expression {
    if a.is_zero() || c.is_zero() {
        return Expression::zero();
    }
    if b.is_one() && d.is_one() {
        return Expression::from_poly(a.mul(c));
    }
    let g1 = gcd(a, d);
    let g2 = gcd(c, b);
    let (a, d) = if g1.is_one() {
        (a.clone(), d.clone())
    } else {
        (a.exact_div(&g1).unwrap(), d.exact_div(&g1).unwrap())
    };
    let (c, b) = if g2.is_one() {
        (c.clone(), b.clone())
    } else {
        (c.exact_div(&g2).unwrap(), b.exact_div(&g2).unwrap())
    };
    Expression::monic_den(a.mul(&c), b.mul(&d))
}

impl<'a> Add<&'a Expression> for &'a Expression {
    type Output = Expression;
    fn add(self, o: &Expression) -> Expression {
        add_parts(&self.0.num, &self.0.den, &o.0.num, &o.0.den)
    }
}

impl<'a> Sub<&'a Expression> for &'a Expression {
    type Output = Expression;
    fn sub(self, o: &Expression) -> Expression {
        add_parts(&self.0.num, &self.0.den, &o.0.num.neg(), &o.0.den)
    }
}

impl<'a> Mul<&'a Expression> for &'a Expression {
    type Output = Expression;
    fn mul(self, o: &Expression) -> Expression {
        mul_parts(&self.0.num, &self.0.den, &o.0.num, &o.0.den)
    }
}

impl Neg for &Expression {
    type Output = Expression;
    fn neg(self) -> Expression {
        Expression::raw(self.0.num.neg(), self.0.den.clone())
    }
}

macro_rules! owned_ops {
    ($($tr:ident $m:ident),*) => {$(
        impl $tr<Expression> for Expression {
            type Output = Expression;
            fn $m(self, o: Expression) -> Expression { (&self).$m(&o) }
        }
        impl<'a> $tr<&'a Expression> for Expression {
            type Output = Expression;
            fn $m(self, o: &Expression) -> Expression { (&self).$m(o) }
        }
        impl<'a> $tr<Expression> for &'a Expression {
            type Output = Expression;
            fn $m(self, o: Expression) -> Expression { self.$m(&o) }
        }
    )*};
}
owned_ops!(Add add, Sub sub, Mul mul);

impl Neg for Expression {
    type Output = Expression;
    fn neg(self) -> Expression {
        -&self
    }
}

impl std::iter::Sum for Expression {
    fn sum<I: Iterator<Item = Expression>>(iter: I) -> Expression {
        iter.fold(Expression::zero(), |a, b| &a + &b)
    }
}

impl std::iter::Product for Expression {
    fn product<I: Iterator<Item = Expression>>(iter: I) -> Expression {
        iter.fold(Expression::one(), |a, b| &a * &b)
    }
}

impl From<i64> for Expression {
    fn from(n: i64) -> Self {
        Expression::int(n)
    }
}

impl From<&Coordinate> for Expression {
    fn from(c: &Coordinate) -> Self {
        Expression::coord(c)
    }
}

fn single_var_power(p: &Poly) -> bool {
    p.is_monomial()
        && p.leading_coeff().is_one()
        && p.leading_mono().map(|m| m.factors().len()) == Some(1)
}

impl fmt::Display for Expression {
    /// Prints in the input grammar; the output re-parses to the same value.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (n, d) = (&self.0.num, &self.0.den);
        if d.is_one() {
            return write!(f, "{n}");
        }
        if n.is_monomial() {
            write!(f, "{n}")?;
        } else {
            write!(f, "({n})")?;
        }
        if single_var_power(d) {
            write!(f, "/{d}")
        } else {
            write!(f, "/({d})")
        }
    }
}

impl fmt::Debug for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

/// Sign of the leading coefficient of the numerator.
pub fn leading_sign(e: &Expression) -> i32 {
    let c = e.numer().leading_coeff();
    if c.is_positive() {
        1
    } else if c.is_negative() {
        -1
    } else {
        0
    }
}

#[cfg(test)]
mod tests;
