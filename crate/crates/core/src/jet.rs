//! Jet spaces and total derivatives.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use smallvec::SmallVec;
use thiserror::Error;

use crate::expr::{
    parse_expression, CoordKind, Coordinate, ExprError, Expression, MultiIndex, Symbol,
    SymbolTable,
};

/// Hard cap on derivative order.
pub const MAX_ORDER_CAP: usize = 4;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum JetError {
    #[error("duplicate name `{0}`")]
    DuplicateName(String),
    #[error("empty list of {0} variables")]
    Empty(&'static str),
    #[error("maximal order must be between 1 and {MAX_ORDER_CAP}, got {0}")]
    BadOrder(usize),
    #[error("metric has {got} entries for {expected} independent variables")]
    MetricLength { expected: usize, got: usize },
    #[error("metric entries must be +1 or -1")]
    MetricEntry,
    #[error("no metric declared")]
    NoMetric,
    #[error("total derivative would exceed the maximal order {0}")]
    OrderOverflow(usize),
    #[error("unknown independent variable `{0}`")]
    UnknownIndependent(String),
    #[error("unknown dependent variable `{0}`")]
    UnknownDependent(String),
    #[error(transparent)]
    Expr(#[from] ExprError),
}

/// Ambient space: independent and dependent variables, maximal derivative
/// order, optional diagonal metric, plus declared parameters and opaque
/// function symbols.
#[derive(Debug, Clone, PartialEq)]
pub struct JetSpace {
    independents: Vec<Arc<str>>,
    dependents: Vec<Arc<str>>,
    dependent_kind: CoordKind,
    max_order: usize,
    metric: Option<Vec<i8>>,
    parameters: Vec<Arc<str>>,
    functions: BTreeMap<String, usize>,
}

impl JetSpace {
    pub fn declare(
        independents: &[&str],
        dependents: &[&str],
        max_order: usize,
        metric: Option<&[i8]>,
    ) -> Result<Self, JetError> {
        if independents.is_empty() {
            return Err(JetError::Empty("independent"));
        }
        if dependents.is_empty() {
            return Err(JetError::Empty("dependent"));
        }
        if max_order == 0 || max_order > MAX_ORDER_CAP {
            return Err(JetError::BadOrder(max_order));
        }
        let mut seen = BTreeSet::new();
        for n in independents.iter().chain(dependents) {
            if !seen.insert(*n) {
                return Err(JetError::DuplicateName(n.to_string()));
            }
        }
        if let Some(m) = metric {
            if m.len() != independents.len() {
                return Err(JetError::MetricLength {
                    expected: independents.len(),
                    got: m.len(),
                });
            }
            if m.iter().any(|&g| g != 1 && g != -1) {
                return Err(JetError::MetricEntry);
            }
        }
        Ok(JetSpace {
            independents: independents.iter().map(|s| Arc::from(*s)).collect(),
            dependents: dependents.iter().map(|s| Arc::from(*s)).collect(),
            dependent_kind: CoordKind::Dependent,
            max_order,
            metric: metric.map(|m| m.to_vec()),
            parameters: Vec::new(),
            functions: BTreeMap::new(),
        })
    }

    /// Marks the dependent variables as those of a reduced equation.
    pub fn as_reduced(mut self) -> Self {
        self.dependent_kind = CoordKind::ReducedDependent;
        self
    }

    pub fn with_parameters(mut self, names: &[&str]) -> Result<Self, JetError> {
        for n in names {
            if self.name_taken(n) {
                return Err(JetError::DuplicateName(n.to_string()));
            }
            self.parameters.push(Arc::from(*n));
        }
        Ok(self)
    }

    pub fn with_function(mut self, name: &str, arity: usize) -> Result<Self, JetError> {
        if self.name_taken(name) {
            return Err(JetError::DuplicateName(name.to_string()));
        }
        self.functions.insert(name.to_string(), arity);
        Ok(self)
    }

    pub fn with_max_order(&self, k: usize) -> Result<Self, JetError> {
        if k == 0 || k > MAX_ORDER_CAP {
            return Err(JetError::BadOrder(k));
        }
        let mut s = self.clone();
        s.max_order = k;
        Ok(s)
    }

    /// Same space with the maximal order raised to at least `k`.
    pub fn at_least(&self, k: usize) -> Result<Self, JetError> {
        if k <= self.max_order {
            Ok(self.clone())
        } else {
            self.with_max_order(k)
        }
    }

    pub fn with_metric(&self, metric: &[i8]) -> Result<Self, JetError> {
        let names: Vec<&str> = self.independents.iter().map(|s| &**s).collect();
        let deps: Vec<&str> = self.dependents.iter().map(|s| &**s).collect();
        let mut s = Self::declare(&names, &deps, self.max_order, Some(metric))?;
        s.dependent_kind = self.dependent_kind;
        s.parameters = self.parameters.clone();
        s.functions = self.functions.clone();
        Ok(s)
    }

    fn name_taken(&self, n: &str) -> bool {
        self.independents.iter().any(|s| &**s == n)
            || self.dependents.iter().any(|s| &**s == n)
            || self.parameters.iter().any(|s| &**s == n)
            || self.functions.contains_key(n)
    }

    pub fn independent_names(&self) -> &[Arc<str>] {
        &self.independents
    }

    pub fn dependent_names(&self) -> &[Arc<str>] {
        &self.dependents
    }

    pub fn parameter_names(&self) -> &[Arc<str>] {
        &self.parameters
    }

    pub fn functions(&self) -> &BTreeMap<String, usize> {
        &self.functions
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    pub fn metric(&self) -> Option<&[i8]> {
        self.metric.as_deref()
    }

    pub fn dim(&self) -> usize {
        self.independents.len()
    }

    pub fn independent(&self, i: usize) -> Coordinate {
        Coordinate::independent(i, &self.independents[i])
    }

    pub fn independents(&self) -> Vec<Coordinate> {
        (0..self.dim()).map(|i| self.independent(i)).collect()
    }

    pub fn independent_index(&self, name: &str) -> Result<usize, JetError> {
        self.independents
            .iter()
            .position(|s| &**s == name)
            .ok_or_else(|| JetError::UnknownIndependent(name.to_string()))
    }

    pub fn parameter(&self, i: usize) -> Coordinate {
        Coordinate::parameter(i, &self.parameters[i])
    }

    pub fn parameters(&self) -> Vec<Coordinate> {
        (0..self.parameters.len()).map(|i| self.parameter(i)).collect()
    }

    pub fn dependent(&self, r: usize) -> Coordinate {
        self.jet(r, &[])
    }

    pub fn dependents(&self) -> Vec<Coordinate> {
        (0..self.dependents.len()).map(|r| self.dependent(r)).collect()
    }

    /// Jet coordinate `u^r_J`. No order check; see [`JetSpace::checked_jet`].
    pub fn jet(&self, r: usize, multi: &[u8]) -> Coordinate {
        Coordinate::jet(
            self.dependent_kind,
            r,
            &self.dependents[r],
            multi.iter().copied().collect(),
            &self.independents,
        )
    }

    pub fn checked_jet(&self, r: usize, multi: &[u8]) -> Result<Coordinate, JetError> {
        if multi.len() > self.max_order {
            return Err(JetError::OrderOverflow(self.max_order));
        }
        Ok(self.jet(r, multi))
    }

    /// Jet coordinate named by independent-variable names, e.g. `("u", &["x","y"])`.
    pub fn jet_by_names(&self, dep: &str, wrt: &[&str]) -> Result<Coordinate, JetError> {
        let r = self
            .dependents
            .iter()
            .position(|s| &**s == dep)
            .ok_or_else(|| JetError::UnknownDependent(dep.to_string()))?;
        let multi = wrt
            .iter()
            .map(|n| self.independent_index(n).map(|i| i as u8))
            .collect::<Result<Vec<_>, _>>()?;
        self.checked_jet(r, &multi)
    }

    /// Every sorted multi-index of length `k`.
    pub fn multi_indices(&self, k: usize) -> Vec<MultiIndex> {
        fn rec(n: u8, k: usize, start: u8, cur: &mut MultiIndex, out: &mut Vec<MultiIndex>) {
            if k == 0 {
                out.push(cur.clone());
                return;
            }
            for i in start..n {
                cur.push(i);
                rec(n, k - 1, i, cur, out);
                cur.pop();
            }
        }
        let mut out = Vec::new();
        rec(self.dim() as u8, k, 0, &mut SmallVec::new(), &mut out);
        out
    }

    /// All jet coordinates of order at most `k`, by increasing order.
    pub fn jets_up_to(&self, k: usize) -> Vec<Coordinate> {
        let mut out = Vec::new();
        for ord in 0..=k {
            for r in 0..self.dependents.len() {
                for m in self.multi_indices(ord) {
                    out.push(self.jet(r, &m));
                }
            }
        }
        out
    }

    /// Independents followed by all jets up to the maximal order.
    pub fn universe(&self) -> Vec<Coordinate> {
        let mut out = self.independents();
        out.extend(self.jets_up_to(self.max_order));
        out
    }

    pub fn parse(&self, text: &str) -> Result<Expression, ExprError> {
        parse_expression(text, self)
    }

    /// `D_i` of a single coordinate.
    pub fn total_derivative_of(&self, c: &Coordinate, i: usize) -> Option<Expression> {
        if c.is_independent() {
            return Some(if c.index() == i {
                Expression::one()
            } else {
                Expression::zero()
            });
        }
        if c.is_jet() {
            let mut m: Vec<u8> = c.multi_index().to_vec();
            m.push(i as u8);
            let jet = Coordinate::jet(
                c.kind(),
                c.index(),
                c.name(),
                m.into_iter().collect(),
                &self.independents,
            );
            return Some(Expression::coord(&jet));
        }
        Some(Expression::zero())
    }

    /// `D_i e = sum over coordinates c of e: D_i(c) * de/dc`.
    pub fn total_derivative(&self, e: &Expression, i: usize) -> Result<Expression, JetError> {
        if e.order() >= self.max_order {
            return Err(JetError::OrderOverflow(self.max_order));
        }
        Ok(self.total_derivative_unchecked(e, i))
    }

    pub(crate) fn total_derivative_unchecked(&self, e: &Expression, i: usize) -> Expression {
        let mut acc = Expression::zero();
        for c in e.coordinates() {
            let dc = self.total_derivative_of(&c, i).unwrap();
            if dc.is_zero() {
                continue;
            }
            let p = e.diff(&c);
            if !p.is_zero() {
                acc = &acc + &(&dc * &p);
            }
        }
        acc
    }

    /// `D_J e` for a multi-index `J`.
    pub fn total_derivative_multi(&self, e: &Expression, multi: &[u8]) -> Result<Expression, JetError> {
        let mut acc = e.clone();
        for &i in multi {
            acc = self.total_derivative(&acc, i as usize)?;
        }
        Ok(acc)
    }

    /// Metric-weighted contraction over `indices` (all independents when
    /// `None`), using the declared metric.
    pub fn contract(&self, family: Contraction, indices: Option<&[usize]>) -> Result<Expression, JetError> {
        let metric = self.metric.as_ref().ok_or(JetError::NoMetric)?;
        self.contract_with(family, indices, metric)
    }

    /// Contraction with an explicit diagonal signature.
    pub fn contract_with(
        &self,
        family: Contraction,
        indices: Option<&[usize]>,
        metric: &[i8],
    ) -> Result<Expression, JetError> {
        let all: Vec<usize> = (0..self.dim()).collect();
        let idx: &[usize] = indices.unwrap_or(&all);
        if metric.len() != self.dim() {
            return Err(JetError::MetricLength {
                expected: self.dim(),
                got: metric.len(),
            });
        }
        let g = |m: usize| Expression::int(metric[m] as i64);
        let x = |m: usize| Expression::coord(&self.independent(m));
        let u1 = |m: usize| Expression::coord(&self.jet(0, &[m as u8]));
        let u2 = |m: usize, n: usize| Expression::coord(&self.jet(0, &[m as u8, n as u8]));
        let vector = |end: End, m: usize| match end {
            End::X => x(m),
            End::U => u1(m),
        };
        let chain = |a: End, hessians: usize, b: End| -> Expression {
            // x carries an upper index and derivatives lower ones; a contracted
            // pair of equal variance takes a metric weight
            let mut acc = Expression::zero();
            let n = idx.len();
            let slots = hessians + 1;
            let total = n.pow(slots as u32);
            for k in 0..total {
                let mut ks = Vec::with_capacity(slots);
                let mut r = k;
                for _ in 0..slots {
                    ks.push(idx[r % n]);
                    r /= n;
                }
                let mut term = vector(a, ks[0]);
                for (w, &m) in ks.iter().enumerate() {
                    let left_upper = w == 0 && a == End::X;
                    let right_upper = w + 1 == slots && b == End::X;
                    if left_upper == right_upper {
                        term = &term * &g(m);
                    }
                    if w + 1 < slots {
                        term = &term * &u2(m, ks[w + 1]);
                    }
                }
                term = &term * &vector(b, ks[slots - 1]);
                acc = &acc + &term;
            }
            acc
        };
        Ok(match family {
            Contraction::XX => chain(End::X, 0, End::X),
            Contraction::XU => chain(End::X, 0, End::U),
            Contraction::UU => chain(End::U, 0, End::U),
            Contraction::Box => idx.iter().map(|&m| &g(m) * &u2(m, m)).sum(),
            Contraction::UHU => chain(End::U, 1, End::U),
            Contraction::UHHU => chain(End::U, 2, End::U),
            Contraction::XHU => chain(End::X, 1, End::U),
            Contraction::XHHU => chain(End::X, 2, End::U),
            Contraction::TraceH3 => {
                let mut acc = Expression::zero();
                for &m in idx {
                    for &n in idx {
                        for &a in idx {
                            let t = &(&(&g(m) * &g(n)) * &g(a))
                                * &(&(&u2(m, n) * &u2(n, a)) * &u2(m, a));
                            acc = &acc + &t;
                        }
                    }
                }
                acc
            }
        })
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum End {
    X,
    U,
}

/// Metric contractions of coordinates, first derivatives and Hessians.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Contraction {
    /// `x_mu x_mu`
    XX,
    /// `x^mu u_mu`, with no metric weight between an upper and a lower index
    XU,
    /// `u_mu u_mu`
    UU,
    /// `u_mu mu` (d'Alembertian or Laplacian)
    Box,
    /// `u_mu u_mu nu u_nu`
    UHU,
    /// `u_mu u_mu nu u_nu alpha u_alpha`
    UHHU,
    /// `u_mu nu u_nu alpha u_mu alpha`
    TraceH3,
    /// `x_mu u_mu nu u_nu`
    XHU,
    /// `x_mu u_mu nu u_nu alpha u_alpha`
    XHHU,
}

impl SymbolTable for JetSpace {
    fn lookup(&self, name: &str, pos: usize) -> Result<Symbol, ExprError> {
        if let Some(i) = self.independents.iter().position(|s| &**s == name) {
            return Ok(Symbol::Coord(self.independent(i)));
        }
        if let Some(r) = self.dependents.iter().position(|s| &**s == name) {
            return Ok(Symbol::Coord(self.dependent(r)));
        }
        if let Some(i) = self.parameters.iter().position(|s| &**s == name) {
            return Ok(Symbol::Coord(self.parameter(i)));
        }
        if let Some(&arity) = self.functions.get(name) {
            return Ok(Symbol::Function { arity });
        }
        let undeclared = || ExprError::Undeclared {
            name: name.to_string(),
            pos,
        };
        let (dep, suffix) = name.split_once('_').ok_or_else(undeclared)?;
        let r = self
            .dependents
            .iter()
            .position(|s| &**s == dep)
            .ok_or_else(undeclared)?;
        let multi = self.split_suffix(suffix).ok_or_else(undeclared)?;
        if multi.len() > self.max_order {
            return Err(ExprError::OrderExceeded {
                name: name.to_string(),
                order: multi.len(),
                max: self.max_order,
            });
        }
        Ok(Symbol::Coord(self.jet(r, &multi)))
    }
}

impl JetSpace {
    /// Splits a derivative suffix into independent positions, preferring the
    /// longest matching name at each step.
    fn split_suffix(&self, s: &str) -> Option<Vec<u8>> {
        if s.is_empty() {
            return None;
        }
        let mut out = Vec::new();
        let mut rest = s;
        while !rest.is_empty() {
            let (i, n) = self
                .independents
                .iter()
                .enumerate()
                .filter(|(_, n)| rest.starts_with(&***n))
                .max_by_key(|(_, n)| n.len())?;
            out.push(i as u8);
            rest = &rest[n.len()..];
        }
        Some(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn space() -> JetSpace {
        JetSpace::declare(&["t", "x", "y"], &["u"], 2, None)
            .unwrap()
            .with_function("f", 4)
            .unwrap()
    }

    #[test]
    fn universe_size() {
        let s = space();
        let u = s.universe();
        assert_eq!(u.len(), 13);
        let labels: Vec<_> = u.iter().map(|c| c.label().to_string()).collect();
        assert_eq!(
            labels,
            ["t", "x", "y", "u", "u_t", "u_x", "u_y", "u_tt", "u_tx", "u_ty", "u_xx", "u_xy", "u_yy"]
        );
        let s1 = JetSpace::declare(&["x"], &["u"], 1, None).unwrap();
        let labels: Vec<_> = s1.universe().iter().map(|c| c.label().to_string()).collect();
        assert_eq!(labels, ["x", "u", "u_x"]);
    }

    #[test]
    fn duplicate_names_rejected() {
        assert_eq!(
            JetSpace::declare(&["x", "x"], &["u"], 1, None),
            Err(JetError::DuplicateName("x".into()))
        );
        assert!(space().with_parameters(&["u"]).is_err());
    }

    #[test]
    fn total_derivative_examples() {
        let s = space();
        let g = s.parse("x*u_y - y*u_x").unwrap();
        let dx = s.total_derivative(&g, 1).unwrap();
        assert_eq!(dx, s.parse("u_y + x*u_xy - y*u_xx").unwrap());
        let dy = s.total_derivative(&s.parse("u").unwrap(), 2).unwrap();
        assert_eq!(dy, s.parse("u_y").unwrap());
        let dt = s.total_derivative(&s.parse("f(t,x,y,u)").unwrap(), 0).unwrap();
        assert_eq!(dt, s.parse("f_{1}(t,x,y,u) + u_t*f_{4}(t,x,y,u)").unwrap());
    }

    #[test]
    fn order_overflow() {
        let s = space();
        let e = s.parse("u_xx").unwrap();
        assert_eq!(s.total_derivative(&e, 0), Err(JetError::OrderOverflow(2)));
    }

    #[test]
    fn contractions() {
        let s = space().with_metric(&[1, -1, -1]).unwrap();
        assert_eq!(
            s.contract(Contraction::XX, None).unwrap(),
            s.parse("t^2 - x^2 - y^2").unwrap()
        );
        assert_eq!(
            s.contract(Contraction::Box, None).unwrap(),
            s.parse("u_tt - u_xx - u_yy").unwrap()
        );
        assert_eq!(
            s.contract(Contraction::XU, None).unwrap(),
            s.parse("t*u_t + x*u_x + y*u_y").unwrap()
        );
        assert_eq!(
            s.contract(Contraction::XHU, None).unwrap(),
            s.parse("t*(u_tt*u_t - u_tx*u_x - u_ty*u_y) + x*(u_tx*u_t - u_xx*u_x - u_xy*u_y) + y*(u_ty*u_t - u_xy*u_x - u_yy*u_y)").unwrap()
        );
        assert_eq!(
            s.contract_with(Contraction::UU, Some(&[1, 2]), &[1, 1, 1]).unwrap(),
            s.parse("u_x^2 + u_y^2").unwrap()
        );
        assert!(space().contract(Contraction::XX, None).is_err());
    }

    #[test]
    fn jet_names_parse() {
        let s = space();
        assert!(matches!(
            s.parse("u_xxy"),
            Err(ExprError::OrderExceeded { order: 3, .. })
        ));
        assert!(matches!(s.parse("v_x"), Err(ExprError::Undeclared { .. })));
        assert_eq!(s.parse("u_yx").unwrap(), s.parse("u_xy").unwrap());
    }
}
