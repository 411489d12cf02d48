//! Point vector fields `xi^i d/dx_i + eta^r d/du^r` and their prolongations.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::expr::{Coordinate, ExprError, Expression};
use crate::jet::{JetError, JetSpace};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FieldError {
    #[error("coefficient of `{field}` depends on derivative `{coordinate}`; only point fields are supported")]
    NotPointField { field: String, coordinate: String },
    #[error("expression has order {expr}, but the field is prolonged only to order {field}")]
    OrderMismatch { expr: usize, field: usize },
    #[error("cannot parse operator: {0}")]
    Operator(String),
    #[error(transparent)]
    Jet(#[from] JetError),
    #[error(transparent)]
    Expr(#[from] ExprError),
}

#[derive(Clone, PartialEq)]
pub struct VectorField {
    name: String,
    xi: Vec<Expression>,
    eta: Vec<Expression>,
}

impl VectorField {
    pub fn new(
        name: &str,
        xi: Vec<Expression>,
        eta: Vec<Expression>,
        space: &JetSpace,
    ) -> Result<Self, FieldError> {
        assert_eq!(xi.len(), space.dim(), "one xi per independent variable");
        assert_eq!(eta.len(), space.dependent_names().len(), "one eta per dependent variable");
        for e in xi.iter().chain(&eta) {
            if let Some(c) = e.coordinates().into_iter().find(|c| c.is_jet() && c.order() > 0) {
                return Err(FieldError::NotPointField {
                    field: name.to_string(),
                    coordinate: c.label().to_string(),
                });
            }
        }
        Ok(VectorField {
            name: name.to_string(),
            xi,
            eta,
        })
    }

    /// Translation `d/dx_i`.
    pub fn translation(space: &JetSpace, i: usize) -> Self {
        let mut xi = vec![Expression::zero(); space.dim()];
        xi[i] = Expression::one();
        let eta = vec![Expression::zero(); space.dependent_names().len()];
        VectorField {
            name: format!("d/d{}", space.independent_names()[i]),
            xi,
            eta,
        }
    }

    /// Parses operator text such as `x*d/dy - y*d/dx + u*d/du`. Each
    /// coefficient is the text between consecutive `d/d<name>` markers.
    pub fn parse(name: &str, text: &str, space: &JetSpace) -> Result<Self, FieldError> {
        let mut xi = vec![Expression::zero(); space.dim()];
        let mut eta = vec![Expression::zero(); space.dependent_names().len()];
        let bytes = text.as_bytes();
        let mut start = 0;
        let mut found = false;
        let mut i = 0;
        while i + 3 <= bytes.len() {
            if &bytes[i..i + 3] == b"d/d" {
                let name_start = i + 3;
                let mut j = name_start;
                while j < bytes.len() && (bytes[j].is_ascii_alphanumeric() || bytes[j] == b'_') {
                    j += 1;
                }
                if j == name_start {
                    return Err(FieldError::Operator(format!("missing variable after `d/d` at {i}")));
                }
                let var = &text[name_start..j];
                let coeff = coefficient(&text[start..i], space)?;
                if let Ok(k) = space.independent_index(var) {
                    xi[k] = &xi[k] + &coeff;
                } else if let Some(r) = space.dependent_names().iter().position(|s| &**s == var) {
                    eta[r] = &eta[r] + &coeff;
                } else {
                    return Err(FieldError::Operator(format!("unknown variable `{var}`")));
                }
                found = true;
                start = j;
                i = j;
            } else {
                i += 1;
            }
        }
        if !found || !text[start..].trim().is_empty() {
            return Err(FieldError::Operator(format!(
                "expected terms of the form `coeff*d/dvar`, got `{text}`"
            )));
        }
        VectorField::new(name, xi, eta, space)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn renamed(mut self, name: &str) -> Self {
        self.name = name.to_string();
        self
    }

    pub fn xi(&self) -> &[Expression] {
        &self.xi
    }

    pub fn eta(&self) -> &[Expression] {
        &self.eta
    }

    /// `Q[u]^r = eta^r - xi^i u^r_i`.
    pub fn characteristic(&self, space: &JetSpace) -> Vec<Expression> {
        (0..self.eta.len())
            .map(|r| {
                let mut q = self.eta[r].clone();
                for (i, x) in self.xi.iter().enumerate() {
                    if !x.is_zero() {
                        q = &q - &(x * &Expression::coord(&space.jet(r, &[i as u8])));
                    }
                }
                q
            })
            .collect()
    }

    /// Action on functions of `x` and `u` only.
    pub fn act(&self, e: &Expression, space: &JetSpace) -> Expression {
        let mut acc = Expression::zero();
        for (i, x) in self.xi.iter().enumerate() {
            if !x.is_zero() {
                acc = &acc + &(x * &e.diff(&space.independent(i)));
            }
        }
        for (r, n) in self.eta.iter().enumerate() {
            if !n.is_zero() {
                acc = &acc + &(n * &e.diff(&space.dependent(r)));
            }
        }
        acc
    }

    /// `sum xi^i de/dx_i`, treating every other coordinate as a constant.
    pub fn act_on_independents(&self, e: &Expression, space: &JetSpace) -> Expression {
        let mut acc = Expression::zero();
        for (i, x) in self.xi.iter().enumerate() {
            if !x.is_zero() {
                acc = &acc + &(x * &e.diff(&space.independent(i)));
            }
        }
        acc
    }

    /// `[A, B] = A B - B A`.
    pub fn commutator(&self, other: &VectorField, space: &JetSpace) -> VectorField {
        let xi = self
            .xi
            .iter()
            .zip(&other.xi)
            .map(|(a, b)| &self.act(b, space) - &other.act(a, space))
            .collect();
        let eta = self
            .eta
            .iter()
            .zip(&other.eta)
            .map(|(a, b)| &self.act(b, space) - &other.act(a, space))
            .collect();
        VectorField {
            name: format!("[{}, {}]", self.name, other.name),
            xi,
            eta,
        }
    }

    pub fn linear_combination(terms: &[(Expression, &VectorField)], name: &str) -> VectorField {
        let (_, first) = terms[0];
        let mut xi = vec![Expression::zero(); first.xi.len()];
        let mut eta = vec![Expression::zero(); first.eta.len()];
        for (c, f) in terms {
            for (a, b) in xi.iter_mut().zip(&f.xi) {
                *a = &*a + &(c * b);
            }
            for (a, b) in eta.iter_mut().zip(&f.eta) {
                *a = &*a + &(c * b);
            }
        }
        VectorField {
            name: name.to_string(),
            xi,
            eta,
        }
    }

    /// `k`-th prolongation; coefficients are computed for every jet coordinate
    /// up to order `k` by `eta^{J+i} = D_i eta^J - sum_j u_{J+j} D_i xi^j`.
    pub fn prolong(&self, space: &JetSpace, k: usize) -> Result<ProlongedField, FieldError> {
        let space = space.at_least(k.max(1))?;
        let mut coefficients = BTreeMap::new();
        for i in 0..space.dim() {
            coefficients.insert(space.independent(i), self.xi[i].clone());
        }
        let dxi: Vec<Vec<Expression>> = (0..space.dim())
            .map(|i| {
                self.xi
                    .iter()
                    .map(|x| space.total_derivative_unchecked(x, i))
                    .collect()
            })
            .collect();
        for r in 0..self.eta.len() {
            coefficients.insert(space.dependent(r), self.eta[r].clone());
            for ord in 1..=k {
                for multi in space.multi_indices(ord) {
                    let (&i, parent) = multi.split_last().unwrap();
                    let base = &coefficients[&space.jet(r, parent)];
                    let coeff = prolongation_step(&space, r, parent, i as usize, base, &dxi[i as usize]);
                    coefficients.insert(space.jet(r, &multi), coeff);
                }
            }
        }
        Ok(ProlongedField {
            base: self.clone(),
            order: k,
            coefficients,
            space,
        })
    }
}

/// One step of the prolongation recursion from multi-index `parent` in
/// direction `i`.
pub(crate) fn prolongation_step(
    space: &JetSpace,
    r: usize,
    parent: &[u8],
    i: usize,
    parent_coeff: &Expression,
    dxi_i: &[Expression],
) -> Expression {
    let mut c = space.total_derivative_unchecked(parent_coeff, i);
    for (j, d) in dxi_i.iter().enumerate() {
        if d.is_zero() {
            continue;
        }
        let mut m = parent.to_vec();
        m.push(j as u8);
        c = &c - &(&Expression::coord(&space.jet(r, &m)) * d);
    }
    c
}

fn coefficient(text: &str, space: &JetSpace) -> Result<Expression, FieldError> {
    let t = text.trim();
    let t = t.strip_suffix('*').unwrap_or(t).trim();
    match t {
        "" | "+" => Ok(Expression::one()),
        "-" => Ok(Expression::int(-1)),
        _ => Ok(space.parse(t)?),
    }
}

impl fmt::Debug for VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: xi = {:?}, eta = {:?}", self.name, self.xi, self.eta)
    }
}

/// A vector field together with its prolongation coefficients up to `order`.
#[derive(Clone)]
pub struct ProlongedField {
    base: VectorField,
    order: usize,
    coefficients: BTreeMap<Coordinate, Expression>,
    space: JetSpace,
}

impl ProlongedField {
    pub fn base(&self) -> &VectorField {
        &self.base
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn space(&self) -> &JetSpace {
        &self.space
    }

    /// Coefficient of `d/dc`: `xi^i` for independents, `eta^J` for jets, zero
    /// for parameters.
    pub fn coefficient(&self, c: &Coordinate) -> Option<&Expression> {
        self.coefficients.get(c)
    }

    pub fn coefficients(&self) -> &BTreeMap<Coordinate, Expression> {
        &self.coefficients
    }

    /// `sum xi^i de/dx_i + sum eta^J de/du_J`.
    pub fn apply(&self, e: &Expression) -> Result<Expression, FieldError> {
        let ord = e.order();
        if ord > self.order {
            return Err(FieldError::OrderMismatch {
                expr: ord,
                field: self.order,
            });
        }
        let mut acc = Expression::zero();
        for c in e.coordinates() {
            let Some(k) = self.coefficients.get(&c) else {
                continue;
            };
            if k.is_zero() {
                continue;
            }
            let d = e.diff(&c);
            if !d.is_zero() {
                acc = &acc + &(k * &d);
            }
        }
        Ok(acc)
    }
}

impl fmt::Debug for ProlongedField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "pr^({}) {}", self.order, self.base.name)?;
        for (c, e) in &self.coefficients {
            writeln!(f, "  {c}: {e}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn space() -> JetSpace {
        JetSpace::declare(&["t", "x", "y"], &["u"], 2, None).unwrap()
    }

    fn rotation(s: &JetSpace) -> VectorField {
        VectorField::parse("J", "x*d/dy - y*d/dx", s).unwrap()
    }

    #[test]
    fn parse_operator() {
        let s = space();
        let j = rotation(&s);
        assert_eq!(j.xi(), &[Expression::zero(), s.parse("-y").unwrap(), s.parse("x").unwrap()]);
        let b = VectorField::parse("J01", "t*d/dx + x*d/dt", &s).unwrap();
        assert_eq!(b.xi()[0], s.parse("x").unwrap());
        let w = VectorField::parse("W", "d/dt + u*d/du", &s).unwrap();
        assert_eq!(w.eta()[0], s.parse("u").unwrap());
        assert!(VectorField::parse("bad", "x*d/dz", &s).is_err());
        assert!(VectorField::parse("bad", "x + y", &s).is_err());
        assert!(matches!(
            VectorField::parse("bad", "u_x*d/dx", &s),
            Err(FieldError::NotPointField { .. })
        ));
    }

    #[test]
    fn rotation_prolongation() {
        let s = space();
        let pf = rotation(&s).prolong(&s, 2).unwrap();
        let c = |n: &str| s.parse(n).unwrap().as_coord().unwrap().clone();
        assert_eq!(pf.coefficient(&c("u_x")).unwrap(), &s.parse("-u_y").unwrap());
        assert_eq!(pf.coefficient(&c("u_y")).unwrap(), &s.parse("u_x").unwrap());
        assert_eq!(pf.coefficient(&c("u_xx")).unwrap(), &s.parse("-2*u_xy").unwrap());
        assert_eq!(pf.coefficient(&c("u_yy")).unwrap(), &s.parse("2*u_xy").unwrap());
        assert_eq!(pf.coefficient(&c("u_xy")).unwrap(), &s.parse("u_xx - u_yy").unwrap());
        assert!(pf.coefficient(&c("u_t")).unwrap().is_zero());
    }

    #[test]
    fn translation_prolongation_is_trivial() {
        let s = space();
        let pf = VectorField::translation(&s, 1).prolong(&s, 2).unwrap();
        for j in s.jets_up_to(2) {
            assert!(pf.coefficient(&j).unwrap().is_zero());
        }
    }

    #[test]
    fn apply_examples() {
        let s = space();
        let j = rotation(&s);
        let p1 = j.prolong(&s, 1).unwrap();
        let p2 = j.prolong(&s, 2).unwrap();
        assert!(p1.apply(&s.parse("u_x^2+u_y^2").unwrap()).unwrap().is_zero());
        assert!(p2.apply(&s.parse("u_xx+u_yy").unwrap()).unwrap().is_zero());
        assert_eq!(
            p1.apply(&s.parse("u_x/x").unwrap()).unwrap(),
            s.parse("y*u_x/x^2 - u_y/x").unwrap()
        );
        assert!(matches!(
            p1.apply(&s.parse("u_xx").unwrap()),
            Err(FieldError::OrderMismatch { .. })
        ));
    }

    #[test]
    fn characteristics() {
        let s = space();
        assert_eq!(rotation(&s).characteristic(&s)[0], s.parse("y*u_x - x*u_y").unwrap());
        assert_eq!(
            VectorField::translation(&s, 1).characteristic(&s)[0],
            s.parse("-u_x").unwrap()
        );
        let f = VectorField::parse("T", "d/dt + d/dx", &s).unwrap();
        assert_eq!(f.characteristic(&s)[0], s.parse("-u_t - u_x").unwrap());
    }

    #[test]
    fn lorentz_commutators() {
        let s = space();
        let j01 = VectorField::parse("J01", "t*d/dx + x*d/dt", &s).unwrap();
        let j02 = VectorField::parse("J02", "t*d/dy + y*d/dt", &s).unwrap();
        let j = rotation(&s);
        // direct expansion gives [J01, J02] = x d/dy - y d/dx
        let c = j01.commutator(&j02, &s);
        assert_eq!(c.xi(), j.xi());
        assert_eq!(c.eta(), j.eta());
        let inv = s.parse("u_x*u_tx*u_t - u_t^2*u_tt + u_x*u_xy*u_y").unwrap();
        let a = j01.prolong(&s, 2).unwrap();
        let b = j02.prolong(&s, 2).unwrap();
        let lhs = &a.apply(&b.apply(&inv).unwrap()).unwrap() - &b.apply(&a.apply(&inv).unwrap()).unwrap();
        let rhs = c.prolong(&s, 2).unwrap().apply(&inv).unwrap();
        assert_eq!(lhs, rhs);
    }
}
