//! Constraint manifolds: condition sets, their total-derivative consequences,
//! and reduction of expressions to normal form modulo triangular rules.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::expr::{Coordinate, ExprError, Expression, Rules};
use crate::jet::{JetError, JetSpace};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ManifoldError {
    #[error("condition `{label}` is zero")]
    ZeroGenerator { label: String },
    #[error("equation `{label}` cannot be solved rationally for any jet coordinate: {equation}")]
    NotSolvable { label: String, equation: String },
    #[error("inconsistent manifold: `{label}` reduces to {residual}, which has no jet coordinate to solve for")]
    Inconsistent { label: String, residual: String },
    #[error(transparent)]
    Jet(#[from] JetError),
    #[error(transparent)]
    Expr(#[from] ExprError),
}

/// One condition `G = 0` with the order up to which its differential
/// consequences are taken. `None` means "decided by the caller".
#[derive(Debug, Clone, PartialEq)]
pub struct Condition {
    pub label: String,
    pub generator: Expression,
    pub consequence_order: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConditionSet {
    conditions: Vec<Condition>,
}

impl ConditionSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Unlabelled generators sharing one consequence order.
    pub fn from_generators(generators: &[Expression], order: usize) -> Self {
        let mut s = Self::new();
        for (k, g) in generators.iter().enumerate() {
            s.push(&format!("G{}", k + 1), g.clone(), Some(order));
        }
        s
    }

    pub fn push(&mut self, label: &str, generator: Expression, consequence_order: Option<usize>) {
        self.conditions.push(Condition {
            label: label.to_string(),
            generator,
            consequence_order,
        });
    }

    pub fn with(mut self, label: &str, generator: Expression, consequence_order: Option<usize>) -> Self {
        self.push(label, generator, consequence_order);
        self
    }

    pub fn conditions(&self) -> &[Condition] {
        &self.conditions
    }

    pub fn generators(&self) -> Vec<Expression> {
        self.conditions.iter().map(|c| c.generator.clone()).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.conditions.is_empty()
    }

    pub fn len(&self) -> usize {
        self.conditions.len()
    }

    /// Fills in missing consequence orders as `target - ord G` (floored at 0).
    pub fn resolved_for(&self, target: usize) -> ConditionSet {
        let conditions = self
            .conditions
            .iter()
            .map(|c| Condition {
                consequence_order: Some(
                    c.consequence_order
                        .unwrap_or_else(|| target.saturating_sub(c.generator.order())),
                ),
                ..c.clone()
            })
            .collect();
        ConditionSet { conditions }
    }

    /// Highest order reached by a generator or one of its consequences.
    pub fn max_order(&self) -> usize {
        self.conditions
            .iter()
            .map(|c| c.generator.order() + c.consequence_order.unwrap_or(0))
            .max()
            .unwrap_or(0)
    }

    /// Every equation of the manifold before triangularization: generators,
    /// then first consequences of all generators, then second, and so on.
    pub fn expanded(&self, space: &JetSpace) -> Result<Vec<(String, Expression)>, ManifoldError> {
        let space = space.at_least(self.max_order().max(1))?;
        let mut levels: Vec<Vec<(String, Expression)>> = Vec::new();
        for c in &self.conditions {
            if c.generator.is_zero() {
                return Err(ManifoldError::ZeroGenerator {
                    label: c.label.clone(),
                });
            }
            let k = c.consequence_order.unwrap_or(0);
            let names = space.independent_names();
            for ord in 0..=k {
                if levels.len() <= ord {
                    levels.push(Vec::new());
                }
                for multi in space.multi_indices(ord) {
                    let e = space.total_derivative_multi(&c.generator, &multi)?;
                    let suffix: String = multi.iter().map(|&i| &*names[i as usize]).collect();
                    let label = if suffix.is_empty() {
                        c.label.clone()
                    } else {
                        format!("D_{suffix} {}", c.label)
                    };
                    levels[ord].push((label, e));
                }
            }
        }
        Ok(levels.into_iter().flatten().collect())
    }
}

/// Triangular rewrite rules `leading coordinate -> expression` together with
/// the nonvanishing requirements introduced while solving.
#[derive(Clone, PartialEq, Default)]
pub struct ConstraintManifold {
    rules: Rules,
    solved: Vec<(String, Coordinate)>,
    domain_notes: BTreeSet<Expression>,
    source: ConditionSet,
    dependent_equations: Vec<String>,
}

impl ConstraintManifold {
    pub fn identity() -> Self {
        Self::default()
    }

    pub fn rules(&self) -> &Rules {
        &self.rules
    }

    /// Solved equations in the order they were processed, with the
    /// coordinate each one was solved for.
    pub fn solved(&self) -> &[(String, Coordinate)] {
        &self.solved
    }

    /// Factors required to be nonzero, e.g. `x` for `x != 0`.
    pub fn domain_notes(&self) -> &BTreeSet<Expression> {
        &self.domain_notes
    }

    pub fn source(&self) -> &ConditionSet {
        &self.source
    }

    /// Labels of equations that reduced to zero given the earlier ones.
    pub fn dependent_equations(&self) -> &[String] {
        &self.dependent_equations
    }

    pub fn is_identity(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn is_bound(&self, c: &Coordinate) -> bool {
        self.rules.contains_key(c)
    }

    pub fn reduce(&self, e: &Expression) -> Result<Expression, ManifoldError> {
        Ok(e.substitute(&self.rules)?)
    }

    pub fn is_zero_on(&self, e: &Expression) -> Result<bool, ManifoldError> {
        Ok(self.reduce(e)?.is_zero())
    }

    /// Adds one equation. Returns `Ok(None)` when it is a consequence of the
    /// current rules, `Ok(Some(c))` with the solved coordinate otherwise.
    pub fn add_equation(&mut self, label: &str, e: &Expression) -> Result<Option<Coordinate>, ManifoldError> {
        let r = self.reduce(e)?;
        if r.is_zero() {
            self.dependent_equations.push(label.to_string());
            return Ok(None);
        }
        let candidates: Vec<Coordinate> = r.coordinates().into_iter().filter(|c| c.is_jet()).collect();
        if candidates.is_empty() {
            return Err(ManifoldError::Inconsistent {
                label: label.to_string(),
                residual: r.to_string(),
            });
        }
        let mut best: Option<(Coordinate, Expression, Expression, usize)> = None;
        for c in candidates {
            let Some((coeff, rest)) = r.solve_affine(&c) else {
                continue;
            };
            let notes = coeff
                .recip()
                .expect("nonzero coefficient")
                .singular_factors()
                .into_iter()
                .filter(|n| !self.domain_notes.contains(n))
                .count();
            let better = match &best {
                None => true,
                Some((b, _, _, bn)) => (c.order(), std::cmp::Reverse(notes), &c) > (b.order(), std::cmp::Reverse(*bn), b),
            };
            if better {
                best = Some((c, coeff, rest, notes));
            }
        }
        let Some((c, coeff, rest)) = best.map(|(c, k, r, _)| (c, k, r)) else {
            return Err(ManifoldError::NotSolvable {
                label: label.to_string(),
                equation: r.to_string(),
            });
        };
        let rhs = (-&rest).checked_div(&coeff).expect("nonzero coefficient");
        self.domain_notes.extend(coeff.recip().unwrap().singular_factors());
        self.domain_notes.extend(rhs.singular_factors());
        let single: Rules = [(c.clone(), rhs.clone())].into_iter().collect();
        for v in self.rules.values_mut() {
            if v.mentions(&c) {
                *v = v.substitute(&single)?;
                self.domain_notes.extend(v.singular_factors());
            }
        }
        self.rules.insert(c.clone(), rhs);
        self.solved.push((label.to_string(), c.clone()));
        Ok(Some(c))
    }
}

pub fn build_manifold(space: &JetSpace, conditions: &ConditionSet) -> Result<ConstraintManifold, ManifoldError> {
    let mut m = ConstraintManifold {
        source: conditions.clone(),
        ..Default::default()
    };
    for (label, e) in conditions.expanded(space)? {
        m.add_equation(&label, &e)?;
    }
    Ok(m)
}

/// Manifold of `conditions` with the equation `F = 0` added last. When `F`
/// cannot be solved for any jet coordinate it is left out and `false` is
/// returned alongside the manifold.
pub fn build_manifold_with_equation(
    space: &JetSpace,
    equation: &Expression,
    conditions: &ConditionSet,
) -> Result<(ConstraintManifold, bool), ManifoldError> {
    let mut m = build_manifold(space, conditions)?;
    let mut trial = m.clone();
    match trial.add_equation("F", equation) {
        Ok(_) => Ok((trial, true)),
        Err(ManifoldError::NotSolvable { .. }) => {
            m.source = conditions.clone();
            Ok((m, false))
        }
        Err(e) => Err(e),
    }
}

impl fmt::Debug for ConstraintManifold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (label, c) in &self.solved {
            writeln!(f, "{c} -> {}    [{label}]", self.rules[c])?;
        }
        if !self.domain_notes.is_empty() {
            let notes: Vec<String> = self.domain_notes.iter().map(|n| format!("{n} != 0")).collect();
            writeln!(f, "where {}", notes.join(", "))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn space() -> JetSpace {
        JetSpace::declare(&["t", "x", "y"], &["u"], 2, Some(&[1, -1, -1])).unwrap()
    }

    fn rule(m: &ConstraintManifold, s: &JetSpace, lhs: &str) -> Expression {
        let c = s.parse(lhs).unwrap().as_coord().unwrap().clone();
        m.rules()[&c].clone()
    }

    #[test]
    fn translation_manifold() {
        let s = space();
        let set = ConditionSet::new().with("Q", s.parse("-u_x").unwrap(), Some(1));
        let m = build_manifold(&s, &set).unwrap();
        let lhs: Vec<&str> = m.rules().keys().map(|c| c.label()).collect();
        assert_eq!(lhs, ["u_x", "u_tx", "u_xx", "u_xy"]);
        assert!(m.rules().values().all(|e| e.is_zero()));
        assert!(m.domain_notes().is_empty());
        let s2 = s.clone().with_function("f", 3).unwrap();
        let r2 = s2.parse("u_x*f(t, u, u_t)").unwrap();
        assert!(m.is_zero_on(&r2).unwrap());
    }

    #[test]
    fn rotation_manifold() {
        let s = space();
        let set = ConditionSet::new().with("rot", s.parse("x*u_y - y*u_x").unwrap(), Some(1));
        let m = build_manifold(&s, &set).unwrap();
        assert_eq!(rule(&m, &s, "u_y"), s.parse("y*u_x/x").unwrap());
        assert_eq!(rule(&m, &s, "u_ty"), s.parse("y*u_tx/x").unwrap());
        assert_eq!(rule(&m, &s, "u_xy"), s.parse("(y*u_xx - y*u_x/x)/x").unwrap());
        let x = s.parse("x").unwrap();
        assert!(m.domain_notes().contains(&x));
        for lhs in m.rules().keys() {
            for rhs in m.rules().values() {
                assert!(!rhs.mentions(lhs));
            }
        }
        assert!(m.is_zero_on(&s.parse("y*u_x/x^2 - u_y/x").unwrap()).unwrap());
        assert!(m.is_zero_on(&s.parse("u_x/x - u_y/y").unwrap()).unwrap());
        assert!(m.is_zero_on(&s.parse("x*u_y - y*u_x").unwrap()).unwrap());
        assert!(!m.is_zero_on(&s.parse("u_x").unwrap()).unwrap());
    }

    #[test]
    fn lorentz_manifold_has_dependent_generator() {
        let s = space();
        let set = ConditionSet::new()
            .with("L1", s.parse("t*u_x + x*u_t").unwrap(), Some(1))
            .with("L2", s.parse("t*u_y + y*u_t").unwrap(), Some(1))
            .with("L3", s.parse("x*u_y - y*u_x").unwrap(), Some(1));
        let m = build_manifold(&s, &set).unwrap();
        assert_eq!(rule(&m, &s, "u_x"), s.parse("-x*u_t/t").unwrap());
        assert_eq!(rule(&m, &s, "u_y"), s.parse("-y*u_t/t").unwrap());
        assert!(m.dependent_equations().contains(&"L3".to_string()));
        assert!(m.domain_notes().contains(&s.parse("t").unwrap()));
        let universe = s.universe();
        let free: Vec<&str> = universe
            .iter()
            .filter(|c| !m.is_bound(c))
            .map(|c| c.label())
            .collect();
        assert_eq!(free, ["t", "x", "y", "u", "u_t", "u_tt"]);
    }

    #[test]
    fn identity_manifold() {
        let s = space();
        let m = build_manifold(&s, &ConditionSet::new()).unwrap();
        let e = s.parse("u_x + x").unwrap();
        assert_eq!(m.reduce(&e).unwrap(), e);
    }

    #[test]
    fn inconsistent_and_unsolvable() {
        let s = space().with_function("f", 1).unwrap();
        let set = ConditionSet::new()
            .with("a", s.parse("u_x").unwrap(), Some(0))
            .with("b", s.parse("u_x + 1").unwrap(), Some(0));
        assert!(matches!(build_manifold(&s, &set), Err(ManifoldError::Inconsistent { .. })));
        let set = ConditionSet::new().with("c", s.parse("u_x^2 + f(u_t)").unwrap(), Some(0));
        assert!(matches!(build_manifold(&s, &set), Err(ManifoldError::NotSolvable { .. })));
        let set = ConditionSet::new().with("z", Expression::zero(), Some(0));
        assert!(matches!(build_manifold(&s, &set), Err(ManifoldError::ZeroGenerator { .. })));
    }

    #[test]
    fn unsolvable_equation_is_left_out() {
        let s = space().with_function("f", 1).unwrap();
        let f = s.parse("f(u_xx) - u_x^2").unwrap();
        let (m, included) = build_manifold_with_equation(&s, &f, &ConditionSet::new()).unwrap();
        assert!(!included);
        assert!(m.is_identity());
        let g = s.parse("u_tt - u_xx - u_yy").unwrap();
        let (m, included) = build_manifold_with_equation(&s, &g, &ConditionSet::new()).unwrap();
        assert!(included);
        assert_eq!(rule(&m, &s, "u_yy"), s.parse("u_tt - u_xx").unwrap());
    }
}
