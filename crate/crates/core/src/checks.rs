//! Invariance verdicts: Lie, Q-conditional, conditional, absolute and
//! conditional differential invariants.

use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::expr::Expression;
use crate::field::{FieldError, VectorField};
use crate::jet::{JetError, JetSpace};
use crate::manifold::{build_manifold, build_manifold_with_equation, ConditionSet, ConstraintManifold, ManifoldError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CheckError {
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Manifold(#[from] ManifoldError),
    #[error(transparent)]
    Jet(#[from] JetError),
    #[error("no operators given")]
    NoFields,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckKind {
    Lie,
    QConditional,
    Conditional,
    AbsoluteInvariant,
    ConditionalInvariant,
    Hidden,
}

impl CheckKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CheckKind::Lie => "lie",
            CheckKind::QConditional => "q-conditional",
            CheckKind::Conditional => "conditional",
            CheckKind::AbsoluteInvariant => "absolute-invariant",
            CheckKind::ConditionalInvariant => "conditional-invariant",
            CheckKind::Hidden => "hidden",
        }
    }
}

/// One quantity that must vanish: the operator applied to an expression,
/// before and after reduction modulo the manifold.
#[derive(Debug, Clone, PartialEq)]
pub struct Residual {
    pub field: String,
    pub target: String,
    pub raw: Expression,
    pub reduced: Expression,
}

#[derive(Clone)]
pub struct Verdict {
    pub kind: CheckKind,
    pub holds: bool,
    pub residuals: Vec<Residual>,
    pub manifold: ConstraintManifold,
    pub domain_notes: BTreeSet<Expression>,
    pub notes: Vec<String>,
    /// For conditional checks: whether the field fails to be a Lie symmetry
    /// of the equation alone.
    pub proper: Option<bool>,
    pub sub_verdicts: Vec<(String, Verdict)>,
}

impl Verdict {
    fn assemble(kind: CheckKind, residuals: Vec<Residual>, manifold: ConstraintManifold) -> Self {
        let holds = residuals.iter().all(|r| r.reduced.is_zero());
        let mut domain_notes = manifold.domain_notes().clone();
        for r in &residuals {
            domain_notes.extend(r.raw.singular_factors());
            domain_notes.extend(r.reduced.singular_factors());
        }
        Verdict {
            kind,
            holds,
            residuals,
            manifold,
            domain_notes,
            notes: Vec::new(),
            proper: None,
            sub_verdicts: Vec::new(),
        }
    }

    /// The first nonvanishing reduced residual, or zero.
    pub fn residual(&self) -> Expression {
        self.residuals
            .iter()
            .find(|r| !r.reduced.is_zero())
            .map(|r| r.reduced.clone())
            .unwrap_or_else(Expression::zero)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "kind": self.kind.as_str(),
            "holds": self.holds,
            "proper": self.proper,
            "residuals": self.residuals.iter().map(|r| serde_json::json!({
                "field": r.field,
                "target": r.target,
                "raw": r.raw.to_string(),
                "reduced": r.reduced.to_string(),
            })).collect::<Vec<_>>(),
            "manifold": self.manifold.solved().iter().map(|(label, c)| serde_json::json!({
                "from": label,
                "lhs": c.label(),
                "rhs": self.manifold.rules()[c].to_string(),
            })).collect::<Vec<_>>(),
            "domain_notes": self.domain_notes.iter().map(|n| format!("{n} != 0")).collect::<Vec<_>>(),
            "notes": self.notes,
            "sub_verdicts": self.sub_verdicts.iter().map(|(l, v)| serde_json::json!({
                "label": l,
                "verdict": v.to_json(),
            })).collect::<Vec<_>>(),
        })
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.kind.as_str(), if self.holds { "holds" } else { "fails" })?;
        match self.proper {
            Some(true) => write!(f, " (proper)")?,
            Some(false) => write!(f, " (not proper: also a Lie symmetry)")?,
            None => {}
        }
        writeln!(f)?;
        for r in &self.residuals {
            writeln!(f, "  {} on {}: {}", r.field, r.target, r.reduced)?;
        }
        for (label, c) in self.manifold.solved() {
            writeln!(f, "  rule {} -> {}    [{label}]", c, self.manifold.rules()[c])?;
        }
        if !self.domain_notes.is_empty() {
            let notes: Vec<String> = self.domain_notes.iter().map(|n| format!("{n} != 0")).collect();
            writeln!(f, "  domain: {}", notes.join(", "))?;
        }
        for n in &self.notes {
            writeln!(f, "  note: {n}")?;
        }
        for (label, v) in &self.sub_verdicts {
            let text = v.to_string();
            let mut lines = text.lines();
            if let Some(first) = lines.next() {
                writeln!(f, "  [{label}] {first}")?;
            }
            for line in lines {
                writeln!(f, "  {line}")?;
            }
        }
        Ok(())
    }
}

impl fmt::Debug for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

fn residual(
    field: &VectorField,
    target: &str,
    raw: Expression,
    m: &ConstraintManifold,
) -> Result<Residual, CheckError> {
    let reduced = m.reduce(&raw)?;
    Ok(Residual {
        field: field.name().to_string(),
        target: target.to_string(),
        raw,
        reduced,
    })
}

const NOT_SOLVABLE: &str = "equation could not be solved for a jet coordinate; checked without it on the manifold";

/// Lie invariance: the prolonged field annihilates `F` on `F = 0`.
pub fn check_lie_invariance(field: &VectorField, f: &Expression, space: &JetSpace) -> Result<Verdict, CheckError> {
    let l = f.order().max(1);
    let (m, included) = build_manifold_with_equation(space, f, &ConditionSet::new())?;
    let pf = field.prolong(space, l)?;
    let r = residual(field, "F", pf.apply(f)?, &m)?;
    let mut v = Verdict::assemble(CheckKind::Lie, vec![r], m);
    if !included {
        v.notes.push(NOT_SOLVABLE.to_string());
    }
    Ok(v)
}

/// Invariance of `F = 0` together with `Q[u] = 0` and its consequences up to
/// order `l - 1`. Both the residual on `F` and on `Q[u]` are reported.
pub fn check_q_conditional(field: &VectorField, f: &Expression, space: &JetSpace) -> Result<Verdict, CheckError> {
    let l = f.order().max(1);
    let q = field.characteristic(space);
    let mut conditions = ConditionSet::new();
    for (r, g) in q.iter().enumerate() {
        if !g.is_zero() {
            conditions.push(&characteristic_label(space, r), g.clone(), Some(l - 1));
        }
    }
    let (m, included) = build_manifold_with_equation(space, f, &conditions)?;
    let pf = field.prolong(space, l)?;
    let mut residuals = vec![residual(field, "F", pf.apply(f)?, &m)?];
    for (r, g) in q.iter().enumerate() {
        if !g.is_zero() {
            residuals.push(residual(field, &characteristic_label(space, r), pf.apply(g)?, &m)?);
        }
    }
    let mut v = Verdict::assemble(CheckKind::QConditional, residuals, m);
    if !included {
        v.notes.push(NOT_SOLVABLE.to_string());
    }
    Ok(v)
}

fn characteristic_label(space: &JetSpace, r: usize) -> String {
    if space.dependent_names().len() == 1 {
        "Q[u]".to_string()
    } else {
        format!("Q[{}]", space.dependent_names()[r])
    }
}

/// Invariance of `F = 0` together with the given conditions; consequences
/// default to order `l - l1` per condition. The verdict is flagged proper
/// when the field is not a Lie symmetry of `F` alone.
pub fn check_conditional_invariance(
    field: &VectorField,
    f: &Expression,
    conditions: &ConditionSet,
    space: &JetSpace,
) -> Result<Verdict, CheckError> {
    let l = f.order().max(1);
    let conditions = conditions.resolved_for(l);
    let (m, included) = build_manifold_with_equation(space, f, &conditions)?;
    let k = conditions
        .conditions()
        .iter()
        .map(|c| c.generator.order())
        .max()
        .unwrap_or(0)
        .max(l);
    let pf = field.prolong(space, k)?;
    let mut residuals = vec![residual(field, "F", pf.apply(f)?, &m)?];
    for c in conditions.conditions() {
        residuals.push(residual(field, &c.label, pf.apply(&c.generator)?, &m)?);
    }
    let mut v = Verdict::assemble(CheckKind::Conditional, residuals, m);
    if !included {
        v.notes.push(NOT_SOLVABLE.to_string());
    }
    let lie = check_lie_invariance(field, f, space)?;
    v.proper = Some(!lie.holds);
    v.sub_verdicts.push(("lie".to_string(), lie));
    Ok(v)
}

/// Absolute differential invariant: every prolonged field annihilates `I`
/// identically.
pub fn check_absolute_invariant(
    fields: &[VectorField],
    invariant: &Expression,
    space: &JetSpace,
) -> Result<Verdict, CheckError> {
    if fields.is_empty() {
        return Err(CheckError::NoFields);
    }
    let k = invariant.order().max(1);
    let m = ConstraintManifold::identity();
    let residuals = fields
        .iter()
        .map(|field| {
            let pf = field.prolong(space, k)?;
            residual(field, "I", pf.apply(invariant)?, &m)
        })
        .collect::<Result<Vec<_>, CheckError>>()?;
    Ok(Verdict::assemble(CheckKind::AbsoluteInvariant, residuals, m))
}

/// Conditional differential invariant: on the manifold of the conditions
/// (without any equation) every prolonged field annihilates `I` and each
/// condition. Consequence orders default to `ord I - ord G`.
pub fn check_conditional_differential_invariant(
    fields: &[VectorField],
    invariant: &Expression,
    conditions: &ConditionSet,
    space: &JetSpace,
) -> Result<Verdict, CheckError> {
    if fields.is_empty() {
        return Err(CheckError::NoFields);
    }
    let conditions = conditions.resolved_for(invariant.order());
    let m = build_manifold(space, &conditions)?;
    let k = invariant.order().max(conditions.max_order()).max(1);
    let mut residuals = Vec::new();
    for field in fields {
        let pf = field.prolong(space, k)?;
        residuals.push(residual(field, "I", pf.apply(invariant)?, &m)?);
        for c in conditions.conditions() {
            residuals.push(residual(field, &c.label, pf.apply(&c.generator)?, &m)?);
        }
    }
    Ok(Verdict::assemble(CheckKind::ConditionalInvariant, residuals, m))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn space() -> JetSpace {
        JetSpace::declare(&["t", "x", "y"], &["u"], 2, Some(&[1, -1, -1]))
            .unwrap()
            .with_function("f", 3)
            .unwrap()
            .with_function("K1", 3)
            .unwrap()
            .with_function("K2", 2)
            .unwrap()
    }

    fn op(s: &JetSpace, text: &str) -> VectorField {
        VectorField::parse(text, text, s).unwrap()
    }

    #[test]
    fn lie_examples() {
        let s = space();
        let wave = s.parse("u_tt - u_xx - f(t, x, u)").unwrap();
        assert!(check_lie_invariance(&op(&s, "d/dy"), &wave, &s).unwrap().holds);
        let f = s.parse("u_t + u_x*K1(t, y, u) + u_y*K2(t, u) + u_xx + u_yy").unwrap();
        assert!(check_lie_invariance(&op(&s, "d/dx"), &f, &s).unwrap().holds);
        let v = check_lie_invariance(&op(&s, "d/dy"), &f, &s).unwrap();
        assert!(!v.holds);
        assert_eq!(v.residual(), s.parse("u_x*K1_{2}(t, y, u)").unwrap());
    }

    #[test]
    fn q_conditional_examples() {
        let s = space();
        let j = op(&s, "x*d/dy - y*d/dx");
        assert!(check_q_conditional(&j, &s.parse("u_t").unwrap(), &s).unwrap().holds);
        let v = check_q_conditional(&j, &s.parse("u_x - 1").unwrap(), &s).unwrap();
        assert!(!v.holds);
        assert_eq!(v.residual(), s.parse("-y/x").unwrap());
    }

    #[test]
    fn conditional_not_proper() {
        let s = space();
        let set = ConditionSet::new().with("G", s.parse("u_x").unwrap(), None);
        let v = check_conditional_invariance(&op(&s, "d/dx"), &s.parse("u_t").unwrap(), &set, &s).unwrap();
        assert!(v.holds);
        assert_eq!(v.proper, Some(false));
    }

    #[test]
    fn absolute_invariants() {
        let s = space();
        let j = op(&s, "x*d/dy - y*d/dx");
        assert!(check_absolute_invariant(std::slice::from_ref(&j), &s.parse("x*u_x + y*u_y").unwrap(), &s).unwrap().holds);
        let v = check_absolute_invariant(&[j], &s.parse("u_x").unwrap(), &s).unwrap();
        assert!(!v.holds);
        assert_eq!(v.residual(), s.parse("-u_y").unwrap());
        assert!(matches!(
            check_absolute_invariant(&[], &s.parse("u").unwrap(), &s),
            Err(CheckError::NoFields)
        ));
    }

    #[test]
    fn conditional_differential_invariant() {
        let s = space();
        let j = op(&s, "x*d/dy - y*d/dx");
        let set = ConditionSet::new().with("rot", s.parse("x*u_y - y*u_x").unwrap(), None);
        let v = check_conditional_differential_invariant(std::slice::from_ref(&j), &s.parse("u_x/x").unwrap(), &set, &s).unwrap();
        assert!(v.holds);
        assert_eq!(v.residuals[0].raw, s.parse("y*u_x/x^2 - u_y/x").unwrap());
        assert!(v.domain_notes.contains(&s.parse("x").unwrap()));
        let v = check_conditional_differential_invariant(&[j], &s.parse("u_tx/x").unwrap(), &set, &s).unwrap();
        assert!(v.holds);
    }
}
