//! Reductions: ansätze `u = phi(invariant variables)` and translations, the
//! hidden-symmetry check, and lifting reduced equations back.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::checks::{check_lie_invariance, CheckError, CheckKind, Verdict};
use crate::expr::{CoordKind, Coordinate, ExprError, Expression, Rules, Var};
use crate::field::VectorField;
use crate::jet::{JetError, JetSpace};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReductionError {
    #[error("not reducible: {}", format_residuals(.residuals))]
    NotReducible { residuals: Vec<(String, Expression)> },
    #[error("equation depends explicitly on `{0}`")]
    DependsOnEliminated(String),
    #[error("section is singular: {0}")]
    SingularSection(String),
    #[error("projection undefined: {0}")]
    ProjectionUndefined(String),
    #[error("cannot invert the chain rule for `{0}`")]
    NotInvertible(String),
    #[error("coordinate `{0}` has no counterpart in the target space")]
    NoCounterpart(String),
    #[error("bad ansatz: {0}")]
    BadAnsatz(String),
    #[error(transparent)]
    Check(#[from] CheckError),
    #[error(transparent)]
    Jet(#[from] JetError),
    #[error(transparent)]
    Expr(#[from] ExprError),
}

fn format_residuals(r: &[(String, Expression)]) -> String {
    r.iter()
        .map(|(f, e)| format!("{f} leaves {e}"))
        .collect::<Vec<_>>()
        .join("; ")
}

/// `u = phi(retained, w)` with one new variable `w` given in the old
/// independents, plus the data needed to test and emit reductions.
#[derive(Debug, Clone)]
pub struct Ansatz {
    pub name: String,
    pub retained: Vec<String>,
    pub new_var: (String, Expression),
    pub reduced_dependent: String,
    /// Fields whose geometric action must annihilate a reducible expression.
    pub annihilators: Vec<VectorField>,
    /// Eliminated independents as functions of the section parameter `s`;
    /// the new variable restricted to the section must equal `s^2`.
    pub section: Vec<(String, Expression)>,
}

/// The section parameter used when pinning ansatz reductions.
pub fn section_parameter() -> Coordinate {
    Coordinate::parameter(20_000, "s")
}

#[derive(Debug, Clone)]
pub enum Reduction {
    Translation { variable: String },
    Ansatz(Ansatz),
}

#[derive(Debug, Clone)]
pub struct ReductionResult {
    pub reduced: Expression,
    pub space: JetSpace,
    /// Substitutions applied: old coordinate label and its image.
    pub trace: Vec<(String, Expression)>,
}

impl Reduction {
    pub fn name(&self) -> String {
        match self {
            Reduction::Translation { variable } => format!("d/d{variable}"),
            Reduction::Ansatz(a) => a.name.clone(),
        }
    }

    pub fn reduced_space(&self, space: &JetSpace) -> Result<JetSpace, ReductionError> {
        match self {
            Reduction::Translation { variable } => {
                space.independent_index(variable)?;
                let indeps: Vec<&str> = space
                    .independent_names()
                    .iter()
                    .map(|s| &**s)
                    .filter(|s| s != variable)
                    .collect();
                let metric = space.metric().map(|m| {
                    let k = space.independent_index(variable).unwrap();
                    m.iter()
                        .enumerate()
                        .filter(|(i, _)| *i != k)
                        .map(|(_, g)| *g)
                        .collect::<Vec<i8>>()
                });
                let deps: Vec<&str> = space.dependent_names().iter().map(|s| &**s).collect();
                let s = JetSpace::declare(&indeps, &deps, space.max_order(), metric.as_deref())?;
                copy_symbols(space, s)
            }
            Reduction::Ansatz(a) => {
                let mut indeps: Vec<&str> = a.retained.iter().map(|s| s.as_str()).collect();
                indeps.push(&a.new_var.0);
                let s = JetSpace::declare(&indeps, &[a.reduced_dependent.as_str()], space.max_order(), None)?
                    .as_reduced();
                copy_symbols(space, s)
            }
        }
    }

    pub fn reduce(&self, f: &Expression, space: &JetSpace) -> Result<ReductionResult, ReductionError> {
        match self {
            Reduction::Translation { variable } => reduce_by_translation(f, variable, space),
            Reduction::Ansatz(a) => apply_ansatz(f, a, space),
        }
    }

    /// Push-forward of `X` to the reduced variables.
    pub fn project(&self, field: &VectorField, space: &JetSpace) -> Result<VectorField, ReductionError> {
        let target = self.reduced_space(space)?;
        match self {
            Reduction::Translation { variable } => {
                let k = space.independent_index(variable)?;
                let x = space.independent(k);
                let mut xi = Vec::new();
                for (i, e) in field.xi().iter().enumerate() {
                    if e.mentions(&x) {
                        return Err(ReductionError::ProjectionUndefined(format!(
                            "component {} of `{}` depends on `{variable}`",
                            space.independent_names()[i],
                            field.name()
                        )));
                    }
                    if i != k {
                        xi.push(retarget(e, space, &target)?);
                    }
                }
                let eta = field
                    .eta()
                    .iter()
                    .map(|e| {
                        if e.mentions(&x) {
                            Err(ReductionError::ProjectionUndefined(format!(
                                "`{}` acts on u through `{variable}`",
                                field.name()
                            )))
                        } else {
                            retarget(e, space, &target)
                        }
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                VectorField::new(field.name(), xi, eta, &target).map_err(|e| ReductionError::ProjectionUndefined(e.to_string()))
            }
            Reduction::Ansatz(a) => {
                let mut xi = Vec::new();
                for name in &a.retained {
                    let i = space.independent_index(name)?;
                    xi.push(a.to_reduced(&field.xi()[i], space, &target, field.name())?);
                }
                let w = field.act(&a.new_var.1, space);
                xi.push(a.to_reduced(&w, space, &target, field.name())?);
                let eta = vec![a.to_reduced(&field.eta()[0], space, &target, field.name())?];
                VectorField::new(field.name(), xi, eta, &target).map_err(|e| ReductionError::ProjectionUndefined(e.to_string()))
            }
        }
    }

    /// Rewrites a reduced expression in the original variables.
    pub fn lift(&self, g: &Expression, space: &JetSpace) -> Result<Expression, ReductionError> {
        let target = self.reduced_space(space)?;
        match self {
            Reduction::Translation { .. } => retarget(g, &target, space),
            Reduction::Ansatz(a) => a.lift(g, space, &target),
        }
    }
}

fn copy_symbols(from: &JetSpace, mut to: JetSpace) -> Result<JetSpace, ReductionError> {
    let params: Vec<&str> = from.parameter_names().iter().map(|s| &**s).collect();
    to = to.with_parameters(&params)?;
    for (name, arity) in from.functions() {
        to = to.with_function(name, *arity)?;
    }
    Ok(to)
}

/// Maps every coordinate of `e` to the coordinate with the same name in
/// `to`; jets are matched by dependent name and derivative names.
pub fn retarget(e: &Expression, from: &JetSpace, to: &JetSpace) -> Result<Expression, ReductionError> {
    let mut rules = Rules::new();
    for c in e.coordinates() {
        let d = counterpart(&c, from, to)?;
        if d != c {
            rules.insert(c, Expression::coord(&d));
        }
    }
    Ok(e.substitute_simultaneous(&rules)?)
}

fn counterpart(c: &Coordinate, from: &JetSpace, to: &JetSpace) -> Result<Coordinate, ReductionError> {
    let missing = || ReductionError::NoCounterpart(c.label().to_string());
    match c.kind() {
        CoordKind::Parameter => {
            let i = to
                .parameter_names()
                .iter()
                .position(|n| **n == *c.name())
                .ok_or_else(missing)?;
            Ok(to.parameter(i))
        }
        CoordKind::Independent => to.independent_index(c.name()).map(|i| to.independent(i)).map_err(|_| missing()),
        _ => {
            let names = from.independent_names();
            let wrt: Vec<&str> = c.multi_index().iter().map(|&i| &*names[i as usize]).collect();
            to.jet_by_names(c.name(), &wrt).map_err(|_| missing())
        }
    }
}

/// Sets every jet differentiated in `variable` to zero and checks that no
/// explicit dependence on `variable` remains.
pub fn reduce_by_translation(
    f: &Expression,
    variable: &str,
    space: &JetSpace,
) -> Result<ReductionResult, ReductionError> {
    let k = space.independent_index(variable)?;
    if f.mentions(&space.independent(k)) {
        return Err(ReductionError::DependsOnEliminated(variable.to_string()));
    }
    let mut rules = Rules::new();
    let mut trace = Vec::new();
    for c in space.jets_up_to(space.max_order()) {
        if c.multi_index().contains(&(k as u8)) {
            rules.insert(c.clone(), Expression::zero());
            if f.mentions(&c) {
                trace.push((c.label().to_string(), Expression::zero()));
            }
        }
    }
    let reduced_full = f.substitute(&rules)?;
    let target = Reduction::Translation {
        variable: variable.to_string(),
    }
    .reduced_space(space)?;
    let reduced = retarget(&reduced_full, space, &target)?;
    Ok(ReductionResult {
        reduced,
        space: target,
        trace,
    })
}

impl Ansatz {
    fn new_var_gradient(&self, space: &JetSpace) -> Vec<Expression> {
        (0..space.dim())
            .map(|i| self.new_var.1.diff(&space.independent(i)))
            .collect()
    }

    /// Reduced independents in declaration order paired with their gradients
    /// in the old independents.
    fn reduced_gradients(&self, space: &JetSpace) -> Result<Vec<Vec<Expression>>, ReductionError> {
        let mut out = Vec::new();
        for name in &self.retained {
            let i = space.independent_index(name)?;
            out.push(
                (0..space.dim())
                    .map(|j| if j == i { Expression::one() } else { Expression::zero() })
                    .collect(),
            );
        }
        out.push(self.new_var_gradient(space));
        Ok(out)
    }

    /// Chain-rule images of all u-jets up to `order`, in old independents and
    /// phi-jets.
    pub fn images(
        &self,
        space: &JetSpace,
        target: &JetSpace,
        order: usize,
    ) -> Result<BTreeMap<Coordinate, Expression>, ReductionError> {
        if space.dependent_names().len() != 1 {
            return Err(ReductionError::BadAnsatz("only one dependent variable is supported".into()));
        }
        let grads = self.reduced_gradients(space)?;
        let target = target.at_least(order + 1)?;
        let mut images = BTreeMap::new();
        images.insert(space.dependent(0), Expression::coord(&target.dependent(0)));
        for ord in 1..=order {
            for multi in space.multi_indices(ord) {
                let (&i, parent) = multi.split_last().unwrap();
                let base = images[&space.jet(0, parent)].clone();
                let d = chain_derivative(&base, i as usize, space, &target, &grads);
                images.insert(space.jet(0, &multi), d);
            }
        }
        Ok(images)
    }

    /// Geometric action of the annihilators on explicit old coordinates.
    fn reducibility_residuals(&self, e: &Expression, space: &JetSpace) -> Vec<(String, Expression)> {
        self.annihilators
            .iter()
            .filter_map(|x| {
                let r = x.act_on_independents(e, space);
                (!r.is_zero()).then(|| (x.name().to_string(), r))
            })
            .collect()
    }

    /// Restricts an annihilator-invariant expression in the old independents
    /// (and possibly u or phi-jets) to the section, then rewrites powers of
    /// `s` in the new variable.
    fn pin(&self, e: &Expression, space: &JetSpace, target: &JetSpace) -> Result<Expression, ReductionError> {
        let s = section_parameter();
        let sv = Expression::coord(&s);
        let mut rules = Rules::new();
        for (name, value) in &self.section {
            let i = space.independent_index(name)?;
            rules.insert(space.independent(i), value.clone());
        }
        let w_on_section = self.new_var.1.substitute_simultaneous(&rules)?;
        if w_on_section != sv.pow(2).unwrap() {
            return Err(ReductionError::BadAnsatz(format!(
                "new variable restricted to the section is {w_on_section}, expected s^2"
            )));
        }
        for name in &self.retained {
            let i = space.independent_index(name)?;
            let j = target.independent_index(name)?;
            if space.independent(i) != target.independent(j) {
                rules.insert(space.independent(i), Expression::coord(&target.independent(j)));
            }
        }
        if e.coordinates().iter().any(|c| c.kind() == CoordKind::Dependent) {
            for c in e.coordinates() {
                if c.kind() == CoordKind::Dependent && c.order() == 0 {
                    rules.insert(c.clone(), Expression::coord(&target.dependent(0)));
                }
            }
        }
        let pinned = e
            .substitute_simultaneous(&rules)
            .map_err(|_| ReductionError::SingularSection(format!("{e} is undefined on the section")))?;
        let w = Expression::coord(&target.independent(target.dim() - 1));
        let out = pinned
            .map_powers(&Var::Coord(s.clone()), &|k| {
                if k % 2 == 0 {
                    Ok(w.pow((k / 2) as i32).unwrap())
                } else {
                    Err(ExprError::DomainRestriction {
                        vanishing: "odd power of the section parameter".into(),
                    })
                }
            })
            .map_err(|_| {
                ReductionError::SingularSection(format!("{pinned} contains odd powers of s and is not a function of {}", self.new_var.0))
            })?;
        if let Some(c) = out.coordinates().iter().find(|c| **c == s) {
            return Err(ReductionError::SingularSection(format!("`{}` remains after pinning", c)));
        }
        Ok(out)
    }

    fn to_reduced(&self, e: &Expression, space: &JetSpace, target: &JetSpace, field: &str) -> Result<Expression, ReductionError> {
        let res = self.reducibility_residuals(e, space);
        if !res.is_empty() {
            return Err(ReductionError::ProjectionUndefined(format!(
                "a component of `{field}` is not expressible in the reduced variables: {}",
                format_residuals(&res)
            )));
        }
        self.pin(e, space, target)
    }

    /// Inverse of the chain rule: each phi-jet written in u-jets and old
    /// independents, valid on the ansatz manifold.
    pub fn inversions(&self, space: &JetSpace, target: &JetSpace, order: usize) -> Result<Rules, ReductionError> {
        let images = self.images(space, target, order)?;
        let mut inv = Rules::new();
        inv.insert(target.dependent(0), Expression::coord(&space.dependent(0)));
        for ord in 1..=order {
            for k in target.multi_indices(ord) {
                let phi = target.jet(0, &k);
                let mut found = None;
                for j in space.multi_indices(ord) {
                    let img = &images[&space.jet(0, &j)];
                    let same_order_others = img
                        .coordinates()
                        .iter()
                        .any(|c| c.kind() == CoordKind::ReducedDependent && c.order() == ord && *c != phi);
                    if same_order_others {
                        continue;
                    }
                    if let Some((coeff, rest)) = img.solve_affine(&phi) {
                        let u = Expression::coord(&space.jet(0, &j));
                        let sol = (&u - &rest).checked_div(&coeff).unwrap();
                        found = Some(sol.substitute(&inv)?);
                        break;
                    }
                }
                let sol = found.ok_or_else(|| ReductionError::NotInvertible(phi.label().to_string()))?;
                inv.insert(phi, sol);
            }
        }
        Ok(inv)
    }

    fn lift(&self, g: &Expression, space: &JetSpace, target: &JetSpace) -> Result<Expression, ReductionError> {
        let order = g.order().max(1);
        let mut rules = self.inversions(space, target, order)?;
        rules.insert(target.independent(target.dim() - 1), self.new_var.1.clone());
        for name in &self.retained {
            let i = space.independent_index(name)?;
            let j = target.independent_index(name)?;
            if space.independent(i) != target.independent(j) {
                rules.insert(target.independent(j), Expression::coord(&space.independent(i)));
            }
        }
        Ok(g.substitute_simultaneous(&rules)?)
    }
}

/// Total derivative in old direction `i` of an expression in old independents
/// and phi-jets, with `phi` evaluated at the ansatz variables.
fn chain_derivative(
    e: &Expression,
    i: usize,
    space: &JetSpace,
    target: &JetSpace,
    grads: &[Vec<Expression>],
) -> Expression {
    let mut acc = Expression::zero();
    for c in e.coordinates() {
        let p = e.diff(&c);
        if p.is_zero() {
            continue;
        }
        match c.kind() {
            CoordKind::Independent if c == space.independent(i) => acc = &acc + &p,
            CoordKind::ReducedDependent => {
                for (a, g) in grads.iter().enumerate() {
                    let dw = &g[i];
                    if dw.is_zero() {
                        continue;
                    }
                    let mut m = c.multi_index().to_vec();
                    m.push(a as u8);
                    let next = Expression::coord(&target.jet(c.index(), &m));
                    acc = &acc + &(&(&p * dw) * &next);
                }
            }
            _ => {}
        }
    }
    acc
}

/// Substitutes the ansatz into `F`, verifies that the result depends on the
/// old independents only through the ansatz variables, and pins a section
/// to emit the reduced equation.
pub fn apply_ansatz(f: &Expression, a: &Ansatz, space: &JetSpace) -> Result<ReductionResult, ReductionError> {
    let target = Reduction::Ansatz(a.clone()).reduced_space(space)?;
    let order = f.order();
    let images = a.images(space, &target, order)?;
    let rules: Rules = images
        .iter()
        .filter(|(c, _)| f.mentions(c))
        .map(|(c, e)| (c.clone(), e.clone()))
        .collect();
    let trace = rules.iter().map(|(c, e)| (c.label().to_string(), e.clone())).collect();
    let substituted = f.substitute_simultaneous(&rules)?;
    let residuals = a.reducibility_residuals(&substituted, space);
    if !residuals.is_empty() {
        return Err(ReductionError::NotReducible { residuals });
    }
    let reduced = a.pin(&substituted, space, &target)?;
    Ok(ReductionResult {
        reduced,
        space: target,
        trace,
    })
}

/// Hidden symmetry: `X` projects to a Lie symmetry of the reduced equation
/// while `X` itself is not a Lie symmetry of the original.
pub fn check_hidden_symmetry(
    f: &Expression,
    reduction: &Reduction,
    field: &VectorField,
    space: &JetSpace,
) -> Result<Verdict, ReductionError> {
    let reduced = reduction.reduce(f, space)?;
    let projected = reduction.project(field, space)?;
    let on_reduced = check_lie_invariance(&projected, &reduced.reduced, &reduced.space)?;
    let on_original = check_lie_invariance(field, f, space)?;
    let mut v = on_reduced.clone();
    v.kind = CheckKind::Hidden;
    v.holds = on_reduced.holds && !on_original.holds;
    v.notes.push(format!("reduced by {}: {}", reduction.name(), reduced.reduced));
    if on_original.holds {
        v.notes
            .push(format!("`{}` is already a Lie symmetry of the original equation", field.name()));
    }
    v.proper = Some(!on_original.holds);
    v.sub_verdicts = vec![
        ("reduced".to_string(), on_reduced),
        ("original".to_string(), on_original),
    ];
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn space() -> JetSpace {
        JetSpace::declare(&["t", "x", "y"], &["u"], 2, Some(&[1, -1, -1]))
            .unwrap()
            .with_function("K1", 3)
            .unwrap()
            .with_function("K2", 2)
            .unwrap()
            .with_function("f", 3)
            .unwrap()
    }

    fn radial(s: &JetSpace) -> Ansatz {
        Ansatz {
            name: "u = phi(t, r)".into(),
            retained: vec!["t".into()],
            new_var: ("r".into(), s.parse("x^2 + y^2").unwrap()),
            reduced_dependent: "phi".into(),
            annihilators: vec![VectorField::parse("J", "x*d/dy - y*d/dx", s).unwrap()],
            section: vec![
                ("x".into(), Expression::coord(&section_parameter())),
                ("y".into(), Expression::zero()),
            ],
        }
    }

    #[test]
    fn laplacian_reduces() {
        let s = space();
        let a = radial(&s);
        let r = apply_ansatz(&s.parse("u_xx + u_yy").unwrap(), &a, &s).unwrap();
        assert_eq!(r.reduced, r.space.parse("4*r*phi_rr + 4*phi_r").unwrap());
        let r = apply_ansatz(&s.parse("u_t").unwrap(), &a, &s).unwrap();
        assert_eq!(r.reduced, r.space.parse("phi_t").unwrap());
    }

    #[test]
    fn non_invariant_equation_is_rejected() {
        let s = space();
        let a = radial(&s);
        assert!(matches!(
            apply_ansatz(&s.parse("u_t - x*u_x").unwrap(), &a, &s),
            Err(ReductionError::NotReducible { .. })
        ));
    }

    #[test]
    fn inversion_round_trip() {
        let s = space();
        let a = radial(&s);
        let target = Reduction::Ansatz(a.clone()).reduced_space(&s).unwrap();
        let inv = a.inversions(&s, &target, 2).unwrap();
        let phi_rr = target.parse("phi_rr").unwrap();
        assert_eq!(
            phi_rr.substitute_simultaneous(&inv).unwrap(),
            s.parse("(u_xx - u_x/x)/(4*x^2)").unwrap()
        );
        let g = target.parse("phi_t - 4*r*phi_rr - 4*phi_r").unwrap();
        let lifted = Reduction::Ansatz(a).lift(&g, &s).unwrap();
        assert_eq!(lifted, s.parse("u_t - (x^2+y^2)*(u_xx - u_x/x)/x^2 - 2*u_x/x").unwrap());
    }

    #[test]
    fn translation_reduction() {
        let s = space();
        let f = s.parse("u_t + u_x*K1(t, y, u) + u_y*K2(t, u) + u_xx + u_yy").unwrap();
        let r = reduce_by_translation(&f, "x", &s).unwrap();
        assert_eq!(r.reduced, r.space.parse("u_t + u_y*K2(t, u) + u_yy").unwrap());
        assert!(matches!(
            reduce_by_translation(&s.parse("u_t - x").unwrap(), "x", &s),
            Err(ReductionError::DependsOnEliminated(_))
        ));
        let w = s.parse("u_tt - u_xx - u_yy - f(t, x, u)").unwrap();
        let r = reduce_by_translation(&w, "y", &s).unwrap();
        assert_eq!(r.reduced, r.space.parse("u_tt - u_xx - f(t, x, u)").unwrap());
    }

    #[test]
    fn hidden_translation() {
        let s = space();
        let red = Reduction::Translation { variable: "x".into() };
        let dy = VectorField::translation(&s, 2);
        let f = s.parse("u_t + u_x*K1(t, y, u) + u_y*K2(t, u) + u_xx + u_yy").unwrap();
        let v = check_hidden_symmetry(&f, &red, &dy, &s).unwrap();
        assert!(v.holds, "{v}");
        let g = s.parse("u_t + u_y*K2(t, u) + u_xx + u_yy").unwrap();
        let v = check_hidden_symmetry(&g, &red, &dy, &s).unwrap();
        assert!(!v.holds);
        let bad = VectorField::parse("B", "x*d/dy", &s).unwrap();
        assert!(matches!(
            red.project(&bad, &s),
            Err(ReductionError::ProjectionUndefined(_))
        ));
    }
}
