//! Point transformations of equations and the reduce / test / transform /
//! lift pipeline over a class of equations.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::expr::{Expression, Rules};
use crate::field::VectorField;
use crate::jet::JetSpace;
use crate::reduction::{check_hidden_symmetry, Reduction, ReductionError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TransformError {
    #[error("transformation is not invertible: {0}")]
    NotInvertible(String),
    #[error("transformation must give every independent and dependent variable, missing `{0}`")]
    Missing(String),
    #[error(transparent)]
    Expr(#[from] crate::expr::ExprError),
}

/// Old variables as functions of new ones: `x_i = X_i(x, u)`, `u = U(x, u)`,
/// written in the coordinates of the space they act on.
#[derive(Debug, Clone)]
pub struct PointTransform {
    pub name: String,
    pub independents: Vec<Expression>,
    pub dependent: Expression,
}

impl PointTransform {
    pub fn parse(name: &str, space: &JetSpace, parts: &[(String, String)]) -> Result<Self, TransformError> {
        let lookup = |var: &str| -> Result<Expression, TransformError> {
            match parts.iter().find(|(v, _)| v == var) {
                Some((_, text)) => Ok(space.parse(text)?),
                None => Err(TransformError::Missing(var.to_string())),
            }
        };
        let independents = space
            .independent_names()
            .iter()
            .map(|n| lookup(n))
            .collect::<Result<Vec<_>, _>>()?;
        let dependent = lookup(&space.dependent_names()[0])?;
        for e in independents.iter().chain([&dependent]) {
            if e.order() > 0 {
                return Err(TransformError::NotInvertible(format!("`{e}` involves derivatives")));
            }
        }
        Ok(PointTransform {
            name: name.to_string(),
            independents,
            dependent,
        })
    }

    /// Determinant of `d(X, U)/d(x, u)`.
    pub fn point_jacobian(&self, space: &JetSpace) -> Expression {
        let mut vars = space.independents();
        vars.push(space.dependent(0));
        let mut comps = self.independents.clone();
        comps.push(self.dependent.clone());
        let m: Vec<Vec<Expression>> = comps.iter().map(|c| vars.iter().map(|v| c.diff(v)).collect()).collect();
        determinant(&m)
    }

    /// Rewrites `F(old)` in the new variables.
    pub fn apply(&self, f: &Expression, space: &JetSpace) -> Result<Expression, TransformError> {
        let n = space.dim();
        if self.point_jacobian(space).is_zero() {
            return Err(TransformError::NotInvertible(format!("`{}` has zero Jacobian", self.name)));
        }
        let order = f.order();
        let space = space.at_least(order + 1).map_err(|e| TransformError::NotInvertible(e.to_string()))?;
        // a[j][i] = D_j X_i
        let a: Vec<Vec<Expression>> = (0..n)
            .map(|j| {
                (0..n)
                    .map(|i| space.total_derivative_unchecked(&self.independents[i], j))
                    .collect()
            })
            .collect();
        let det = determinant(&a);
        if det.is_zero() {
            return Err(TransformError::NotInvertible(format!(
                "total Jacobian of `{}` vanishes",
                self.name
            )));
        }
        let inv = inverse(&a, &det);
        let mut rules = Rules::new();
        for i in 0..n {
            rules.insert(space.independent(i), self.independents[i].clone());
        }
        rules.insert(space.dependent(0), self.dependent.clone());
        let mut images: Vec<(Vec<u8>, Expression)> = vec![(Vec::new(), self.dependent.clone())];
        for ord in 1..=order {
            let mut next = Vec::new();
            for multi in space.multi_indices(ord) {
                let (&i, parent) = multi.split_last().unwrap();
                let base = &images.iter().find(|(m, _)| m.as_slice() == parent).unwrap().1;
                let mut img = Expression::zero();
                // u_old_{K i} = sum_j (A^-1)_{i j} D_j u_old_K with A_{j i} = D_j X_i
                for (j, c) in inv[i as usize].iter().enumerate().take(n) {
                    if !c.is_zero() {
                        img = &img + &(c * &space.total_derivative_unchecked(base, j));
                    }
                }
                rules.insert(space.jet(0, &multi), img.clone());
                next.push((multi.to_vec(), img));
            }
            images.extend(next);
        }
        Ok(f.substitute_simultaneous(&rules)?)
    }
}

fn determinant(m: &[Vec<Expression>]) -> Expression {
    match m.len() {
        0 => Expression::one(),
        1 => m[0][0].clone(),
        n => {
            let mut acc = Expression::zero();
            for col in 0..n {
                if m[0][col].is_zero() {
                    continue;
                }
                let minor: Vec<Vec<Expression>> = m[1..]
                    .iter()
                    .map(|row| row.iter().enumerate().filter(|(c, _)| *c != col).map(|(_, e)| e.clone()).collect())
                    .collect();
                let term = &m[0][col] * &determinant(&minor);
                acc = if col % 2 == 0 { &acc + &term } else { &acc - &term };
            }
            acc
        }
    }
}

/// Inverse of `a` (indexed `a[j][i]`) by cofactors, returned as `inv[i][j]`
/// with `sum_j inv[i][j] a[j][k] = delta_ik`.
fn inverse(a: &[Vec<Expression>], det: &Expression) -> Vec<Vec<Expression>> {
    let n = a.len();
    let mut out = vec![vec![Expression::zero(); n]; n];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, slot) in row.iter_mut().enumerate() {
            // cofactor of a[j][i]
            let minor: Vec<Vec<Expression>> = a
                .iter()
                .enumerate()
                .filter(|(r, _)| *r != j)
                .map(|(_, row)| row.iter().enumerate().filter(|(c, _)| *c != i).map(|(_, e)| e.clone()).collect())
                .collect();
            let c = determinant(&minor);
            let c = if (i + j) % 2 == 0 { c } else { -&c };
            *slot = c.checked_div(det).unwrap();
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct PipelineSpec {
    pub space: JetSpace,
    pub class: Vec<(String, Expression)>,
    pub reductions: Vec<Reduction>,
    pub candidates: Vec<VectorField>,
    /// Transformations of reduced equations as (name, reduction name,
    /// `variable = expression text` assignments).
    pub transforms: Vec<crate::session::TransformSpec>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CandidateRow {
    pub candidate: String,
    pub on_reduced: Option<bool>,
    pub on_original: Option<bool>,
    pub hidden: Option<bool>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TransformRow {
    pub transform: String,
    pub transformed: Option<String>,
    pub lifted: Option<String>,
    pub candidates: Vec<CandidateRow>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PipelineRow {
    pub member: String,
    pub reduction: String,
    pub reduced: Option<String>,
    pub error: Option<String>,
    pub candidates: Vec<CandidateRow>,
    pub transforms: Vec<TransformRow>,
    pub inequivalence: &'static str,
}

impl PipelineRow {
    /// Number of candidates found to be hidden symmetries, including those
    /// of lifted equations.
    pub fn hidden_count(&self) -> usize {
        let direct = self.candidates.iter().filter(|c| c.hidden == Some(true)).count();
        let lifted: usize = self
            .transforms
            .iter()
            .map(|t| t.candidates.iter().filter(|c| c.hidden == Some(true)).count())
            .sum();
        direct + lifted
    }
}

fn candidate_rows(f: &Expression, reduction: &Reduction, candidates: &[VectorField], space: &JetSpace) -> Vec<CandidateRow> {
    candidates
        .iter()
        .map(|c| match check_hidden_symmetry(f, reduction, c, space) {
            Ok(v) => CandidateRow {
                candidate: c.name().to_string(),
                on_reduced: v.sub_verdicts.first().map(|(_, s)| s.holds),
                on_original: v.sub_verdicts.get(1).map(|(_, s)| s.holds),
                hidden: Some(v.holds),
                error: None,
            },
            Err(e) => CandidateRow {
                candidate: c.name().to_string(),
                on_reduced: None,
                on_original: None,
                hidden: None,
                error: Some(e.to_string()),
            },
        })
        .collect()
}

fn lift_with_dropped(
    f: &Expression,
    reduction: &Reduction,
    reduced: &Expression,
    transformed: &Expression,
    space: &JetSpace,
) -> Result<Expression, ReductionError> {
    match reduction {
        // re-attach the terms that the reduction dropped
        Reduction::Translation { .. } => {
            let dropped = f - &reduction.lift(reduced, space)?;
            Ok(&reduction.lift(transformed, space)? + &dropped)
        }
        Reduction::Ansatz(_) => reduction.lift(transformed, space),
    }
}

fn run_row(spec: &PipelineSpec, member: &(String, Expression), reduction: &Reduction) -> PipelineRow {
    let (label, f) = member;
    let mut row = PipelineRow {
        member: label.clone(),
        reduction: reduction.name(),
        reduced: None,
        error: None,
        candidates: Vec::new(),
        transforms: Vec::new(),
        inequivalence: "user judgment",
    };
    let reduced = match reduction.reduce(f, &spec.space) {
        Ok(r) => r,
        Err(e) => {
            row.error = Some(e.to_string());
            return row;
        }
    };
    row.reduced = Some(reduced.reduced.to_string());
    row.candidates = candidate_rows(f, reduction, &spec.candidates, &spec.space);
    for (name, on, parts) in &spec.transforms {
        if *on != reduction.name() {
            continue;
        }
        let mut t = TransformRow {
            transform: name.clone(),
            transformed: None,
            lifted: None,
            candidates: Vec::new(),
            error: None,
        };
        let result = PointTransform::parse(name, &reduced.space, parts)
            .and_then(|p| p.apply(&reduced.reduced, &reduced.space))
            .map_err(|e| e.to_string())
            .and_then(|g| {
                lift_with_dropped(f, reduction, &reduced.reduced, &g, &spec.space)
                    .map(|l| (g, l))
                    .map_err(|e| e.to_string())
            });
        match result {
            Ok((g, lifted)) => {
                t.transformed = Some(g.to_string());
                t.lifted = Some(lifted.to_string());
                t.candidates = candidate_rows(&lifted, reduction, &spec.candidates, &spec.space);
            }
            Err(e) => t.error = Some(e),
        }
        row.transforms.push(t);
    }
    row
}

/// Runs every (class member, reduction) pair; rows are returned in input
/// order.
pub fn run_pipeline(spec: &PipelineSpec) -> Vec<PipelineRow> {
    let pairs: Vec<(&(String, Expression), &Reduction)> = spec
        .class
        .iter()
        .flat_map(|m| spec.reductions.iter().map(move |r| (m, r)))
        .collect();
    pairs.par_iter().map(|(m, r)| run_row(spec, m, r)).collect()
}

pub fn format_pipeline(rows: &[PipelineRow]) -> String {
    let mut out = String::new();
    for row in rows {
        out.push_str(&format!("{} | reduce by {}\n", row.member, row.reduction));
        if let Some(e) = &row.error {
            out.push_str(&format!("  not reduced: {e}\n"));
            continue;
        }
        out.push_str(&format!("  reduced: {}\n", row.reduced.as_deref().unwrap_or("")));
        for c in &row.candidates {
            out.push_str(&candidate_line(c, "  "));
        }
        for t in &row.transforms {
            match &t.error {
                Some(e) => out.push_str(&format!("  transform {}: error: {e}\n", t.transform)),
                None => {
                    out.push_str(&format!(
                        "  transform {}: {}\n    lifted: {}\n",
                        t.transform,
                        t.transformed.as_deref().unwrap_or(""),
                        t.lifted.as_deref().unwrap_or("")
                    ));
                    for c in &t.candidates {
                        out.push_str(&candidate_line(c, "    "));
                    }
                }
            }
        }
        out.push_str(&format!("  inequivalence: {}\n", row.inequivalence));
    }
    out
}

fn candidate_line(c: &CandidateRow, indent: &str) -> String {
    let yn = |b: Option<bool>| match b {
        Some(true) => "yes",
        Some(false) => "no",
        None => "-",
    };
    match &c.error {
        Some(e) => format!("{indent}candidate {}: error: {e}\n", c.candidate),
        None => format!(
            "{indent}candidate {}: reduced symmetry {}, original symmetry {}, hidden {}\n",
            c.candidate,
            yn(c.on_reduced),
            yn(c.on_original),
            yn(c.hidden)
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wave2() -> JetSpace {
        JetSpace::declare(&["t", "x"], &["u"], 2, Some(&[1, -1])).unwrap()
    }

    fn transform(s: &JetSpace, parts: &[(&str, &str)]) -> PointTransform {
        let parts: Vec<(String, String)> = parts.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect();
        PointTransform::parse("T", s, &parts).unwrap()
    }

    #[test]
    fn shift_of_u() {
        let s = wave2();
        let t = transform(&s, &[("t", "t"), ("x", "x"), ("u", "u + (t^2 - x^2)/4")]);
        let f = s.parse("u_tt - u_xx - u^2").unwrap();
        let g = t.apply(&f, &s).unwrap();
        assert_eq!(g, s.parse("u_tt - u_xx + 1 - (u + (t^2 - x^2)/4)^2").unwrap());
    }

    #[test]
    fn light_cone_coordinates() {
        let s = wave2();
        // t = (a + b)/2 written in the same coordinate names
        let t = transform(&s, &[("t", "(t + x)/2"), ("x", "(t - x)/2"), ("u", "u")]);
        let f = s.parse("u_tt - u_xx").unwrap();
        assert_eq!(t.apply(&f, &s).unwrap(), s.parse("4*u_tx").unwrap());
    }

    #[test]
    fn scaling_and_degenerate() {
        let s = wave2();
        let t = transform(&s, &[("t", "2*t"), ("x", "x"), ("u", "u")]);
        assert_eq!(t.apply(&s.parse("u_t").unwrap(), &s).unwrap(), s.parse("u_t/2").unwrap());
        let bad = transform(&s, &[("t", "x"), ("x", "x"), ("u", "u")]);
        assert!(matches!(bad.apply(&s.parse("u_t").unwrap(), &s), Err(TransformError::NotInvertible(_))));
    }

    #[test]
    fn pipeline_rows() {
        let s = JetSpace::declare(&["t", "x", "y"], &["u"], 2, Some(&[1, -1, -1]))
            .unwrap()
            .with_function("g", 2)
            .unwrap();
        let spec = PipelineSpec {
            class: vec![
                ("g(x,u)".into(), s.parse("u_tt - u_xx - u_yy - g(x, u)").unwrap()),
                ("y*u".into(), s.parse("u_tt - u_xx - u_yy - y*u").unwrap()),
                ("x*u_y^2".into(), s.parse("u_tt - u_xx - u_yy - x*u_y^2").unwrap()),
            ],
            reductions: vec![Reduction::Translation { variable: "y".into() }],
            candidates: vec![VectorField::parse("d/dx", "d/dx", &s).unwrap()],
            transforms: vec![],
            space: s,
        };
        let rows = run_pipeline(&spec);
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[0].candidates[0].hidden, Some(false));
        assert!(rows[1].error.is_some());
        assert_eq!(rows[2].candidates[0].hidden, Some(true));
        let text = format_pipeline(&rows);
        assert!(text.contains("inequivalence: user judgment"));
    }
}
