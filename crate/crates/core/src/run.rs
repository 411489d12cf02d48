//! Requests against a session: symbolic verdicts with optional numeric
//! confirmation, shared by the command line and the suite.

use serde::Serialize;

use crate::checks::{
    check_absolute_invariant, check_conditional_differential_invariant, check_conditional_invariance,
    check_lie_invariance, check_q_conditional, Verdict,
};
use crate::expr::Expression;
use crate::field::VectorField;
use crate::jet::JetSpace;
use crate::manifold::ConditionSet;
use crate::oracle::{confirm, random_functions, NumericVerdict, OracleOptions};
use crate::reduction::{check_hidden_symmetry, Reduction};
use crate::session::Session;

#[derive(Debug, Clone, PartialEq)]
pub enum Request {
    Lie { field: String, target: String },
    QCond { field: String, target: String },
    Cond { field: String, target: String, conditions: String },
    Inv { fields: String, target: String },
    Cdi { fields: String, target: String, conditions: String },
    Hidden { target: String, reduction: String, candidate: String },
}

impl Request {
    /// Parses `lie OP EXPR`, `qcond OP EXPR`, `cond OP EXPR COND`,
    /// `inv OPS EXPR`, `cdi OPS EXPR COND` or `hidden EXPR RED OP`.
    pub fn from_words(words: &[String]) -> Result<Self, String> {
        let w = |i: usize| -> Result<String, String> {
            words.get(i).cloned().ok_or_else(|| format!("missing argument {i} in `{}`", words.join(" ")))
        };
        let expect = |n: usize| -> Result<(), String> {
            if words.len() == n {
                Ok(())
            } else {
                Err(format!("`{}` takes {} arguments, got {}", words[0], n - 1, words.len() - 1))
            }
        };
        match words.first().map(String::as_str) {
            Some("lie") => expect(3).and(Ok(Request::Lie { field: w(1)?, target: w(2)? })),
            Some("qcond") => expect(3).and(Ok(Request::QCond { field: w(1)?, target: w(2)? })),
            Some("cond") => expect(4).and(Ok(Request::Cond {
                field: w(1)?,
                target: w(2)?,
                conditions: w(3)?,
            })),
            Some("inv") => expect(3).and(Ok(Request::Inv { fields: w(1)?, target: w(2)? })),
            Some("cdi") => expect(4).and(Ok(Request::Cdi {
                fields: w(1)?,
                target: w(2)?,
                conditions: w(3)?,
            })),
            Some("hidden") => expect(4).and(Ok(Request::Hidden {
                target: w(1)?,
                reduction: w(2)?,
                candidate: w(3)?,
            })),
            Some(o) => Err(format!("unknown check `{o}`")),
            None => Err("empty check".into()),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Request::Lie { .. } => "lie",
            Request::QCond { .. } => "qcond",
            Request::Cond { .. } => "cond",
            Request::Inv { .. } => "inv",
            Request::Cdi { .. } => "cdi",
            Request::Hidden { .. } => "hidden",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct NumericSummary {
    pub label: String,
    pub invariant: bool,
    pub max_deviation: f64,
    pub points: usize,
    pub agrees: bool,
}

impl NumericSummary {
    fn new(label: &str, v: &NumericVerdict, holds: bool) -> Self {
        NumericSummary {
            label: label.to_string(),
            invariant: v.invariant,
            max_deviation: v.max_deviation,
            points: v.points,
            agrees: v.agrees_with(holds),
        }
    }
}

/// One verdict per target expression; lists give one record per entry.
#[derive(Debug, Clone)]
pub struct Record {
    pub target: String,
    pub verdict: Verdict,
    pub numeric: Vec<NumericSummary>,
}

impl Record {
    pub fn agrees(&self) -> Option<bool> {
        (!self.numeric.is_empty()).then(|| self.numeric.iter().all(|n| n.agrees))
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "target": self.target,
            "verdict": self.verdict.to_json(),
            "numeric": self.numeric.iter().map(|n| serde_json::json!({
                "label": n.label,
                "invariant": n.invariant,
                "max_deviation": format!("{:.3e}", n.max_deviation),
                "points": n.points,
                "agrees": n.agrees,
            })).collect::<Vec<_>>(),
        })
    }
}

struct Resolved {
    targets: Vec<(String, Expression)>,
    fields: Vec<VectorField>,
    conditions: Option<ConditionSet>,
}

fn resolve(session: &Session, request: &Request) -> Result<Resolved, String> {
    let (fields, target, conditions) = match request {
        Request::Lie { field, target } | Request::QCond { field, target } => (field, target, None),
        Request::Cond {
            field,
            target,
            conditions,
        } => (field, target, Some(conditions)),
        Request::Inv { fields, target } => (fields, target, None),
        Request::Cdi {
            fields,
            target,
            conditions,
        } => (fields, target, Some(conditions)),
        Request::Hidden { target, candidate, .. } => (candidate, target, None),
    };
    Ok(Resolved {
        targets: session.expressions(target)?,
        fields: session.operators(fields)?,
        conditions: conditions.map(|c| session.conditions(c)).transpose()?,
    })
}

fn single(fields: &[VectorField]) -> Result<&VectorField, String> {
    match fields {
        [f] => Ok(f),
        _ => Err(format!("expected one operator, got {}", fields.len())),
    }
}

/// Symbolic verdicts, plus numeric confirmation when `oracle` is given.
pub fn execute(session: &Session, request: &Request, oracle: Option<&OracleOptions>) -> Result<Vec<Record>, String> {
    let space = session.space()?;
    let r = resolve(session, request)?;
    let fns = oracle.map(|o| random_functions(space, o.seed));
    let mut out = Vec::new();
    for (label, f) in &r.targets {
        let verdict = match request {
            Request::Lie { .. } => check_lie_invariance(single(&r.fields)?, f, space).map_err(|e| e.to_string())?,
            Request::QCond { .. } => check_q_conditional(single(&r.fields)?, f, space).map_err(|e| e.to_string())?,
            Request::Cond { .. } => {
                check_conditional_invariance(single(&r.fields)?, f, r.conditions.as_ref().unwrap(), space)
                    .map_err(|e| e.to_string())?
            }
            Request::Inv { .. } => check_absolute_invariant(&r.fields, f, space).map_err(|e| e.to_string())?,
            Request::Cdi { .. } => {
                check_conditional_differential_invariant(&r.fields, f, r.conditions.as_ref().unwrap(), space)
                    .map_err(|e| e.to_string())?
            }
            Request::Hidden { reduction, .. } => {
                let red = session.reduction(reduction)?;
                check_hidden_symmetry(f, &red, single(&r.fields)?, space).map_err(|e| e.to_string())?
            }
        };
        let mut numeric = Vec::new();
        if let (Some(opts), Some(fns)) = (oracle, fns.as_ref()) {
            numeric = match request {
                Request::Hidden { reduction, .. } => {
                    let red = session.reduction(reduction)?;
                    hidden_numeric(&verdict, f, &red, single(&r.fields)?, space, opts)?
                }
                _ => {
                    let mut targets = vec![f.clone()];
                    match request {
                        Request::Cond { .. } | Request::Cdi { .. } => {
                            let l = f.order().max(1);
                            targets.extend(r.conditions.as_ref().unwrap().resolved_for(l).generators());
                        }
                        Request::QCond { .. } => {
                            targets.extend(single(&r.fields)?.characteristic(space).into_iter().filter(|g| !g.is_zero()));
                        }
                        _ => {}
                    }
                    let v = confirm(&verdict, &r.fields, &targets, space, opts, fns).map_err(|e| e.to_string())?;
                    vec![NumericSummary::new(request.kind(), &v, verdict.holds)]
                }
            };
        }
        out.push(Record {
            target: label.clone(),
            verdict,
            numeric,
        });
    }
    Ok(out)
}

/// Confirms the reduced and the original Lie verdicts separately.
fn hidden_numeric(
    verdict: &Verdict,
    f: &Expression,
    reduction: &Reduction,
    field: &VectorField,
    space: &JetSpace,
    opts: &OracleOptions,
) -> Result<Vec<NumericSummary>, String> {
    let reduced = reduction.reduce(f, space).map_err(|e| e.to_string())?;
    let projected = reduction.project(field, space).map_err(|e| e.to_string())?;
    let mut out = Vec::new();
    for (label, sub) in &verdict.sub_verdicts {
        let (fld, target, sp) = if label == "reduced" {
            (&projected, &reduced.reduced, &reduced.space)
        } else {
            (field, f, space)
        };
        let fns = random_functions(sp, opts.seed);
        let v = confirm(sub, std::slice::from_ref(fld), std::slice::from_ref(target), sp, opts, &fns)
            .map_err(|e| e.to_string())?;
        out.push(NumericSummary::new(label, &v, sub.holds));
    }
    Ok(out)
}
