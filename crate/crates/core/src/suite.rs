//! The catalog suite: every catalog statement checked symbolically and
//! confirmed numerically, reported in catalog-id order.

use rayon::prelude::*;
use serde::Serialize;

use crate::catalog::{self, CatalogError};
use crate::oracle::OracleOptions;
use crate::run::{execute, Request};
use crate::session::{Item, Session};

#[derive(Debug, Clone)]
pub struct SuiteCheck {
    pub id: String,
    pub request: Request,
    pub expected: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteRow {
    pub id: String,
    pub check: String,
    pub expected: bool,
    pub holds: Option<bool>,
    pub residual: Option<String>,
    pub numeric: Vec<NumericCell>,
    pub error: Option<String>,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct NumericCell {
    pub label: String,
    pub invariant: bool,
    pub max_deviation: String,
    pub points: usize,
    pub agrees: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub seed: u64,
    pub trials: usize,
    pub total: usize,
    pub passed: usize,
    pub numeric_checks: usize,
    pub disagreements: usize,
    pub rows: Vec<SuiteRow>,
}

impl SuiteReport {
    pub fn all_pass(&self) -> bool {
        self.passed == self.total
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn cat(id: &str) -> String {
    format!("@catalog/{id}")
}

fn list_len(session: &Session, id: &str) -> usize {
    match session.get(&cat(id)) {
        Some(Item::List(l)) => l.len(),
        _ => 0,
    }
}

/// Entry `i` of a catalog list as a standalone session name.
fn entry_name(id: &str, i: usize) -> String {
    format!("{}#{:02}", cat(id), i + 1)
}

/// Defines each list entry under its own name so checks address entries
/// individually.
fn split_lists(session: &mut Session) {
    let lists: Vec<(String, Vec<(String, crate::expr::Expression)>)> = session
        .items()
        .iter()
        .filter_map(|(n, i)| match i {
            Item::List(l) => Some((n.clone(), l.clone())),
            _ => None,
        })
        .collect();
    for (name, l) in lists {
        for (i, (_, e)) in l.into_iter().enumerate() {
            session.define(&format!("{name}#{:02}", i + 1), Item::Expression(e));
        }
    }
}

/// The checks of the catalog suite with their expected outcomes.
pub fn catalog_checks(session: &Session) -> Vec<SuiteCheck> {
    let mut out = Vec::new();
    let mut push = |id: String, request: Request, expected: bool| out.push(SuiteCheck { id, request, expected });
    let j = cat("rotation.J");
    let lorentz = format!("{}, {}, {}", cat("lorentz.J01"), cat("lorentz.J02"), j);
    for i in 0..list_len(session, "DI-rotation") {
        let target = entry_name("DI-rotation", i);
        push(format!("DI-rotation#{:02} inv J", i + 1), Request::Inv { fields: j.clone(), target }, true);
    }
    for i in 0..list_len(session, "CDI-rotation") {
        let target = entry_name("CDI-rotation", i);
        push(
            format!("CDI-rotation#{:02} cdi J", i + 1),
            Request::Cdi {
                fields: j.clone(),
                target: target.clone(),
                conditions: cat("cond-rotation"),
            },
            true,
        );
        push(
            format!("CDI-rotation#{:02} inv J", i + 1),
            Request::Inv { fields: j.clone(), target },
            false,
        );
    }
    for i in 0..list_len(session, "DI-Lorentz") {
        let target = entry_name("DI-Lorentz", i);
        push(
            format!("DI-Lorentz#{:02} inv J01 J02 J", i + 1),
            Request::Inv {
                fields: lorentz.clone(),
                target,
            },
            true,
        );
    }
    for i in 0..list_len(session, "CDI-Lorentz") {
        let target = entry_name("CDI-Lorentz", i);
        push(
            format!("CDI-Lorentz#{:02} cdi J01 J02 J", i + 1),
            Request::Cdi {
                fields: lorentz.clone(),
                target,
                conditions: cat("cond-Lorentz"),
            },
            true,
        );
    }
    push(
        "DI-Lorentz~euclidean inv J01".into(),
        Request::Inv {
            fields: cat("lorentz.J01"),
            target: "t^2 + x^2 + y^2".into(),
        },
        false,
    );
    push(
        "CDI-Lorentz~literal cdi J01 J02 J".into(),
        Request::Cdi {
            fields: lorentz.clone(),
            target: "u_xx/x^2 + u_x/x^3".into(),
            conditions: cat("cond-Lorentz"),
        },
        false,
    );
    for op in ["lorentz.J01", "lorentz.J02", "rotation.J"] {
        let name = op.rsplit('.').next().unwrap();
        push(
            format!("fts.equation cond {name}"),
            Request::Cond {
                field: cat(op),
                target: cat("fts.equation"),
                conditions: cat("cond-Lorentz"),
            },
            true,
        );
        push(
            format!("fts.equation lie {name}"),
            Request::Lie {
                field: cat(op),
                target: cat("fts.equation"),
            },
            false,
        );
    }
    for id in ["hidden-translation.1", "hidden-translation.2"] {
        push(
            format!("{id} hidden d/dx d/dy"),
            Request::Hidden {
                target: cat(id),
                reduction: "d/dx".into(),
                candidate: "d/dy".into(),
            },
            true,
        );
        push(
            format!("{id} lie d/dx"),
            Request::Lie {
                field: cat("translation.x"),
                target: cat(id),
            },
            true,
        );
        push(
            format!("{id} lie d/dy"),
            Request::Lie {
                field: cat("translation.y"),
                target: cat(id),
            },
            false,
        );
    }
    push(
        "nl-wave1 lie d/dy".into(),
        Request::Lie {
            field: cat("translation.y"),
            target: cat("nl-wave1"),
        },
        false,
    );
    push(
        "nl-wave1~linear qcond J".into(),
        Request::QCond {
            field: j.clone(),
            target: "u_tt - u_xx - u_yy".into(),
        },
        true,
    );
    for q in ["q1", "q2", "q3", "q4"] {
        push(
            format!("{q} cdi d/dy"),
            Request::Cdi {
                fields: cat("translation.y"),
                target: cat(q),
                conditions: cat("cond-translation"),
            },
            true,
        );
        push(
            format!("{q} inv d/dy"),
            Request::Inv {
                fields: cat("translation.y"),
                target: cat(q),
            },
            false,
        );
    }
    for (id, expected) in [("radial-examples", true), ("radial-controls", false)] {
        for i in 0..list_len(session, id) {
            push(
                format!("{id}#{:02} cond J", i + 1),
                Request::Cond {
                    field: j.clone(),
                    target: entry_name(id, i),
                    conditions: cat("cond-rotation"),
                },
                expected,
            );
        }
    }
    push(
        "rotation.J~u_x inv J".into(),
        Request::Inv {
            fields: j.clone(),
            target: "u_x".into(),
        },
        false,
    );
    out.sort_by(|a, b| a.id.cmp(&b.id));
    out
}

/// Catalog session with list entries addressable individually.
pub fn suite_session() -> Result<Session, CatalogError> {
    let mut s = catalog::session()?;
    split_lists(&mut s);
    Ok(s)
}

fn run_check(session: &Session, check: &SuiteCheck, opts: &OracleOptions) -> SuiteRow {
    let mut row = SuiteRow {
        id: check.id.clone(),
        check: check.request.kind().to_string(),
        expected: check.expected,
        holds: None,
        residual: None,
        numeric: Vec::new(),
        error: None,
        pass: false,
    };
    match execute(session, &check.request, Some(opts)) {
        Ok(records) => {
            let rec = &records[0];
            row.holds = Some(rec.verdict.holds);
            row.residual = Some(rec.verdict.residual().to_string());
            row.numeric = rec
                .numeric
                .iter()
                .map(|n| NumericCell {
                    label: n.label.clone(),
                    invariant: n.invariant,
                    max_deviation: format!("{:.3e}", n.max_deviation),
                    points: n.points,
                    agrees: n.agrees,
                })
                .collect();
            row.pass = rec.verdict.holds == check.expected && rec.agrees() != Some(false);
        }
        Err(e) => row.error = Some(e),
    }
    row
}

/// Runs every check in parallel; rows come back in id order.
pub fn run_suite(opts: &OracleOptions) -> Result<SuiteReport, CatalogError> {
    let session = suite_session()?;
    let checks = catalog_checks(&session);
    let rows: Vec<SuiteRow> = checks.par_iter().map(|c| run_check(&session, c, opts)).collect();
    let numeric: Vec<&SuiteRow> = rows.iter().filter(|r| !r.numeric.is_empty()).collect();
    Ok(SuiteReport {
        seed: opts.seed,
        trials: opts.trials,
        total: rows.len(),
        passed: rows.iter().filter(|r| r.pass).count(),
        numeric_checks: numeric.len(),
        disagreements: numeric
            .iter()
            .filter(|r| r.numeric.iter().any(|n| !n.agrees))
            .count(),
        rows,
    })
}

pub fn format_suite(report: &SuiteReport) -> String {
    let mut out = String::new();
    for r in &report.rows {
        let status = if r.pass { "ok  " } else { "FAIL" };
        let holds = match r.holds {
            Some(true) => "holds",
            Some(false) => "fails",
            None => "error",
        };
        let numeric: Vec<String> = r
            .numeric
            .iter()
            .map(|n| format!("{} {}{}", n.label, n.max_deviation, if n.agrees { "" } else { " DISAGREES" }))
            .collect();
        out.push_str(&format!("{status} {:<44} {holds:<5} [{}]", r.id, numeric.join(", ")));
        if let Some(e) = &r.error {
            out.push_str(&format!(" error: {e}"));
        }
        out.push('\n');
    }
    out.push_str(&format!(
        "{} / {} checks pass; {} numeric checks, {} disagreements (seed {}, {} points)\n",
        report.passed, report.total, report.numeric_checks, report.disagreements, report.seed, report.trials
    ));
    out
}
