//! Registry of named operators, conditions, invariant lists, ansätze,
//! equations and pipeline scaffolds, stored as session text over a shared
//! space declaration.

use std::fmt;

use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::pipeline::PipelineSpec;
use crate::session::{Item, Session, SessionError};

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("unknown catalog id `{0}`")]
    Unknown(String),
    #[error("catalog entry `{id}` does not parse: {source}")]
    Payload { id: String, source: SessionError },
    #[error("catalog entry `{0}` defines nothing")]
    Empty(String),
    #[error("catalog entry `{id}` is a {found}, expected a {expected}")]
    Kind {
        id: String,
        found: &'static str,
        expected: &'static str,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EntryKind {
    Operator,
    ConditionSet,
    InvariantList,
    Ansatz,
    Equation,
    Pipeline,
}

impl EntryKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EntryKind::Operator => "operator",
            EntryKind::ConditionSet => "condition-set",
            EntryKind::InvariantList => "invariant-list",
            EntryKind::Ansatz => "ansatz",
            EntryKind::Equation => "equation",
            EntryKind::Pipeline => "pipeline",
        }
    }
}

impl fmt::Display for EntryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct CatalogEntry {
    pub id: &'static str,
    pub kind: EntryKind,
    pub anchor: &'static str,
    pub payload: &'static str,
    /// Test-corpus entries built for checks rather than transcribed.
    pub constructed: bool,
}

#[derive(Debug, Clone)]
pub enum Loaded {
    Item(Item),
    Pipeline(PipelineSpec),
}

/// Space shared by every payload.
pub const PRELUDE: &str = "indep t, x, y; dep u; order 2; metric +1, -1, -1;
param lambda0, lambda1, lambda2;
fn f(4), h(3), K1(3), K2(2), R1(12), R2(12), R3(12), R4(12), Phi(19), Psi(19);
";

const fn entry(id: &'static str, kind: EntryKind, anchor: &'static str, payload: &'static str) -> CatalogEntry {
    CatalogEntry {
        id,
        kind,
        anchor,
        payload,
        constructed: false,
    }
}

const fn constructed(id: &'static str, kind: EntryKind, anchor: &'static str, payload: &'static str) -> CatalogEntry {
    CatalogEntry {
        id,
        kind,
        anchor,
        payload,
        constructed: true,
    }
}

use EntryKind::*;

static ENTRIES: &[CatalogEntry] = &[
    entry(
        "ansatz-r",
        Ansatz,
        "radial reduction: ansatz u = phi(t, r)",
        "op J = x*d/dy - y*d/dx;
ansatz anz_r = phi(t, r: x^2 + y^2) by J at x = s, y = 0;",
    ),
    entry(
        "ansatz-rho",
        Ansatz,
        "Lorentz reduction: ansatz u = phi(rho)",
        "op J01 = t*d/dx + x*d/dt; op J02 = t*d/dy + y*d/dt; op J = x*d/dy - y*d/dx;
ansatz anz_rho = phi(rho: t^2 - x^2 - y^2) by J01, J02, J at t = s, x = 0, y = 0;",
    ),
    entry(
        "CDI-Lorentz",
        InvariantList,
        "Lorentz reduction: proper conditional differential invariants",
        "list cdi_lorentz = u_t/t, u_x/x, u_y/y,
  u_tt/t^2 - u_t/t^3, u_tx/(t*x), u_ty/(t*y),
  u_xx/x^2 - u_x/x^3, u_xy/(x*y), u_yy/y^2 - u_y/y^3;",
    ),
    entry(
        "CDI-rotation",
        InvariantList,
        "radial reduction: proper conditional differential invariants of the rotation",
        "list cdi_rotation = u_x/x, u_y/y, u_tx/x, u_ty/y,
  u_xx/x^2 - u_x/x^3, u_xy/(x*y), u_yy/y^2 - u_y/y^3;",
    ),
    entry(
        "cond-Lorentz",
        ConditionSet,
        "Lorentz reduction: invariant-surface conditions of the Lorentz operators",
        "cond cond_lorentz: t*u_x + x*u_t = 0, t*u_y + y*u_t = 0, x*u_y - y*u_x = 0;",
    ),
    entry(
        "cond-rotation",
        ConditionSet,
        "radial reduction: invariant-surface condition of the rotation",
        "cond cond_rotation: x*u_y - y*u_x = 0;",
    ),
    entry(
        "cond-translation",
        ConditionSet,
        "translation example: invariance condition u_x = 0",
        "cond cond_translation: u_x = 0;",
    ),
    entry(
        "DI-Lorentz",
        InvariantList,
        "Lorentz reduction: absolute differential invariants, metric (1, -1, -1)",
        "list di_lorentz = u, <XX>, <XU>, <UU>, <BOX>, <UHU>, <UHHU>, <TRH3>, <XHU>, <XHHU>;",
    ),
    entry(
        "DI-rotation",
        InvariantList,
        "radial reduction: absolute differential invariants of the rotation",
        "list di_rotation = t, u, u_t, u_tt, x^2 + y^2, x*u_x + y*u_y, u_x^2 + u_y^2, u_xx + u_yy,
  u_x^2*u_xx + 2*u_x*u_y*u_xy + u_y^2*u_yy, x*u_x*u_xx + (x*u_y + y*u_x)*u_xy + y*u_y*u_yy,
  u_tx^2 + u_ty^2, x*u_tx + y*u_ty;",
    ),
    constructed(
        "eq-r.generic",
        Equation,
        "radial reduction: general equation reducible by u = phi(t, r)",
        "expr eq_r = Phi(t, u, u_t, u_tt, x^2 + y^2, x*u_x + y*u_y, u_x^2 + u_y^2, u_xx + u_yy,
  u_x^2*u_xx + 2*u_x*u_y*u_xy + u_y^2*u_yy, x*u_x*u_xx + (x*u_y + y*u_x)*u_xy + y*u_y*u_yy,
  u_tx^2 + u_ty^2, x*u_tx + y*u_ty,
  u_x/x, u_y/y, u_tx/x, u_ty/y, u_xx/x^2 - u_x/x^3, u_xy/(x*y), u_yy/y^2 - u_y/y^3);",
    ),
    constructed(
        "eq-rho.generic",
        Equation,
        "Lorentz reduction: general equation reducible by u = phi(rho)",
        "expr eq_rho = Psi(u, <XX>, <XU>, <UU>, <BOX>, <UHU>, <UHHU>, <TRH3>, <XHU>, <XHHU>,
  u_t/t, u_x/x, u_y/y, u_tt/t^2 - u_t/t^3, u_tx/(t*x), u_ty/(t*y),
  u_xx/x^2 - u_x/x^3, u_xy/(x*y), u_yy/y^2 - u_y/y^3);",
    ),
    entry(
        "fts.equation",
        Equation,
        "Lorentz reduction: wave equation with conditional Lorentz symmetry, two space dimensions",
        "expr fts = u_tt - u_xx - u_yy - lambda0*u_t^2/t^2 - lambda1*u_x^2/x^2 - lambda2*u_y^2/y^2;",
    ),
    entry(
        "hidden-translation.1",
        Equation,
        "translation example: evolution equation with hidden translational symmetry",
        "expr ht1 = u_t + u_x*K1(t, y, u) + u_y*K2(t, u) + u_xx + u_yy;",
    ),
    entry(
        "hidden-translation.2",
        Equation,
        "translation example: wave equation with hidden translational symmetry",
        "expr ht2 = u_tt - K1(t, y, u)*u_xx - K1_{3}(t, y, u)*u_x^2 - K2(t, u)*u_yy - K2_{2}(t, u)*u_y^2;",
    ),
    entry(
        "lorentz.J01",
        Operator,
        "Lorentz reduction: boost J01",
        "op J01 = t*d/dx + x*d/dt;",
    ),
    entry(
        "lorentz.J02",
        Operator,
        "Lorentz reduction: boost J02",
        "op J02 = t*d/dy + y*d/dt;",
    ),
    entry(
        "nl-wave1",
        Equation,
        "hidden symmetries: nonlinear wave equation in two space dimensions",
        "expr nl_wave1 = u_tt - u_xx - u_yy - f(t, x, y, u);",
    ),
    entry(
        "pipeline.wave-dy",
        Pipeline,
        "hidden symmetries: reduction of the nonlinear wave equation by d/dy",
        "op J01 = t*d/dx + x*d/dt;
class generic = u_tt - u_xx - u_yy = h(t, x, u);
class cubic = u_tt - u_xx - u_yy = u^3;
class x_uy2 = u_tt - u_xx - u_yy = x*u_y^2;
class t_uy2 = u_tt - u_xx - u_yy = t*u_y^2;
class y_u = u_tt - u_xx - u_yy = y*u;
reduce by d/dy;
candidates d/dt, d/dx, J01;
transform light_cone on d/dy: t = (t + x)/2, x = (t - x)/2, u = u;",
    ),
    entry(
        "q1",
        Equation,
        "translation example: conditional invariant q1 = u_x R1",
        "expr q1 = u_x*R1(t, y, u, u_t, u_x, u_y, u_tt, u_tx, u_ty, u_xx, u_xy, u_yy);",
    ),
    entry(
        "q2",
        Equation,
        "translation example: conditional invariant q2 = u_xt R2",
        "expr q2 = u_tx*R2(t, y, u, u_t, u_x, u_y, u_tt, u_tx, u_ty, u_xx, u_xy, u_yy);",
    ),
    entry(
        "q3",
        Equation,
        "translation example: conditional invariant q3 = u_xx R3",
        "expr q3 = u_xx*R3(t, y, u, u_t, u_x, u_y, u_tt, u_tx, u_ty, u_xx, u_xy, u_yy);",
    ),
    entry(
        "q4",
        Equation,
        "translation example: conditional invariant q4 = u_xy R4",
        "expr q4 = u_xy*R4(t, y, u, u_t, u_x, u_y, u_tt, u_tx, u_ty, u_xx, u_xy, u_yy);",
    ),
    constructed(
        "radial-controls",
        InvariantList,
        "radial reduction: equations not reducible by u = phi(t, r)",
        "list radial_controls = u_t - u_xx, u_t - u_x;",
    ),
    constructed(
        "radial-examples",
        InvariantList,
        "radial reduction: equations reducible by u = phi(t, r)",
        "list radial_examples = u_t - u_xx - u_yy, u_tt - u_xx - u_yy - u^3, u_t - (u_x^2 + u_y^2)*u,
  u_t - u_x/x - (x^2 + y^2)*u, u_tt - u_tx/x - (x^2 + y^2)*(u_xx/x^2 - u_x/x^3);",
    ),
    entry(
        "rotation.J",
        Operator,
        "radial reduction: rotation operator J",
        "op J = x*d/dy - y*d/dx;",
    ),
    entry(
        "translation.x",
        Operator,
        "translation example: operator d/dx",
        "op Dx = d/dx;",
    ),
    entry(
        "translation.y",
        Operator,
        "translation example: operator d/dy",
        "op Dy = d/dy;",
    ),
];

/// Every entry, ordered by id.
pub fn entries() -> &'static [CatalogEntry] {
    ENTRIES
}

pub fn get(id: &str) -> Result<&'static CatalogEntry, CatalogError> {
    ENTRIES
        .iter()
        .find(|e| e.id == id)
        .ok_or_else(|| CatalogError::Unknown(id.to_string()))
}

/// Session holding the prelude and the payload of `entry`.
pub fn entry_session(entry: &CatalogEntry) -> Result<Session, CatalogError> {
    let mut s = Session::parse(PRELUDE).expect("prelude parses");
    s.extend(entry.payload).map_err(|source| CatalogError::Payload {
        id: entry.id.to_string(),
        source,
    })?;
    Ok(s)
}

/// The object an entry defines: the pipeline for pipeline entries and the
/// last definition otherwise.
pub fn load(id: &str) -> Result<Loaded, CatalogError> {
    let entry = get(id)?;
    let s = entry_session(entry)?;
    if entry.kind == Pipeline {
        let spec = s.pipeline_spec().map_err(|message| CatalogError::Payload {
            id: id.to_string(),
            source: SessionError {
                line: 0,
                statement: String::new(),
                message,
            },
        })?;
        return Ok(Loaded::Pipeline(spec));
    }
    let (_, item) = s.items().last().ok_or_else(|| CatalogError::Empty(id.to_string()))?;
    if item.kind() != entry.kind.as_str() {
        return Err(CatalogError::Kind {
            id: id.to_string(),
            found: item.kind(),
            expected: entry.kind.as_str(),
        });
    }
    Ok(Loaded::Item(item.clone()))
}

pub fn load_item(id: &str) -> Result<Item, CatalogError> {
    match load(id)? {
        Loaded::Item(i) => Ok(i),
        Loaded::Pipeline(_) => Err(CatalogError::Kind {
            id: id.to_string(),
            found: "pipeline",
            expected: "definition",
        }),
    }
}

pub fn load_pipeline(id: &str) -> Result<PipelineSpec, CatalogError> {
    match load(id)? {
        Loaded::Pipeline(p) => Ok(p),
        Loaded::Item(i) => Err(CatalogError::Kind {
            id: id.to_string(),
            found: i.kind(),
            expected: "pipeline",
        }),
    }
}

/// Prelude session with every non-pipeline entry defined as `@catalog/<id>`.
pub fn session() -> Result<Session, CatalogError> {
    let mut s = Session::parse(PRELUDE).expect("prelude parses");
    for e in ENTRIES.iter().filter(|e| e.kind != Pipeline) {
        s.define(&format!("@catalog/{}", e.id), load_item(e.id)?);
    }
    Ok(s)
}

/// Hex SHA-256 of a payload.
pub fn checksum(entry: &CatalogEntry) -> String {
    let digest = Sha256::digest(entry.payload.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Checksum file contents: one `<hex>  <id>` line per entry.
pub fn checksums() -> String {
    let mut out = String::new();
    for e in ENTRIES {
        out.push_str(&format!("{}  {}\n", checksum(e), e.id));
    }
    out
}
