//! Session files: space declaration, named operators, conditions,
//! expressions, invariant lists, ansätze, pipeline sections and commands.
//!
//! ```text
//! indep t, x, y; dep u; order 2; metric +1, -1, -1;
//! param lambda0; fn f(4);
//! op J = x*d/dy - y*d/dx;
//! cond rot: x*u_y - y*u_x = 0 upto 1;
//! expr F = u_tt - u_xx - u_yy;
//! list I = u_x^2 + u_y^2, <UHU>;
//! ansatz radial = phi(t, r: x^2 + y^2) by J at x = s, y = 0;
//! class wave = u_tt - u_xx - u_yy - f(t, x, y, u);
//! reduce by d/dy;
//! candidates d/dx, J01;
//! transform shift on d/dy: t = t, x = x, u = u + t^2;
//! check inv J "x*u_x + y*u_y";
//! ```
//!
//! Command statements (`check`, `oracle`, `reduce EXPR ...`, `hidden`,
//! `prolong`, `pipeline`) are kept as word lists for the command line to run.

use std::fmt;

use thiserror::Error;

use crate::expr::{parse_expression, ExprError, Expression, Symbol, SymbolTable};
use crate::field::VectorField;
use crate::jet::{Contraction, JetSpace};
use crate::manifold::ConditionSet;
use crate::pipeline::PipelineSpec;
use crate::reduction::{section_parameter, Ansatz, Reduction};

/// A named transformation: (name, reduction name, `variable = expression`
/// assignments).
pub type TransformSpec = (String, String, Vec<(String, String)>);

#[derive(Debug, Clone, PartialEq, Error)]
pub struct SessionError {
    pub line: usize,
    pub statement: String,
    pub message: String,
}

impl fmt::Display for SessionError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}\n  in `{}`", self.line, self.message, self.statement)
    }
}

#[derive(Debug, Clone)]
pub enum Item {
    Operator(VectorField),
    Conditions(ConditionSet),
    Expression(Expression),
    List(Vec<(String, Expression)>),
    Ansatz(Ansatz),
}

impl Item {
    pub fn kind(&self) -> &'static str {
        match self {
            Item::Operator(_) => "operator",
            Item::Conditions(_) => "condition-set",
            Item::Expression(_) => "equation",
            Item::List(_) => "invariant-list",
            Item::Ansatz(_) => "ansatz",
        }
    }
}

/// A parsed command line of a session, as whitespace-separated words with
/// double-quoted strings kept whole.
#[derive(Debug, Clone, PartialEq)]
pub struct CommandLine {
    pub line: usize,
    pub words: Vec<String>,
}

#[derive(Debug, Clone, Default)]
struct SpaceDecl {
    indeps: Vec<String>,
    deps: Vec<String>,
    order: Option<usize>,
    metric: Option<Vec<i8>>,
    params: Vec<String>,
    fns: Vec<(String, usize)>,
}

#[derive(Debug, Clone)]
pub struct Session {
    decl: SpaceDecl,
    space: Option<JetSpace>,
    items: Vec<(String, Item)>,
    pub class: Vec<(String, Expression)>,
    pub reductions: Vec<Reduction>,
    pub candidates: Vec<VectorField>,
    pub transforms: Vec<TransformSpec>,
    pub commands: Vec<CommandLine>,
}

/// Resolves `s` as the section parameter on top of a jet space.
struct WithSection<'a>(&'a JetSpace);

impl SymbolTable for WithSection<'_> {
    fn lookup(&self, name: &str, pos: usize) -> Result<Symbol, ExprError> {
        if name == "s" {
            return Ok(Symbol::Coord(section_parameter()));
        }
        self.0.lookup(name, pos)
    }
}

impl Session {
    pub fn new() -> Self {
        Session {
            decl: SpaceDecl::default(),
            space: None,
            items: Vec::new(),
            class: Vec::new(),
            reductions: Vec::new(),
            candidates: Vec::new(),
            transforms: Vec::new(),
            commands: Vec::new(),
        }
    }

    pub fn parse(text: &str) -> Result<Self, SessionError> {
        let mut s = Session::new();
        s.extend(text)?;
        Ok(s)
    }

    /// Session over an already declared space.
    pub fn with_space(space: JetSpace) -> Self {
        let mut s = Session::new();
        s.space = Some(space);
        s
    }

    /// Adds the statements of `text`; later definitions replace earlier ones
    /// with the same name. Returns the names defined, in order.
    pub fn extend(&mut self, text: &str) -> Result<Vec<String>, SessionError> {
        let mut defined = Vec::new();
        for (line, stmt) in statements(text) {
            let err = |message: String| SessionError {
                line,
                statement: stmt.clone(),
                message,
            };
            if let Some(name) = self.statement(&stmt, line).map_err(err)? {
                defined.push(name);
            }
        }
        if self.space.is_none() && !self.decl.indeps.is_empty() && !self.decl.deps.is_empty() {
            let line = text.lines().count();
            self.space_mut().map_err(|message| SessionError {
                line,
                statement: "space declaration".into(),
                message,
            })?;
        }
        Ok(defined)
    }

    pub fn space(&self) -> Result<&JetSpace, String> {
        self.space.as_ref().ok_or_else(|| "no space declared".to_string())
    }

    fn space_mut(&mut self) -> Result<&JetSpace, String> {
        if self.space.is_none() {
            let d = &self.decl;
            if d.indeps.is_empty() || d.deps.is_empty() {
                return Err("declare `indep` and `dep` first".into());
            }
            let indeps: Vec<&str> = d.indeps.iter().map(|s| s.as_str()).collect();
            let deps: Vec<&str> = d.deps.iter().map(|s| s.as_str()).collect();
            let mut space = JetSpace::declare(&indeps, &deps, d.order.unwrap_or(2), d.metric.as_deref())
                .map_err(|e| e.to_string())?;
            let params: Vec<&str> = d.params.iter().map(|s| s.as_str()).collect();
            space = space.with_parameters(&params).map_err(|e| e.to_string())?;
            for (f, a) in &d.fns {
                space = space.with_function(f, *a).map_err(|e| e.to_string())?;
            }
            self.space = Some(space);
        }
        Ok(self.space.as_ref().unwrap())
    }

    pub fn items(&self) -> &[(String, Item)] {
        &self.items
    }

    pub fn get(&self, name: &str) -> Option<&Item> {
        self.items.iter().rev().find(|(n, _)| n == name).map(|(_, i)| i)
    }

    pub fn define(&mut self, name: &str, item: Item) {
        self.items.retain(|(n, _)| n != name);
        self.items.push((name.to_string(), item));
    }

    /// Operator by name; `d/d<var>` denotes a translation and any other text
    /// containing `d/d` is parsed as an operator.
    pub fn operator(&self, name: &str) -> Result<VectorField, String> {
        if let Some(Item::Operator(f)) = self.get(name) {
            return Ok(f.clone());
        }
        if let Some(item) = self.get(name) {
            return Err(format!("`{name}` is a {}, not an operator", item.kind()));
        }
        let space = self.space()?;
        if let Some(var) = name.strip_prefix("d/d") {
            if let Ok(i) = space.independent_index(var) {
                return Ok(VectorField::translation(space, i));
            }
        }
        if name.contains("d/d") {
            return VectorField::parse(name, name, space).map_err(|e| e.to_string());
        }
        Err(format!("unknown operator `{name}`"))
    }

    pub fn operators(&self, names: &str) -> Result<Vec<VectorField>, String> {
        split_top(names, ',')
            .iter()
            .map(|n| self.operator(n.trim()))
            .collect()
    }

    pub fn conditions(&self, name: &str) -> Result<ConditionSet, String> {
        match self.get(name) {
            Some(Item::Conditions(c)) => Ok(c.clone()),
            Some(item) => Err(format!("`{name}` is a {}, not a condition set", item.kind())),
            None => Err(format!("unknown condition set `{name}`")),
        }
    }

    /// Named expression, every entry of a named list, or inline text.
    pub fn expressions(&self, reference: &str) -> Result<Vec<(String, Expression)>, String> {
        match self.get(reference) {
            Some(Item::Expression(e)) => Ok(vec![(reference.to_string(), e.clone())]),
            Some(Item::List(l)) => Ok(l.clone()),
            Some(item) => Err(format!("`{reference}` is a {}, not an expression", item.kind())),
            None => {
                let e = self.parse_expr(reference)?;
                Ok(vec![(reference.to_string(), e)])
            }
        }
    }

    pub fn expression(&self, reference: &str) -> Result<Expression, String> {
        let mut v = self.expressions(reference)?;
        if v.len() != 1 {
            return Err(format!("`{reference}` is a list of {} expressions", v.len()));
        }
        Ok(v.remove(0).1)
    }

    /// `d/d<var>` or the name of an ansatz.
    pub fn reduction(&self, name: &str) -> Result<Reduction, String> {
        if let Some(var) = name.strip_prefix("d/d") {
            self.space()?.independent_index(var).map_err(|e| e.to_string())?;
            return Ok(Reduction::Translation {
                variable: var.to_string(),
            });
        }
        match self.get(name) {
            Some(Item::Ansatz(a)) => Ok(Reduction::Ansatz(a.clone())),
            Some(item) => Err(format!("`{name}` is a {}, not a reduction", item.kind())),
            None => Err(format!("unknown reduction `{name}`")),
        }
    }

    pub fn pipeline_spec(&self) -> Result<PipelineSpec, String> {
        Ok(PipelineSpec {
            space: self.space()?.clone(),
            class: self.class.clone(),
            reductions: self.reductions.clone(),
            candidates: self.candidates.clone(),
            transforms: self.transforms.clone(),
        })
    }

    /// Parses `text`, first replacing each `<NAME>` by the metric contraction
    /// it names.
    fn parse_expr(&self, text: &str) -> Result<Expression, String> {
        let space = self.space()?;
        let mut expanded = String::new();
        let mut rest = text.trim();
        while let Some(open) = rest.find('<') {
            let close = rest[open..].find('>').ok_or("unterminated `<`")? + open;
            let family = contraction(&rest[open + 1..close])?;
            let e = space.contract(family, None).map_err(|e| e.to_string())?;
            expanded.push_str(&rest[..open]);
            expanded.push_str(&format!("({e})"));
            rest = &rest[close + 1..];
        }
        expanded.push_str(rest);
        space.parse(&expanded).map_err(|e| format!("{e} (in `{}`)", text.trim()))
    }

    fn statement(&mut self, stmt: &str, line: usize) -> Result<Option<String>, String> {
        let (head, rest) = match stmt.find(|c: char| c.is_whitespace()) {
            Some(i) => (&stmt[..i], stmt[i..].trim()),
            None => (stmt, ""),
        };
        let declaration = matches!(head, "indep" | "dep" | "order" | "metric" | "param" | "fn");
        if declaration && self.space.is_some() {
            return Err(format!("`{head}` must come before any definition"));
        }
        match head {
            "indep" => self.decl.indeps.extend(names(rest)?),
            "dep" => self.decl.deps.extend(names(rest)?),
            "param" => self.decl.params.extend(names(rest)?),
            "order" => self.decl.order = Some(rest.parse().map_err(|_| format!("bad order `{rest}`"))?),
            "metric" => {
                let m = rest
                    .split(',')
                    .map(|s| match s.trim() {
                        "+1" | "1" => Ok(1),
                        "-1" => Ok(-1),
                        o => Err(format!("metric entries are +1 or -1, got `{o}`")),
                    })
                    .collect::<Result<Vec<i8>, _>>()?;
                self.decl.metric = Some(m);
            }
            "fn" => {
                for f in split_top(rest, ',') {
                    let f = f.trim();
                    let (name, arity) = f
                        .strip_suffix(')')
                        .and_then(|g| g.split_once('('))
                        .ok_or_else(|| format!("expected `name(arity)`, got `{f}`"))?;
                    let arity = arity.trim().parse().map_err(|_| format!("bad arity in `{f}`"))?;
                    self.decl.fns.push((ident(name.trim())?, arity));
                }
            }
            "op" => {
                let (name, body) = definition(rest, '=')?;
                self.space_mut()?;
                let f = VectorField::parse(&name, body, self.space()?).map_err(|e| e.to_string())?;
                self.define(&name, Item::Operator(f));
                return Ok(Some(name));
            }
            "cond" => {
                let (name, body) = definition(rest, ':')?;
                self.space_mut()?;
                let (eqs, upto) = match body.rfind(" upto ") {
                    Some(i) => {
                        let k = body[i + 6..].trim();
                        (&body[..i], Some(k.parse::<usize>().map_err(|_| format!("bad order `{k}`"))?))
                    }
                    None => (body, None),
                };
                let parts = split_top(eqs, ',');
                let mut set = ConditionSet::new();
                for (k, p) in parts.iter().enumerate() {
                    let g = self.equation(p)?;
                    let label = if parts.len() == 1 { name.clone() } else { format!("{name}.{}", k + 1) };
                    set.push(&label, g, upto);
                }
                self.define(&name, Item::Conditions(set));
                return Ok(Some(name));
            }
            "expr" => {
                let (name, body) = definition(rest, '=')?;
                self.space_mut()?;
                let e = self.parse_expr(body)?;
                self.define(&name, Item::Expression(e));
                return Ok(Some(name));
            }
            "list" => {
                let (name, body) = definition(rest, '=')?;
                self.space_mut()?;
                let mut list = Vec::new();
                for p in split_top(body, ',') {
                    let p = p.trim();
                    list.push((p.to_string(), self.parse_expr(p)?));
                }
                self.define(&name, Item::List(list));
                return Ok(Some(name));
            }
            "ansatz" => {
                let (name, body) = definition(rest, '=')?;
                self.space_mut()?;
                let a = self.ansatz(&name, body)?;
                self.define(&name, Item::Ansatz(a));
                return Ok(Some(name));
            }
            "class" => {
                let (name, body) = definition(rest, '=')?;
                self.space_mut()?;
                let e = self.equation(body)?;
                self.class.retain(|(n, _)| *n != name);
                self.class.push((name.clone(), e));
                return Ok(Some(name));
            }
            "reduce" if rest.starts_with("by ") => {
                self.space_mut()?;
                let r = self.reduction(rest[3..].trim())?;
                self.reductions.push(r);
            }
            "candidates" => {
                self.space_mut()?;
                let ops = self.operators(rest)?;
                self.candidates.extend(ops);
            }
            "transform" => {
                self.space_mut()?;
                let (head, body) = rest.split_once(':').ok_or("expected `transform NAME on RED: var = expr, ...`")?;
                let (name, on) = head
                    .split_once(" on ")
                    .ok_or("expected `transform NAME on RED: ...`")?;
                let parts = split_top(body, ',')
                    .iter()
                    .map(|p| {
                        p.split_once('=')
                            .map(|(v, e)| (v.trim().to_string(), e.trim().to_string()))
                            .ok_or_else(|| format!("expected `var = expr`, got `{}`", p.trim()))
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                self.transforms.push((ident(name.trim())?, on.trim().to_string(), parts));
            }
            "check" | "reduce" | "hidden" | "prolong" | "pipeline" | "oracle" => {
                self.space_mut()?;
                self.commands.push(CommandLine {
                    line,
                    words: words(stmt)?,
                });
            }
            _ => return Err(format!("unknown statement `{head}`")),
        }
        Ok(None)
    }

    /// `lhs = rhs` as `lhs - rhs`; a bare expression is taken as `expr = 0`.
    fn equation(&self, text: &str) -> Result<Expression, String> {
        match text.split_once('=') {
            Some((l, r)) => Ok(&self.parse_expr(l)? - &self.parse_expr(r)?),
            None => self.parse_expr(text),
        }
    }

    fn ansatz(&self, name: &str, body: &str) -> Result<Ansatz, String> {
        let space = self.space()?;
        let syntax = "expected `phi(retained..., w: expr) by OPS at var = value, ...`";
        let open = body.find('(').ok_or(syntax)?;
        let close = body.rfind(')').ok_or(syntax)?;
        let dep = ident(body[..open].trim())?;
        let args = split_top(&body[open + 1..close], ',');
        let tail = body[close + 1..].trim();
        let (by, at) = tail
            .strip_prefix("by")
            .and_then(|t| t.split_once(" at "))
            .ok_or(syntax)?;
        let (last, retained) = args.split_last().ok_or(syntax)?;
        let (w, w_expr) = last.split_once(':').ok_or("the last argument must be `name: expression`")?;
        let table = WithSection(space);
        let parse = |t: &str| parse_expression(t.trim(), &table).map_err(|e| format!("{e} (in `{}`)", t.trim()));
        let section = split_top(at, ',')
            .iter()
            .map(|p| {
                let (v, e) = p.split_once('=').ok_or_else(|| format!("expected `var = value`, got `{p}`"))?;
                Ok((v.trim().to_string(), parse(e)?))
            })
            .collect::<Result<Vec<_>, String>>()?;
        Ok(Ansatz {
            name: name.to_string(),
            retained: retained.iter().map(|r| ident(r.trim())).collect::<Result<_, _>>()?,
            new_var: (ident(w.trim())?, parse(w_expr)?),
            reduced_dependent: dep,
            annihilators: self.operators(by.trim())?,
            section,
        })
    }
}

impl Default for Session {
    fn default() -> Self {
        Self::new()
    }
}

fn contraction(name: &str) -> Result<Contraction, String> {
    Ok(match name.trim().to_ascii_uppercase().as_str() {
        "XX" => Contraction::XX,
        "XU" => Contraction::XU,
        "UU" => Contraction::UU,
        "BOX" => Contraction::Box,
        "UHU" => Contraction::UHU,
        "UHHU" => Contraction::UHHU,
        "TRH3" => Contraction::TraceH3,
        "XHU" => Contraction::XHU,
        "XHHU" => Contraction::XHHU,
        o => return Err(format!("unknown contraction `<{o}>`")),
    })
}

fn ident(s: &str) -> Result<String, String> {
    let ok = s.chars().next().is_some_and(|c| c.is_ascii_alphabetic())
        && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
    if ok {
        Ok(s.to_string())
    } else {
        Err(format!("`{s}` is not a valid name"))
    }
}

fn names(s: &str) -> Result<Vec<String>, String> {
    s.split(',').map(|n| ident(n.trim())).collect()
}

fn definition(rest: &str, sep: char) -> Result<(String, &str), String> {
    let (name, body) = rest
        .split_once(sep)
        .ok_or_else(|| format!("expected `NAME {sep} ...`"))?;
    Ok((ident(name.trim())?, body.trim()))
}

/// Splits at `sep` outside parentheses, braces and angle-bracket groups.
pub fn split_top(s: &str, sep: char) -> Vec<String> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut cur = String::new();
    for c in s.chars() {
        match c {
            '(' | '{' => depth += 1,
            ')' | '}' => depth -= 1,
            _ => {}
        }
        if c == sep && depth == 0 {
            out.push(std::mem::take(&mut cur));
        } else {
            cur.push(c);
        }
    }
    if !cur.trim().is_empty() || !out.is_empty() {
        out.push(cur);
    }
    out
}

fn words(s: &str) -> Result<Vec<String>, String> {
    let mut out = Vec::new();
    let mut chars = s.chars().peekable();
    while let Some(&c) = chars.peek() {
        if c.is_whitespace() {
            chars.next();
        } else if c == '"' {
            chars.next();
            let mut w = String::new();
            loop {
                match chars.next() {
                    Some('"') => break,
                    Some(ch) => w.push(ch),
                    None => return Err("unterminated string".into()),
                }
            }
            out.push(w);
        } else {
            let mut w = String::new();
            while let Some(&ch) = chars.peek() {
                if ch.is_whitespace() {
                    break;
                }
                w.push(ch);
                chars.next();
            }
            out.push(w);
        }
    }
    Ok(out)
}

/// Statements separated by `;` outside strings, with `#` comments removed,
/// each paired with its starting line.
fn statements(text: &str) -> Vec<(usize, String)> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut line = 1;
    let mut start_line = 1;
    let mut in_str = false;
    let mut in_comment = false;
    for c in text.chars() {
        if c == '\n' {
            line += 1;
            in_comment = false;
            cur.push(' ');
            continue;
        }
        if in_comment {
            continue;
        }
        match c {
            '#' if !in_str => in_comment = true,
            '"' => {
                in_str = !in_str;
                cur.push(c);
            }
            ';' if !in_str => {
                let s = cur.trim().to_string();
                if !s.is_empty() {
                    out.push((start_line, s));
                }
                cur.clear();
            }
            _ => {
                if cur.trim().is_empty() && !c.is_whitespace() {
                    start_line = line;
                }
                cur.push(c);
            }
        }
    }
    let s = cur.trim().to_string();
    if !s.is_empty() {
        out.push((start_line, s));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const TEXT: &str = "
        # rotations in the plane
        indep t, x, y; dep u; order 2; metric +1, -1, -1;
        param lambda0;
        fn f(4);
        op J = x*d/dy - y*d/dx;
        cond rot: x*u_y - y*u_x = 0 upto 1;
        cond lor: t*u_x + x*u_t = 0, t*u_y + y*u_t = 0;
        expr F = u_tt - u_xx - u_yy - lambda0*u_t^2/t^2;
        list I = u_x^2 + u_y^2, <BOX>, f(t, x, y, u), 2*<XX>;
        ansatz radial = phi(t, r: x^2 + y^2) by J at x = s, y = 0;
        class w = u_tt - u_xx - u_yy = f(t, x, y, u);
        reduce by d/dy;
        candidates d/dx, t*d/dx + x*d/dt;
        transform shift on d/dy: t = t, x = x, u = u + t^2;
        check inv J \"x*u_x + y*u_y\";
        reduce F --ansatz radial;
    ";

    #[test]
    fn parses_every_statement() {
        let s = Session::parse(TEXT).unwrap();
        let sp = s.space().unwrap();
        assert_eq!(sp.dim(), 3);
        assert_eq!(s.operator("J").unwrap().xi()[1], sp.parse("-y").unwrap());
        assert_eq!(s.conditions("lor").unwrap().len(), 2);
        assert_eq!(s.conditions("rot").unwrap().conditions()[0].consequence_order, Some(1));
        let list = s.expressions("I").unwrap();
        assert_eq!(list[1].1, sp.parse("u_tt - u_xx - u_yy").unwrap());
        assert_eq!(list[3].1, sp.parse("2*t^2 - 2*x^2 - 2*y^2").unwrap());
        assert!(matches!(s.get("radial"), Some(Item::Ansatz(_))));
        assert_eq!(s.class[0].1, sp.parse("u_tt - u_xx - u_yy - f(t, x, y, u)").unwrap());
        assert_eq!(s.reductions.len(), 1);
        assert_eq!(s.candidates.len(), 2);
        assert_eq!(s.transforms[0].2.len(), 3);
        assert_eq!(s.commands[0].words, ["check", "inv", "J", "x*u_x + y*u_y"]);
        assert_eq!(s.commands[0].line, 16);
        assert_eq!(s.commands[1].words, ["reduce", "F", "--ansatz", "radial"]);
        assert!(s.operator("d/dt").is_ok());
    }

    #[test]
    fn diagnostics_name_the_statement() {
        let e = Session::parse("indep t, x; dep u;\nexpr F = u_x + ;").unwrap_err();
        assert_eq!(e.line, 2);
        assert!(e.statement.starts_with("expr F"));
        let e = Session::parse("indep t; dep u; expr F = u; indep z;").unwrap_err();
        assert!(e.message.contains("before"));
        assert!(Session::parse("indep t; dep u; expr F = v;").is_err());
        assert!(Session::parse("indep t; dep u; bogus;").is_err());
    }
}
