use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use jetsym::catalog::{self, Loaded, PRELUDE};
use jetsym::oracle::{default_seed, OracleOptions};
use jetsym::pipeline::{format_pipeline, run_pipeline, PipelineSpec};
use jetsym::reduction::ReductionError;
use jetsym::run::{execute, Record, Request};
use jetsym::session::{Item, Session};
use jetsym::suite::{format_suite, run_suite};

/// Symmetry, invariance and reduction checks for differential equations.
#[derive(Parser, Debug)]
#[command(name = "jetsym", version)]
struct Cli {
    /// Session file with the space declaration and named definitions.
    #[arg(long, global = true)]
    session: Option<PathBuf>,
    /// Print a JSON report instead of text.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Prolongation coefficients of an operator.
    Prolong {
        op: String,
        #[arg(long, default_value_t = 2)]
        order: usize,
    },
    /// Symbolic invariance check.
    Check(CheckArgs),
    /// Symbolic check confirmed along numeric flows.
    Oracle {
        #[command(flatten)]
        check: CheckArgs,
        #[arg(long, default_value_t = 20)]
        trials: usize,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Reduce an equation by an ansatz or a translation.
    Reduce {
        expr: String,
        #[arg(long, conflicts_with = "by", required_unless_present = "by")]
        ansatz: Option<String>,
        /// Translation `d/d<var>`.
        #[arg(long)]
        by: Option<String>,
    },
    /// Hidden-symmetry check of a candidate after a reduction.
    Hidden {
        expr: String,
        #[arg(long)]
        reduce_by: String,
        #[arg(long)]
        candidate: String,
    },
    /// Run a pipeline: a catalog id, a session file, or the session's own.
    Pipeline { spec: Option<String> },
    /// Inspect the catalog.
    Catalog {
        #[command(subcommand)]
        action: CatalogAction,
    },
    /// Run a named test corpus.
    Suite {
        /// Corpus name; only `paper` exists.
        corpus: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 20)]
        trials: usize,
    },
    /// Execute the command statements of a session file.
    Run { file: PathBuf },
}

#[derive(Args, Debug)]
struct CheckArgs {
    /// lie, qcond, cond, inv or cdi.
    kind: String,
    /// Operator(s), expression and, for cond and cdi, a condition set.
    #[arg(num_args = 2..=3)]
    args: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum CatalogAction {
    List,
    Show { id: String },
}

/// Outcome of a command: exit code and the text or JSON to print.
struct Output {
    code: u8,
    text: String,
    json: serde_json::Value,
}

const HOLDS: u8 = 0;
const FAILS: u8 = 1;
const INPUT: u8 = 2;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { INPUT } else { HOLDS });
        }
    };
    let json = cli.json;
    match dispatch(cli) {
        Ok(out) => {
            if json {
                println!("{}", serde_json::to_string_pretty(&out.json).expect("report serializes"));
            } else {
                print!("{}", out.text);
            }
            ExitCode::from(out.code)
        }
        Err(e) => {
            if json {
                println!("{}", json!({ "error": e }));
            } else {
                eprintln!("error: {e}");
            }
            ExitCode::from(INPUT)
        }
    }
}

fn dispatch(cli: Cli) -> Result<Output, String> {
    let mut session = match &cli.session {
        Some(path) => load_session(path)?,
        None => catalog::session().map_err(|e| e.to_string())?,
    };
    run_command(&mut session, cli.command)
}

fn load_session(path: &PathBuf) -> Result<Session, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let declares = text
        .split(';')
        .any(|s| s.trim_start().starts_with("indep"));
    let mut s = if declares {
        Session::new()
    } else {
        Session::parse(PRELUDE).expect("prelude parses")
    };
    s.extend(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(s)
}

/// Defines every `@catalog/<id>` mentioned in `words` that the session does
/// not know yet.
fn import_catalog(session: &mut Session, words: &[&str]) -> Result<(), String> {
    for w in words {
        let mut rest = *w;
        while let Some(i) = rest.find("@catalog/") {
            let tail = &rest[i + 9..];
            let end = tail
                .find(|c: char| !(c.is_ascii_alphanumeric() || "._-".contains(c)))
                .unwrap_or(tail.len());
            let id = tail[..end].trim_end_matches('.');
            let name = format!("@catalog/{id}");
            if session.get(&name).is_none() {
                let entry = catalog::get(id).map_err(|e| e.to_string())?;
                if entry.kind != catalog::EntryKind::Pipeline {
                    let defined = session.extend(entry.payload).map_err(|e| format!("{name}: {e}"))?;
                    let last = defined.last().ok_or_else(|| format!("{name} defines nothing"))?;
                    let item = session.get(last).cloned().expect("just defined");
                    session.define(&name, item);
                }
            }
            rest = &tail[end..];
        }
    }
    Ok(())
}

fn check_request(args: &CheckArgs) -> Result<Request, String> {
    let mut words = vec![args.kind.clone()];
    words.extend(args.args.iter().cloned());
    Request::from_words(&words)
}

fn request_words(r: &Request) -> Vec<&str> {
    match r {
        Request::Lie { field, target } | Request::QCond { field, target } => vec![field, target],
        Request::Cond {
            field,
            target,
            conditions,
        } => vec![field, target, conditions],
        Request::Inv { fields, target } => vec![fields, target],
        Request::Cdi {
            fields,
            target,
            conditions,
        } => vec![fields, target, conditions],
        Request::Hidden {
            target,
            reduction,
            candidate,
        } => vec![target, reduction, candidate],
    }
}

fn verdict_output(request: &Request, records: &[Record]) -> Output {
    let holds = records.iter().all(|r| r.verdict.holds);
    let agrees = records.iter().all(|r| r.agrees() != Some(false));
    let mut text = String::new();
    for r in records {
        let status = if r.verdict.holds { "holds" } else { "fails" };
        text.push_str(&format!("{} {}: {status}\n", request.kind(), r.target));
        for line in r.verdict.to_string().lines() {
            text.push_str(&format!("  {line}\n"));
        }
        for n in &r.numeric {
            text.push_str(&format!(
                "  numeric {}: max deviation {:.3e} over {} points, {}\n",
                n.label,
                n.max_deviation,
                n.points,
                if n.agrees { "agrees" } else { "DISAGREES" }
            ));
        }
    }
    Output {
        code: if holds && agrees { HOLDS } else { FAILS },
        text,
        json: json!({
            "check": request.kind(),
            "holds": holds,
            "numeric_agrees": agrees,
            "records": records.iter().map(Record::to_json).collect::<Vec<_>>(),
        }),
    }
}

fn pipeline_spec(session: &mut Session, spec: Option<&str>) -> Result<PipelineSpec, String> {
    match spec {
        None => session.pipeline_spec(),
        Some(s) if s.starts_with("@catalog/") => catalog::load_pipeline(&s[9..]).map_err(|e| e.to_string()),
        Some(path) => load_session(&PathBuf::from(path))?.pipeline_spec(),
    }
}

fn run_command(session: &mut Session, command: Command) -> Result<Output, String> {
    match command {
        Command::Prolong { op, order } => {
            import_catalog(session, &[&op])?;
            let space = session.space()?.at_least(order).map_err(|e| e.to_string())?;
            let field = session.operator(&op)?;
            let pf = field.prolong(&space, order).map_err(|e| e.to_string())?;
            let mut text = format!("prolongation of {} to order {order}\n", field.name());
            let mut coeffs = serde_json::Map::new();
            for (c, e) in pf.coefficients() {
                if !e.is_zero() {
                    text.push_str(&format!("  {}: {e}\n", c.label()));
                }
                coeffs.insert(c.label().to_string(), json!(e.to_string()));
            }
            Ok(Output {
                code: HOLDS,
                text,
                json: json!({ "operator": field.name(), "order": order, "coefficients": coeffs }),
            })
        }
        Command::Check(args) => {
            let request = check_request(&args)?;
            import_catalog(session, &request_words(&request))?;
            let records = execute(session, &request, None)?;
            Ok(verdict_output(&request, &records))
        }
        Command::Oracle { check, trials, seed } => {
            let request = check_request(&check)?;
            import_catalog(session, &request_words(&request))?;
            let opts = OracleOptions {
                trials,
                seed: seed.unwrap_or_else(default_seed),
                ..OracleOptions::default()
            };
            let records = execute(session, &request, Some(&opts))?;
            Ok(verdict_output(&request, &records))
        }
        Command::Hidden {
            expr,
            reduce_by,
            candidate,
        } => {
            let request = Request::Hidden {
                target: expr,
                reduction: reduce_by,
                candidate,
            };
            import_catalog(session, &request_words(&request))?;
            let records = execute(session, &request, None)?;
            Ok(verdict_output(&request, &records))
        }
        Command::Reduce { expr, ansatz, by } => {
            let red_name = ansatz.or(by).expect("clap requires one");
            import_catalog(session, &[&expr, &red_name])?;
            let reduction = session.reduction(&red_name)?;
            let space = session.space()?.clone();
            let mut text = String::new();
            let mut rows = Vec::new();
            let mut code = HOLDS;
            for (label, f) in session.expressions(&expr)? {
                match reduction.reduce(&f, &space) {
                    Ok(r) => {
                        text.push_str(&format!("{label}\n  reduced: {}\n", r.reduced));
                        rows.push(json!({ "target": label, "reduced": r.reduced.to_string() }));
                    }
                    Err(ReductionError::NotReducible { residuals }) => {
                        code = FAILS;
                        text.push_str(&format!("{label}\n  not reducible by {}\n", reduction.name()));
                        for (c, e) in &residuals {
                            text.push_str(&format!("  {c}: {e}\n"));
                        }
                        rows.push(json!({
                            "target": label,
                            "reduced": null,
                            "residuals": residuals.iter().map(|(c, e)| json!({ "generator": c, "residual": e.to_string() })).collect::<Vec<_>>(),
                        }));
                    }
                    Err(e) => return Err(e.to_string()),
                }
            }
            Ok(Output {
                code,
                text,
                json: json!({ "reduction": reduction.name(), "results": rows }),
            })
        }
        Command::Pipeline { spec } => {
            let spec = pipeline_spec(session, spec.as_deref())?;
            let rows = run_pipeline(&spec);
            Ok(Output {
                code: HOLDS,
                text: format_pipeline(&rows),
                json: serde_json::to_value(&rows).expect("rows serialize"),
            })
        }
        Command::Catalog { action } => match action {
            CatalogAction::List => {
                let mut text = String::new();
                for e in catalog::entries() {
                    text.push_str(&format!("{:<22} {:<15} {}\n", e.id, e.kind, e.anchor));
                }
                Ok(Output {
                    code: HOLDS,
                    text,
                    json: serde_json::to_value(catalog::entries()).expect("entries serialize"),
                })
            }
            CatalogAction::Show { id } => {
                let entry = catalog::get(&id).map_err(|e| e.to_string())?;
                let loaded = catalog::load(&id).map_err(|e| e.to_string())?;
                let summary = match &loaded {
                    Loaded::Pipeline(p) => format!(
                        "{} class members, {} reductions, {} candidates",
                        p.class.len(),
                        p.reductions.len(),
                        p.candidates.len()
                    ),
                    Loaded::Item(Item::List(l)) => format!("{} entries", l.len()),
                    Loaded::Item(Item::Operator(f)) => f.name().to_string(),
                    Loaded::Item(Item::Expression(e)) => e.to_string(),
                    Loaded::Item(Item::Conditions(c)) => c
                        .generators()
                        .iter()
                        .map(|g| format!("{g} = 0"))
                        .collect::<Vec<_>>()
                        .join(", "),
                    Loaded::Item(Item::Ansatz(a)) => format!("{} = {}", a.new_var.0, a.new_var.1),
                };
                let text = format!(
                    "{}\nkind: {}\nanchor: {}\nsha256: {}\n{}\n{}\n",
                    entry.id,
                    entry.kind,
                    entry.anchor,
                    catalog::checksum(entry),
                    summary,
                    entry.payload
                );
                Ok(Output {
                    code: HOLDS,
                    text,
                    json: json!({
                        "entry": entry,
                        "sha256": catalog::checksum(entry),
                        "summary": summary,
                    }),
                })
            }
        },
        Command::Suite { corpus, seed, trials } => {
            if corpus != "paper" {
                return Err(format!("unknown corpus `{corpus}`; available: paper"));
            }
            let opts = OracleOptions {
                trials,
                seed: seed.unwrap_or_else(default_seed),
                ..OracleOptions::default()
            };
            let report = run_suite(&opts).map_err(|e| e.to_string())?;
            Ok(Output {
                code: if report.all_pass() { HOLDS } else { FAILS },
                text: format_suite(&report),
                json: serde_json::to_value(&report).expect("report serializes"),
            })
        }
        Command::Run { file } => {
            let mut s = load_session(&file)?;
            let commands = s.commands.clone();
            let mut code = HOLDS;
            let mut text = String::new();
            let mut reports = Vec::new();
            for c in commands {
                let mut argv = vec!["jetsym".to_string()];
                argv.extend(c.words.iter().cloned());
                let out = Cli::try_parse_from(&argv)
                    .map_err(|e| e.to_string())
                    .and_then(|cli| run_command(&mut s, cli.command))
                    .map_err(|e| format!("{}:{}: {e}", file.display(), c.line))?;
                code = code.max(out.code);
                text.push_str(&format!("> {}\n{}", c.words.join(" "), out.text));
                reports.push(json!({ "line": c.line, "command": c.words, "report": out.json }));
            }
            Ok(Output {
                code,
                text,
                json: json!({ "commands": reports }),
            })
        }
    }
}
