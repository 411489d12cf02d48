use std::fs;
use std::process::{Command, Output};

fn jetsym(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_jetsym")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn invariant_holds_with_exit_zero() {
    let o = jetsym(&["check", "inv", "@catalog/rotation.J", "u_x^2+u_y^2"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("holds"));
}

#[test]
fn failure_reports_residual_with_exit_one() {
    let o = jetsym(&["--json", "check", "inv", "@catalog/rotation.J", "u_x"]);
    assert_eq!(o.status.code(), Some(1));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["holds"], false);
    assert_eq!(v["records"][0]["verdict"]["residuals"][0]["reduced"], "-u_y");
}

#[test]
fn hidden_symmetry_example() {
    let o = jetsym(&[
        "hidden",
        "@catalog/hidden-translation.1",
        "--reduce-by",
        "d/dx",
        "--candidate",
        "d/dy",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.contains("hidden: holds (proper)"), "{out}");
    assert!(out.contains("K1_{2}(t, y, u)"), "{out}");
}

#[test]
fn input_errors_exit_two() {
    let o = jetsym(&["check", "lie", "d/dx", "u_x +"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!o.stderr.is_empty());
    assert_eq!(jetsym(&["catalog", "show", "rotation.K"]).status.code(), Some(2));
}

#[test]
fn ansatz_reduction() {
    let o = jetsym(&["reduce", "u_xx+u_yy", "--ansatz", "@catalog/ansatz-r"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("4*r*phi_rr + 4*phi_r"));
}

#[test]
fn catalog_list_and_show() {
    let list = stdout(&jetsym(&["catalog", "list"]));
    assert!(list.lines().any(|l| l.starts_with("DI-rotation")));
    let show = stdout(&jetsym(&["catalog", "show", "rotation.J"]));
    assert!(show.contains("op J = x*d/dy - y*d/dx;"), "{show}");
}

#[test]
fn suite_output_is_deterministic() {
    let a = jetsym(&["suite", "paper"]);
    let b = jetsym(&["suite", "paper"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    assert!(stdout(&a).contains("0 disagreements"));
}

#[test]
fn session_files() {
    let dir = std::env::temp_dir().join(format!("jetsym-cli-{}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    let file = dir.join("rot.js");
    fs::write(
        &file,
        "op R = x*d/dy - y*d/dx;\n\
         expr E = u_x^2 + u_y^2;\n\
         check inv R E;\n\
         check inv R \"u_x\";\n",
    )
    .unwrap();
    let run = jetsym(&["run", file.to_str().unwrap()]);
    assert_eq!(run.status.code(), Some(1));
    let out = stdout(&run);
    assert!(out.contains("> check inv R E"), "{out}");
    let with = jetsym(&["--session", file.to_str().unwrap(), "check", "inv", "R", "E"]);
    assert_eq!(with.status.code(), Some(0));
    fs::remove_dir_all(&dir).unwrap();
}
