use jetsym::oracle::OracleOptions;
use jetsym::suite::{format_suite, catalog_checks, run_suite, suite_session};

#[test]
fn suite_is_deterministic_and_agrees() {
    let opts = OracleOptions::default();
    let a = run_suite(&opts).unwrap();
    let b = run_suite(&opts).unwrap();
    assert_eq!(format_suite(&a), format_suite(&b));
    assert_eq!(a.to_json(), b.to_json());
    assert!(a.all_pass(), "{}", format_suite(&a));
    assert!(a.numeric_checks >= 60);
    assert_eq!(a.disagreements, 0);
}

#[test]
fn checks_are_sorted_and_unique() {
    let s = suite_session().unwrap();
    let ids: Vec<String> = catalog_checks(&s).into_iter().map(|c| c.id).collect();
    let mut sorted = ids.clone();
    sorted.sort();
    sorted.dedup();
    assert_eq!(ids, sorted);
}

#[test]
fn seed_changes_points_not_verdicts() {
    let a = run_suite(&OracleOptions::default()).unwrap();
    let b = run_suite(&OracleOptions {
        seed: 7,
        ..OracleOptions::default()
    })
    .unwrap();
    assert!(b.all_pass());
    let holds = |r: &jetsym::suite::SuiteReport| r.rows.iter().map(|x| x.holds).collect::<Vec<_>>();
    assert_eq!(holds(&a), holds(&b));
}
