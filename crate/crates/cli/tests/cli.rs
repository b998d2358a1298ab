use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const EX2: &str = include_str!("../../core/fixtures/ex2.scheme");

fn run(args: &[&str]) -> Output {
    run_env(args, &[])
}

fn run_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_lambdasym"));
    cmd.args(args).env_remove("LAMBDASYM_THREADS");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap()
}

fn without_clock(mut v: Value) -> String {
    v.as_object_mut().unwrap().remove("wall_clock_ms");
    serde_json::to_string(&v).unwrap()
}

fn scheme_file(dir: &Path) -> String {
    let p = dir.join("ex2.scheme");
    std::fs::write(&p, EX2).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn check_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let file = scheme_file(dir.path());
    let ok = run(&[
        "check", &file, "--phi", "1", "--chi", "1+h*u[0]", "--emit", "json",
    ]);
    assert_eq!(code(&ok), 0, "{}", String::from_utf8_lossy(&ok.stderr));
    let v = json(&ok);
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["pass"], true);
    assert_eq!(v["symmetry"]["verdict"], "zero");
    let bad = run(&["check", &file, "--phi", "1", "--chi", "1"]);
    assert_eq!(code(&bad), 2);
    assert!(stdout(&bad).starts_with("check FAIL"));
}

#[test]
fn malformed_input_is_a_usage_error() {
    let o = run(&["check", "ex2", "--chi", "1 + h*)"]);
    assert_eq!(code(&o), 1);
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("column 7"), "{err}");
    assert_eq!(
        code(&run(&["check", "ex2", "--chi", "1", "--lambda", "0"])),
        1
    );
    assert_eq!(code(&run(&["check", "no-such-scheme", "--chi", "1"])), 1);
    assert_eq!(code(&run(&["frobnicate"])), 1);

    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("broken.scheme");
    std::fs::write(&p, "name = broken\nequation = u[1] = u[0] +\n").unwrap();
    let o = run(&["check", p.to_str().unwrap(), "--chi", "1"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8(o.stderr).unwrap().contains("line 2"));
}

#[test]
fn find_lists_hits_or_says_none() {
    let v = json(&run(&[
        "find",
        "ex2",
        "--chi-degree",
        "1",
        "--emit",
        "json",
    ]));
    let hits = v["find"]["hits"].as_array().unwrap();
    assert_eq!(hits.len(), 1);
    assert_eq!(hits[0]["chi"], "h*u[0] + 1");
    let none = run(&["find", "ex2", "--chi-degree", "0", "--emit", "json"]);
    assert_eq!(code(&none), 0);
    assert_eq!(
        json(&none)["find"]["none_found"],
        "none found up to degree 0"
    );
    let trivial = json(&run(&[
        "find",
        "trivial",
        "--chi-degree",
        "0",
        "--emit",
        "json",
    ]));
    assert_eq!(trivial["find"]["hits"][0]["chi"], "1");
}

#[test]
fn reduce_reports() {
    let v = json(&run(&[
        "reduce", "ex2", "--chi", "1+h*u[0]", "--emit", "json",
    ]));
    assert_eq!(v["pass"], true);
    assert_eq!(v["reduction"]["method"], "symbolic");
    assert_eq!(v["reduction"]["verification"]["status"], "pass");
    let exp = run(&[
        "reduce",
        "ex1-exp",
        "--chi",
        "1+h*f'[0](u[0])",
        "--h",
        "0.05",
        "--emit",
        "json",
    ]);
    assert_eq!(code(&exp), 0);
    assert_eq!(json(&exp)["reduction"]["reduced_map"], "v");
    let wrong = run(&[
        "reduce",
        "ex2",
        "--chi",
        "1",
        "--verify-trials",
        "5",
        "--steps",
        "40",
    ]);
    assert_eq!(code(&wrong), 2);
    assert!(stdout(&wrong).contains("not reducible by this invariant"));
}

#[test]
fn limit_exit_codes() {
    assert_eq!(
        code(&run(&[
            "limit",
            "--lambda",
            "u",
            "--h-start",
            "0.1",
            "--levels",
            "4"
        ])),
        0
    );
    let zero = run(&["limit", "--lambda", "0", "--emit", "json"]);
    assert_eq!(code(&zero), 0);
    assert_eq!(json(&zero)["limit"]["exact"], true);
    assert_eq!(code(&run(&["limit", "--levels", "1"])), 1);
}

#[test]
fn evolve_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t.csv");
    let o = run(&[
        "evolve",
        "ex2",
        "--init",
        "0.5,0.6",
        "--steps",
        "10",
        "--chi",
        "1+h*u[0]",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    let text = std::fs::read_to_string(out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("n,u_n,v_n"));
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(first[0], "0");
    assert!((first[2].parse::<f64>().unwrap() - 0.0875).abs() < 1e-15);
    assert_eq!(text.lines().count(), 13);
    assert!(text.lines().last().unwrap().ends_with(','));
}

#[test]
fn reports_are_deterministic() {
    for args in [
        &[
            "check", "ex2", "--chi", "1+h*u[0]", "--seed", "17", "--emit", "json",
        ][..],
        &["find", "ex1-cubic", "--chi-degree", "1", "--emit", "json"][..],
        &["reduce", "ex2", "--chi", "1+h*u[0]", "--emit", "json"][..],
        &["limit", "--emit", "json"][..],
    ] {
        let a = without_clock(json(&run_env(args, &[("LAMBDASYM_THREADS", "1")])));
        let b = without_clock(json(&run_env(args, &[("LAMBDASYM_THREADS", "3")])));
        let c = without_clock(json(&run(args)));
        assert_eq!(a, b, "{args:?}");
        assert_eq!(a, c, "{args:?}");
    }
}

#[test]
fn json_report_reparses() {
    let o = run(&["check", "ex2", "--chi", "1+h*u[0]", "--emit", "json"]);
    let r = lambdasym::report::RunReport::from_json(&stdout(&o)).unwrap();
    assert_eq!(r.command, "check");
    assert_eq!(r.to_json() + "\n", stdout(&o));
}
