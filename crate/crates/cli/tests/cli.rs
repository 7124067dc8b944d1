use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn copula(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_copula"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn json(args: &[&str]) -> Value {
    let mut all = args.to_vec();
    all.push("--json");
    let o = copula(&all);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    serde_json::from_slice(&o.stdout).expect("valid JSON")
}

fn row<'a>(text: &'a str, name: &str) -> Vec<&'a str> {
    text.lines()
        .map(|l| l.split_whitespace().collect::<Vec<_>>())
        .find(|cells| cells.first() == Some(&name))
        .unwrap_or_else(|| panic!("no row {name} in\n{text}"))
}

fn cell(text: &str, name: &str) -> f64 {
    row(text, name)[1].parse().unwrap()
}

#[test]
fn measure_mtheta_matches_closed_forms() {
    let o = copula(&["measure", "--family", "mtheta", "--theta", "0.2"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert_eq!(cell(&text, "tau"), 0.36);
    assert_eq!(cell(&text, "rho"), 0.04);
    assert_eq!(cell(&text, "beta"), 0.2);
    assert_eq!(cell(&text, "mu_inf"), 0.2);
    assert!((cell(&text, "mu_1") - 0.096).abs() < 1e-5);
    for name in ["tau", "rho", "beta", "sigma", "mu_1", "mu_2", "mu_inf"] {
        assert_eq!(row(&text, name).last(), Some(&"ok"), "{name}");
    }
}

#[test]
fn compact_spec_equals_flags() {
    let a = copula(&["measure", "--family", "mtheta:0.2"]);
    let b = copula(&["measure", "--family", "mtheta", "--theta", "0.2"]);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn measure_json_is_versioned_and_reproducible() {
    let args = ["measure", "--family", "clayton:2", "--json"];
    let a = copula(&args);
    let b = copula(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let v: Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(v["spec"], 1);
    assert_eq!(v["command"], "measure");
    assert!(v.get("timestamp").is_none());
    assert_eq!(v["report"]["copula"], "clayton:2");
    let lower = v["report"]["lambda_lower"]["value"].as_f64().unwrap();
    assert!((lower - 0.5f64.powf(0.5)).abs() < 1e-12);
}

#[test]
fn timestamp_is_opt_in() {
    let v = json(&["measure", "--family", "pi", "--timestamp"]);
    assert!(v["timestamp"].as_u64().unwrap() > 1_600_000_000);
}

#[test]
fn p_list_selects_exponents() {
    let v = json(&["measure", "--family", "m", "--p", "1,3,inf"]);
    let mu = v["report"]["mu"].as_array().unwrap();
    assert_eq!(mu.len(), 3);
    for m in mu {
        assert_eq!(m["raw"].as_f64().unwrap(), 0.0);
    }
}

#[test]
fn bad_family_is_a_usage_error() {
    let o = copula(&["measure", "--family", "gumbel"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("unknown family"));
    assert!(o.stdout.is_empty());

    let o = copula(&["measure", "--family", "mtheta", "--theta", "0.5"]);
    assert_eq!(o.status.code(), Some(2));

    let o = copula(&["measure", "--family", "pi", "--p", "0.5"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn mix_depth_is_bounded() {
    let four = "mix(0.5,mix(0.5,mix(0.5,mix(0.5,pi,m),w),m),pi)";
    let o = copula(&["measure", "--family", four]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));

    let five = "mix(0.5,mix(0.5,mix(0.5,mix(0.5,mix(0.5,pi,m),m),m),m),m)";
    let o = copula(&["measure", "--family", five]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("depth"));
}

#[test]
fn table_agrees_with_closed_forms() {
    let v = json(&["table"]);
    assert_eq!(v["spec"], 1);
    assert!(v["max_diff"].as_f64().unwrap() <= 1e-3);
    assert_eq!(v["rows"].as_array().unwrap().len(), 8);

    let o = copula(&["table", "--theta", "0.4"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn verify_four_and_corollary_pass() {
    for prop in ["4", "corollary"] {
        let v = json(&["verify", prop, "--trials", "3", "--grid-n", "128"]);
        assert_eq!(v["passed"], true, "{prop}");
        assert!(v["failures"].as_array().unwrap().is_empty());
        assert!(!v["policy"].as_array().unwrap().is_empty());
    }
}

#[test]
fn verify_text_prints_policy() {
    let o = copula(&["verify", "3", "--trials", "2", "--grid-n", "128"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("tolerance policy:"));
    assert!(text.contains("|beta - (1 - 4 theta)| <= 1e-12"));
    assert!(text
        .lines()
        .any(|l| l.starts_with("0 ") && l.ends_with("pass")));
}

#[test]
fn verify_rejects_unknown_identity() {
    assert_eq!(copula(&["verify", "5"]).status.code(), Some(2));
    assert_eq!(
        copula(&["verify", "1", "--trials", "0"]).status.code(),
        Some(2)
    );
}

fn read_pairs(path: &Path) -> Vec<(f64, f64)> {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("u,v"));
    lines
        .map(|l| {
            let (u, v) = l.split_once(',').unwrap();
            (u.parse().unwrap(), v.parse().unwrap())
        })
        .collect()
}

#[test]
fn sample_upper_and_lower_bounds() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("m.csv");
    let w = dir.path().join("w.csv");
    let o = copula(&[
        "sample",
        "--family",
        "m",
        "--n",
        "200",
        "--seed",
        "3",
        "--out",
        m.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let o = copula(&[
        "sample",
        "--family",
        "w",
        "--n",
        "200",
        "--seed",
        "3",
        "--out",
        w.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));

    let m = read_pairs(&m);
    assert_eq!(m.len(), 200);
    assert!(m.iter().all(|&(u, v)| u == v));
    let w = read_pairs(&w);
    assert!(w.iter().all(|&(u, v)| (u + v - 1.0).abs() < 1e-15));
}

#[test]
fn sample_is_seeded() {
    let a = copula(&[
        "sample",
        "--family",
        "clayton:2",
        "--n",
        "50",
        "--seed",
        "9",
    ]);
    let b = copula(&[
        "sample",
        "--family",
        "clayton:2",
        "--n",
        "50",
        "--seed",
        "9",
    ]);
    let c = copula(&[
        "sample",
        "--family",
        "clayton:2",
        "--n",
        "50",
        "--seed",
        "10",
    ]);
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn sample_to_unwritable_path_fails() {
    let o = copula(&[
        "sample",
        "--family",
        "pi",
        "--n",
        "3",
        "--out",
        "/nonexistent/dir/x.csv",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("cannot write"));
}

#[test]
fn audit_input_errors() {
    let dir = tempfile::tempdir().unwrap();
    let one = dir.path().join("one.csv");
    std::fs::write(&one, "x,y\n0.5,0.2\n").unwrap();
    let o = copula(&["audit", one.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("need at least 2 observations"));

    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "x,y\n1,2\n3,abc\n").unwrap();
    let o = copula(&["audit", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 3"));

    let o = copula(&["audit", dir.path().join("missing.csv").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

fn sample_then_audit(family: &str, n: &str, seed: &str) -> Value {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("data.csv");
    let o = copula(&[
        "sample",
        "--family",
        family,
        "--n",
        n,
        "--seed",
        seed,
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    json(&[
        "audit",
        path.to_str().unwrap(),
        "--bootstrap",
        "100",
        "--swap-rounds",
        "20",
        "--grid-n",
        "256",
    ])
}

#[test]
fn audit_finds_no_asymmetry_in_independent_data() {
    let v = sample_then_audit("pi", "2000", "11");
    assert_eq!(v["spec"], 1);
    assert_eq!(v["command"], "audit");
    assert_eq!(v["verdict"]["label"], "no evidence of asymmetry");
}

#[test]
fn audit_flags_asymmetric_data() {
    let v = sample_then_audit("mtheta:0.3333333333333333", "2000", "12");
    assert_eq!(v["verdict"]["label"], "asymmetric");
    assert_eq!(v["verdict"]["asymmetric"], true);
}

#[test]
fn audit_recovers_kendall_tau() {
    let v = sample_then_audit("mtheta:0.2", "100000", "1");
    let tau = v["report"]["tau"]["value"].as_f64().unwrap();
    assert!((tau - 0.36).abs() < 0.01, "tau = {tau}");
}
