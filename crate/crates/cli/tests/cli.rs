use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const PLUS: [&str; 10] = ["--lambda", "1", "--Lambda", "2", "--op", "plus", "--N", "4", "--a", "0"];
const LAPLACE: [&str; 8] = ["--lambda", "1", "--Lambda", "1", "--N", "3", "--a", "0"];

fn pucci(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pucci"))
        .args(args)
        .env_remove("LOGLEVEL")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = pucci(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn with<'a>(base: &[&'a str], rest: &[&'a str]) -> Vec<&'a str> {
    base.iter().chain(rest).copied().collect()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn exponents_report() {
    let v: Value = serde_json::from_str(&ok(&with(&["exponents"], &PLUS))).unwrap();
    assert_eq!(v["p_serrin"], 5.0);
    assert_eq!(v["p_pseudo"], 9.0);
    assert_eq!(v["p_sobolev"], 3.0);

    let v: Value = serde_json::from_str(&ok(&with(&["exponents"], &LAPLACE))).unwrap();
    assert_eq!(v["p_serrin"], 3.0);
    assert_eq!(v["p_sobolev"], 5.0);
}

#[test]
fn degenerate_dimension_exits_two() {
    let out = pucci(&["exponents", "--lambda", "1", "--Lambda", "2", "--op", "plus", "--N", "3", "--a", "0"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Ñ₊ ≤ 2"));
}

#[test]
fn bad_flags_exit_two() {
    assert_eq!(pucci(&["exponents", "--op", "sideways"]).status.code(), Some(2));
    assert_eq!(pucci(&["orbit", "--p", "5", "--seed", "point", "0.2;2"]).status.code(), Some(2));
    assert_eq!(pucci(&["orbit", "--p", "5", "--seed", "comet"]).status.code(), Some(2));
}

#[test]
fn gamma_orbit_starts_concave() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("gamma");
    ok(&with(&["orbit", "--p", "5", "--seed", "gamma", "--out", path(&prefix)], &LAPLACE));
    let csv = std::fs::read_to_string(prefix.with_extension("csv")).unwrap();
    let mut rows = csv.lines();
    assert_eq!(rows.next(), Some("t,X,Z,region"));
    assert_eq!(rows.next().unwrap().rsplit(',').next(), Some("RPlus"));
    let events: Value = serde_json::from_str(&std::fs::read_to_string(prefix.with_extension("events.json")).unwrap()).unwrap();
    assert!(events.as_array().unwrap().iter().all(|e| e["kind"].is_string() && e["t"].is_number()));
}

#[test]
fn seed_at_nullcline_junction_reports_at_p() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("junction");
    ok(&with(&["orbit", "--p", "5", "--seed", "point", "0.2,2", "--out", path(&prefix)], &LAPLACE));
    let events: Value = serde_json::from_str(&std::fs::read_to_string(prefix.with_extension("events.json")).unwrap()).unwrap();
    let first = &events[0];
    assert!(matches!(first["kind"].as_str(), Some("ZNullclineCross" | "ConcavityCross")));
    assert_eq!(first["t"], 0.0);
    assert_eq!(first["detail"], "at P");
}

#[test]
fn critical_matches_laplacian() {
    let v: Value = serde_json::from_str(&ok(&with(&["critical", "--tol", "1e-4"], &LAPLACE))).unwrap();
    assert!((v["p_star"].as_f64().unwrap() - 5.0).abs() < 1e-3);
}

#[test]
fn sweep_is_monotone_and_parallel_safe() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    let base = ["sweep", "--p-from", "2", "--p-to", "10", "--steps", "17"];
    ok(&with(&with(&base, &PLUS), &["--jobs", "1", "--out", path(&a)]));
    ok(&with(&with(&base, &PLUS), &["--jobs", "3", "--out", path(&b)]));
    let csv = std::fs::read_to_string(&a).unwrap();
    assert_eq!(csv, std::fs::read_to_string(&b).unwrap());
    let rank = |c: &str| ["C", "F", "P", "S"].iter().position(|k| *k == c).expect("resolved class");
    let ranks: Vec<usize> = csv.lines().skip(1).map(|l| rank(l.split(',').nth(1).unwrap())).collect();
    assert_eq!(ranks.len(), 17);
    assert!(ranks.windows(2).all(|w| w[0] <= w[1]), "{csv}");
    assert_eq!(ranks.first(), Some(&0));
    assert_eq!(ranks.last(), Some(&3));
}

#[test]
fn classify_at_pseudo_exponent() {
    let out = ok(&with(&["classify", "--p", "9"], &PLUS));
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["class"], "P");
}

#[test]
fn portrait_draws_centre_loops() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("lap.svg");
    ok(&with(&["portrait", "--p", "5", "--grid", "10x8", "--out", path(&file)], &LAPLACE));
    let svg = std::fs::read_to_string(file).unwrap();
    assert!(svg.starts_with("<svg"));
    assert!(!svg.contains("href="));
    for class in ["arrow", "concavity", "x-nullcline", "z-nullcline", "wall", "orbit gamma", "stationary"] {
        assert!(svg.contains(&format!("class=\"{class}")), "missing {class}");
    }
    assert!(svg.matches("<polygon class=\"cycle\"").count() >= 1);
}

#[test]
fn shoot_ends_at_zero() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("shoot.csv");
    let out = ok(&with(&["shoot", "--gamma", "1", "--p", "4", "--out", path(&file)], &PLUS));
    let csv = std::fs::read_to_string(file).unwrap();
    assert!(csv.starts_with("r,u,du,ddu\n"));
    let u: f64 = csv.lines().last().unwrap().split(',').nth(1).unwrap().parse().unwrap();
    assert!(u.abs() <= 1e-12);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert!(v["wall_radius"].as_f64().unwrap() > 0.0);
}

#[test]
fn dulac_at_sobolev_exponent() {
    let out = ok(&with(&["dulac", "--p", "3"], &PLUS));
    assert!(out.contains("Φ=0 in R+; Φ>0 in R-"), "{out}");
}

#[test]
fn exterior_verdicts() {
    assert!(ok(&with(&["exterior", "--p", "8"], &PLUS)).contains("Nonexistence"));
}

#[test]
fn singular_catalog_json() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("cat.json");
    ok(&with(&["singular", "--p", "4", "--out", path(&file)], &PLUS));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(file).unwrap()).unwrap();
    assert!(!v["entries"].as_array().unwrap().is_empty());
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("run.toml");
    std::fs::write(&file, "lambda = 1.0\nLambda = 2.0\nop = \"plus\"\nN = 4\na = 0.0\np = 7.0\n").unwrap();
    let v: Value = serde_json::from_str(&ok(&["exponents", "--config", path(&file)])).unwrap();
    assert_eq!(v["p_pseudo"], 9.0);
    let v: Value = serde_json::from_str(&ok(&["exponents", "--config", path(&file), "--Lambda", "1"])).unwrap();
    assert_eq!(v["p_pseudo"], 3.0);
    let echoed = ok(&["config", "--config", path(&file), "--N", "5"]);
    assert!(echoed.contains("N = 5"), "{echoed}");
    assert!(echoed.contains("p = 7.0"), "{echoed}");
}

#[test]
fn loglevel_controls_stderr() {
    let quiet = pucci(&with(&["classify", "--p", "9"], &PLUS));
    let loud = Command::new(env!("CARGO_BIN_EXE_pucci"))
        .args(with(&["classify", "--p", "9"], &PLUS))
        .env("LOGLEVEL", "debug")
        .output()
        .unwrap();
    assert!(quiet.stderr.is_empty());
    assert!(loud.stderr.len() > quiet.stderr.len());
    assert_eq!(quiet.stdout, loud.stdout);
}
