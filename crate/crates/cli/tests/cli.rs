use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const FIXTURE: &str = "dense 4 5\n1 3 0 2\n3 0 5 0\n0 5 2 1\n2 0 1 4\n";

fn ipq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ipq"))
        .args(args)
        .env_remove("IPQ_CK")
        .env_remove("IPQ_CGAMMA")
        .output()
        .unwrap()
}

fn report(args: &[&str]) -> Value {
    let out = ipq(args);
    assert!(
        out.status.success(),
        "ipq {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap()
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn gen_planted_has_requested_mass() {
    let dir = TempDir::new().unwrap();
    let m = dir.path().join("m.txt");
    let r = report(&[
        "gen",
        "planted",
        "--n",
        "16",
        "--rho",
        "4",
        "--m",
        "64",
        "--seed",
        "1",
        "-o",
        s(&m),
    ]);
    assert_eq!(r["result"]["total"], 64);
    let v = report(&["verify", "--matrix", s(&m)]);
    assert_eq!(v["result"]["exact"], 64);
    assert_eq!(v["result"]["symmetric"], true);
}

#[test]
fn gen_planted_rejects_non_square_ratio() {
    let out = ipq(&["gen", "planted", "--n", "16", "--rho", "4", "--m", "60"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nearest feasible"));
}

#[test]
fn gen_random_with_zero_density_is_zero() {
    let out = ipq(&["gen", "random", "--n", "8", "--rho", "3", "--p", "0"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("dense 8 3"));
    assert!(lines.all(|l| l.split_whitespace().all(|v| v == "0")));
}

#[test]
fn gen_graph_family_closed_forms() {
    let dir = TempDir::new().unwrap();
    let g = dir.path().join("g.txt");
    let r = report(&[
        "gen",
        "graph-family",
        "--family",
        "g1",
        "--n",
        "64",
        "--rho",
        "2",
        "-o",
        s(&g),
    ]);
    assert_eq!(r["result"]["total"], 384);
    assert_eq!(r["result"]["edges"], 192);
    let w = g.with_extension("txt.weights");
    assert!(w.exists());
    let v = report(&["verify", "--graph", s(&g), "--weights", s(&w)]);
    assert_eq!(v["result"]["exact"], 384);

    let g = dir.path().join("h.txt");
    let r = report(&[
        "gen",
        "graph-family",
        "--family",
        "grho",
        "--n",
        "64",
        "--rho",
        "2",
        "-o",
        s(&g),
    ]);
    assert_eq!(r["result"]["total"], 576);
}

#[test]
fn estimate_zero_matrix() {
    let dir = TempDir::new().unwrap();
    let z = write(dir.path(), "z.txt", "sparse 5 3\n");
    let r = report(&[
        "estimate",
        "--matrix",
        s(&z),
        "--epsilon",
        "0.25",
        "--verify",
    ]);
    assert_eq!(r["result"]["estimate"], 0.0);
    assert_eq!(r["result"]["exact"], 0);
    assert_eq!(r["result"]["relative_error"], 0.0);
    assert!(r["result"]["queries"]["total"].as_u64().unwrap() > 0);
}

#[test]
fn estimate_verify_on_fixture() {
    let dir = TempDir::new().unwrap();
    let f = write(dir.path(), "f.txt", FIXTURE);
    let r = report(&[
        "estimate",
        "--matrix",
        s(&f),
        "--epsilon",
        "0.25",
        "--verify",
    ]);
    assert_eq!(r["result"]["exact"], 29);
    assert_eq!(r["schema_version"], 1);
    assert_eq!(r["result"]["input"]["kind"], "symmetric");
}

#[test]
fn estimate_planted_trials() {
    let dir = TempDir::new().unwrap();
    let m = dir.path().join("m.txt");
    report(&[
        "gen",
        "planted",
        "--n",
        "256",
        "--rho",
        "4",
        "--m",
        "1024",
        "--seed",
        "2",
        "-o",
        s(&m),
    ]);
    let out = ipq(&[
        "estimate",
        "--matrix",
        s(&m),
        "--epsilon",
        "0.25",
        "--trials",
        "100",
        "--verify",
        "--assert",
        "--no-fallback",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let r: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(
        r["result"]["trials"]["in_interval_fraction"]
            .as_f64()
            .unwrap()
            >= 0.9
    );
    assert_eq!(
        r["result"]["trials"]["per_trial"].as_array().unwrap().len(),
        100
    );
    assert_eq!(r["result"]["trials"]["per_trial"][3]["seed"], 3);
    assert_eq!(r["assertions"][0]["passed"], true);
}

#[test]
fn failed_assertion_exits_nonzero() {
    let dir = TempDir::new().unwrap();
    let f = write(dir.path(), "f.txt", FIXTURE);
    let out = ipq(&[
        "estimate",
        "--matrix",
        s(&f),
        "--epsilon",
        "0.25",
        "--verify",
        "--assert",
        "--min-fraction",
        "1.5",
    ]);
    assert_eq!(out.status.code(), Some(3));
    let r: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(r["assertions"][0]["passed"], false);
}

#[test]
fn estimate_bilinear_and_graph() {
    let dir = TempDir::new().unwrap();
    let a = write(dir.path(), "a.txt", "dense 2 4\n1 0\n2 4\n");
    let x = write(dir.path(), "x.txt", "weights 2 2\n1\n2\n");
    let y = write(dir.path(), "y.txt", "weights 2 3\n3\n1\n");
    let r = report(&[
        "estimate",
        "--matrix",
        s(&a),
        "--x",
        s(&x),
        "--y",
        s(&y),
        "--epsilon",
        "0.3",
        "--verify",
        "--trials",
        "20",
    ]);
    assert_eq!(r["result"]["exact"], 23);
    assert_eq!(r["result"]["input"]["kind"], "bilinear");
    assert!(
        r["result"]["trials"]["in_interval_fraction"]
            .as_f64()
            .unwrap()
            >= 0.9
    );

    let g = dir.path().join("g.txt");
    report(&[
        "gen",
        "graph-family",
        "--family",
        "g1",
        "--n",
        "64",
        "--rho",
        "3",
        "-o",
        s(&g),
    ]);
    let w = format!("{}.weights", s(&g));
    let r = report(&[
        "estimate",
        "--graph",
        s(&g),
        "--weights",
        &w,
        "--epsilon",
        "0.25",
        "--verify",
    ]);
    assert_eq!(r["result"]["exact"], 11 * 64);
    assert!(r["result"]["relative_error"].as_f64().unwrap() <= 0.25);
}

#[test]
fn sample_single_entry() {
    let dir = TempDir::new().unwrap();
    let one = write(dir.path(), "one.txt", "dense 1 5\n5\n");
    let r = report(&[
        "sample",
        "--matrix",
        s(&one),
        "--epsilon",
        "0.25",
        "--samples",
        "10",
    ]);
    let entries = r["result"]["entries"].as_array().unwrap();
    assert_eq!(entries.len(), 1);
    assert_eq!(entries[0]["count"], 10);
    assert_eq!(entries[0]["value"], 5);
    assert_eq!(r["result"]["tv_distance"], 0.0);
}

#[test]
fn sample_fixture_law() {
    let dir = TempDir::new().unwrap();
    let f = write(dir.path(), "f.txt", FIXTURE);
    let r = report(&[
        "sample",
        "--matrix",
        s(&f),
        "--epsilon",
        "0.25",
        "--samples",
        "200000",
        "--assert",
    ]);
    assert!(r["result"]["tv_distance"].as_f64().unwrap() < 0.02);
    assert_eq!(r["result"]["exact_total"], 29);
    assert_eq!(r["result"]["chi_square"]["df"], 10);
}

#[test]
fn sample_bilinear_orders_entries() {
    let dir = TempDir::new().unwrap();
    let a = write(dir.path(), "a.txt", "dense 2 4\n1 0\n2 4\n");
    let x = write(dir.path(), "x.txt", "weights 2 2\n1\n2\n");
    let y = write(dir.path(), "y.txt", "weights 2 3\n3\n1\n");
    let r = report(&[
        "sample",
        "--matrix",
        s(&a),
        "--x",
        s(&x),
        "--y",
        s(&y),
        "--epsilon",
        "0.25",
        "--samples",
        "50000",
    ]);
    let entries = r["result"]["entries"].as_array().unwrap();
    // C = [[3, 0], [12, 8]], total 23
    let targets: Vec<(u64, u64, f64)> = entries
        .iter()
        .map(|e| {
            (
                e["row"].as_u64().unwrap(),
                e["col"].as_u64().unwrap(),
                e["target"].as_f64().unwrap(),
            )
        })
        .collect();
    assert_eq!(
        targets,
        vec![(0, 0, 3.0 / 23.0), (1, 0, 12.0 / 23.0), (1, 1, 8.0 / 23.0)]
    );
    for e in entries {
        let ratio = e["frequency"].as_f64().unwrap() / e["target"].as_f64().unwrap();
        assert!((0.7..=1.3).contains(&ratio), "{e}");
    }
}

#[test]
fn sample_all_zero_matrix_errors() {
    let dir = TempDir::new().unwrap();
    let z = write(dir.path(), "z.txt", "sparse 3 2\n");
    let out = ipq(&[
        "sample",
        "--matrix",
        s(&z),
        "--epsilon",
        "0.25",
        "--samples",
        "5",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no positive entries"));
}

#[test]
fn regr_test_fixture_row() {
    let dir = TempDir::new().unwrap();
    let f = write(dir.path(), "f.txt", FIXTURE);
    let r = report(&[
        "regr-test",
        "--matrix",
        s(&f),
        "--row",
        "0",
        "--samples",
        "100000",
        "--assert",
    ]);
    assert!(r["result"]["tv_distance"].as_f64().unwrap() < 0.02);
    assert!(
        r["result"]["max_queries_per_call"].as_u64().unwrap()
            <= r["result"]["query_budget"].as_u64().unwrap()
    );
    let targets: Vec<f64> = r["result"]["columns"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["target"].as_f64().unwrap())
        .collect();
    assert_eq!(targets, vec![1.0 / 6.0, 0.5, 1.0 / 3.0]);

    let r = report(&[
        "regr-test",
        "--matrix",
        s(&f),
        "--row",
        "1",
        "--lo",
        "2",
        "--hi",
        "3",
        "--samples",
        "50",
    ]);
    assert_eq!(r["result"]["tv_distance"], 0.0);
    assert_eq!(r["result"]["max_queries_per_call"], 1);
}

#[test]
fn regr_test_zero_mass_row() {
    let dir = TempDir::new().unwrap();
    let f = write(dir.path(), "f.txt", FIXTURE);
    let out = ipq(&[
        "regr-test",
        "--matrix",
        s(&f),
        "--row",
        "1",
        "--lo",
        "3",
        "--hi",
        "4",
        "--samples",
        "5",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("zero mass"));
}

#[test]
fn json_out_writes_file() {
    let dir = TempDir::new().unwrap();
    let f = write(dir.path(), "f.txt", FIXTURE);
    let out_path = dir.path().join("r.json");
    let out = ipq(&["verify", "--matrix", s(&f), "--json-out", s(&out_path)]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let r: Value = serde_json::from_str(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    assert_eq!(r["result"]["exact"], 29);
}

#[test]
fn bad_inputs_are_reported() {
    let dir = TempDir::new().unwrap();
    let bad = write(dir.path(), "bad.txt", "dense 2 3\n1 4\n0 0\n");
    let out = ipq(&["verify", "--matrix", s(&bad)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));

    let f = write(dir.path(), "f.txt", FIXTURE);
    let out = ipq(&["estimate", "--matrix", s(&f), "--epsilon", "1.5"]);
    assert_eq!(out.status.code(), Some(1));

    let out = Command::new(env!("CARGO_BIN_EXE_ipq"))
        .args(["estimate", "--matrix", s(&f), "--epsilon", "0.25"])
        .env("IPQ_CK", "-1")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("IPQ_CK"));

    let out = ipq(&["verify", "--matrix", s(&dir.path().join("missing.txt"))]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn sample_constant_override_changes_attempt_budget() {
    let dir = TempDir::new().unwrap();
    let f = write(dir.path(), "f.txt", FIXTURE);
    let base = report(&[
        "sample",
        "--matrix",
        s(&f),
        "--epsilon",
        "0.25",
        "--samples",
        "10",
    ]);
    let out = Command::new(env!("CARGO_BIN_EXE_ipq"))
        .args([
            "sample",
            "--matrix",
            s(&f),
            "--epsilon",
            "0.25",
            "--samples",
            "10",
        ])
        .env("IPQ_CGAMMA", "8")
        .output()
        .unwrap();
    let r: Value = serde_json::from_slice(&out.stdout).unwrap();
    let (a, b) = (
        base["result"]["attempts_per_sample"].as_u64().unwrap(),
        r["result"]["attempts_per_sample"].as_u64().unwrap(),
    );
    assert!(b > a && b <= 2 * a + 1, "{a} -> {b}");
}
