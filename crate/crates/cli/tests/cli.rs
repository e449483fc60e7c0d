use std::process::{Command, Output};

use serde_json::Value;

const POISSON: &str = r#"{"alpha":1,"lambdas":[1]}"#;

fn gfcp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gfcp")).args(args).output().expect("run gfcp")
}

fn stdout(args: &[&str]) -> String {
    let out = gfcp(args);
    assert!(out.status.success(), "gfcp {args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn json(args: &[&str]) -> Value {
    let mut a = args.to_vec();
    a.extend(["--format", "json"]);
    serde_json::from_str(&stdout(&a)).expect("valid JSON")
}

fn code(args: &[&str]) -> i32 {
    gfcp(args).status.code().expect("exit code")
}

fn csv_rows(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    (header, rows)
}

#[test]
fn poisson_pmf_column() {
    let text = stdout(&["pmf", "--params", POISSON, "--n", "0..12", "--t", "2.5"]);
    let (header, rows) = csv_rows(&text);
    assert_eq!(header, ["n", "t", "value"]);
    assert_eq!(rows.len(), 13);
    let mut want = (-2.5f64).exp();
    for (n, row) in rows.iter().enumerate() {
        assert_eq!(row[0], n.to_string());
        let got: f64 = row[2].parse().unwrap();
        assert!((got - want).abs() < 1e-15 * want.max(1e-300) * 10.0, "n = {n}: {got} vs {want}");
        want *= 2.5 / (n as f64 + 1.0);
    }
}

#[test]
fn csv_header_lines() {
    let text = stdout(&["pmf", "--params", POISSON, "--t", "1", "--seed", "7"]);
    let comments: Vec<&str> = text.lines().take_while(|l| l.starts_with('#')).collect();
    let keys: Vec<&str> = comments.iter().map(|l| l[2..].split(':').next().unwrap()).collect();
    assert_eq!(keys, ["tool", "command", "seed", "config", "params", "params_sha256"]);
    assert!(comments.contains(&"# command: pmf"));
    assert!(comments.contains(&"# seed: 7"));
}

#[test]
fn json_document_shape() {
    let v = json(&["moments", "--params", r#"{"alpha":0.5,"lambdas":[1]}"#, "--t", "1,4"]);
    assert_eq!(v["meta"]["command"], "moments");
    assert_eq!(v["columns"][1], "mean");
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    // mean S tᵅ with S = 1/Γ(3/2)
    let s = 2.0 / std::f64::consts::PI.sqrt();
    assert!((rows[1][1].as_f64().unwrap() - 2.0 * s).abs() < 1e-14);
    assert_eq!(v["meta"]["params_sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn ruin_summary() {
    let v = json(&["ruin", "--params", r#"{"alpha":1,"lambdas":[1,1]}"#, "--c", "6", "--mu", "1", "--paths", "4000"]);
    assert_eq!(v["psi0_exact"].as_f64().unwrap(), 0.5);
    assert_eq!(v["eta"].as_f64().unwrap(), 1.0);
    let mc = v["psi0_mc"].as_f64().unwrap();
    let se = v["se"].as_f64().unwrap();
    assert!((mc - 0.5).abs() < 4.0 * se + 0.01, "{mc} ± {se}");
    let table = v["G0y_table"].as_array().unwrap();
    assert_eq!(table.len(), 3);
    for row in table {
        assert!(row[1].as_f64().is_some());
    }
    // no analytic deficit law with positive capital
    let v = json(&["ruin", "--params", r#"{"alpha":1,"lambdas":[1,1]}"#, "--c", "6", "--mu", "1", "--u", "1", "--paths", "1000"]);
    assert!(v["psi0_exact"].is_null());
    assert!(v["G0y_table"][0][1].is_null());
    // ψ(0) needs only the claim mean
    let v = json(&["ruin", "--params", r#"{"alpha":1,"lambdas":[1]}"#, "--c", "4", "--claims", "empirical", "--claim-values", "1,2,3", "--paths", "1000"]);
    assert_eq!(v["psi0_exact"].as_f64().unwrap(), 0.5);
    assert!(v["G0y_table"][0][1].is_null());
}

#[test]
fn params_file_matches_inline() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("params.json");
    std::fs::write(&path, r#"{"alpha": 0.7, "special_case": {"tag": "PPoK", "k": 2, "lambda": 0.5}}"#).unwrap();
    let from_file = json(&["pmf", "--params", path.to_str().unwrap(), "--t", "1"]);
    let inline = json(&["pmf", "--params", r#"{"alpha":0.7,"lambdas":[0.5,0.5]}"#, "--t", "1"]);
    assert_eq!(from_file["meta"]["params_sha256"], inline["meta"]["params_sha256"]);
    assert_eq!(from_file["rows"], inline["rows"]);
}

#[test]
fn out_flag_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("pmf.csv");
    let args = ["pmf", "--params", POISSON, "--t", "1"];
    let printed = stdout(&args);
    let mut with_out = args.to_vec();
    with_out.extend(["--out", path.to_str().unwrap()]);
    assert!(stdout(&with_out).is_empty());
    assert_eq!(std::fs::read_to_string(&path).unwrap(), printed);
}

#[test]
fn sampling_is_reproducible() {
    let base = ["sample", "--params", r#"{"alpha":0.6,"lambdas":[1,1]}"#, "--t", "1,2", "--paths", "50"];
    let run = |seed: &str, threads: &str| {
        let mut a = base.to_vec();
        a.extend(["--seed", seed, "--threads", threads]);
        stdout(&a)
    };
    assert_eq!(run("3", "1"), run("3", "4"));
    assert_ne!(run("3", "1"), run("4", "1"));
}

#[test]
fn event_output() {
    let text = stdout(&["sample", "--params", r#"{"alpha":1,"lambdas":[1,0.5]}"#, "--events", "--horizon", "5", "--paths", "3"]);
    let (header, rows) = csv_rows(&text);
    assert_eq!(header, ["path", "time", "jump", "cumulative"]);
    let mut last: Option<(String, u64)> = None;
    for r in &rows {
        let (path, jump, cum): (String, u64, u64) = (r[0].clone(), r[2].parse().unwrap(), r[3].parse().unwrap());
        let prev = match &last {
            Some((p, c)) if *p == path => *c,
            _ => 0,
        };
        assert_eq!(cum, prev + jump);
        last = Some((path, cum));
    }
}

#[test]
fn exit_codes() {
    assert_eq!(code(&["--help"]), 0);
    assert_eq!(code(&[]), 64);
    assert_eq!(code(&["pmf", "--bogus"]), 64);
    assert_eq!(code(&["pmf", "--params", POISSON]), 64);
    assert_eq!(code(&["pmf", "--params", POISSON, "--t", "1", "--threads", "0"]), 64);
    assert_eq!(code(&["pmf", "--params", r#"{"alpha":1.5,"lambdas":[1]}"#, "--t", "1"]), 1);
    assert_eq!(code(&["pmf", "--params", "/nonexistent/params.json", "--t", "1"]), 1);
    assert_eq!(code(&["pmf", "--params", POISSON, "--t", "1", "--n", "70"]), 1);
    assert_eq!(code(&["ruin", "--params", r#"{"alpha":0.5,"lambdas":[1]}"#, "--c", "2", "--mu", "1"]), 1);
    // alternating series beyond recovery, and no integral form for fractional δ
    assert_eq!(code(&["ml", "--beta", "0.5", "--gamma", "2", "--delta", "1.5", "--x", "-10"]), 2);
    assert_eq!(code(&["selftest", "--only", "1"]), 0);
}

#[test]
fn mittag_leffler_values() {
    let v = json(&["ml", "--beta", "1", "--x", "-1,0,1"]);
    let rows = v["rows"].as_array().unwrap();
    for (row, x) in rows.iter().zip([-1.0f64, 0.0, 1.0]) {
        let value = row.as_array().unwrap().iter().rev().find_map(Value::as_f64).unwrap();
        // the series stops at the default relative tolerance 1e-12
        assert!((value - x.exp()).abs() < 1e-12 * x.exp(), "x = {x}: {row}");
    }
}
