use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_solenoid-kms"))
        .args(args)
        .env_remove("SOLENOID_KMS_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn strip_times(mut v: Value) -> Value {
    for r in v.as_array_mut().unwrap() {
        r["wall_time_ms"] = Value::from(0);
    }
    v
}

#[test]
fn mr_arc_mass_at_two_ln_two() {
    let o = run(&["measure", "mr", "--r", "1.3862944", "--arc", "0,0.5"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).trim(), "0.6666667");
}

#[test]
fn mr_density_table_has_header() {
    let o = run(&["measure", "mr", "--r", "1", "--points", "4"]);
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "t,density");
    assert_eq!(lines.len(), 5);
}

#[test]
fn l1_curve_strictly_decreases() {
    let o = run(&["measure", "l1-curve", "--r", "1", "--n-max", "10"]);
    assert!(o.status.success());
    let values: Vec<f64> = stdout(&o)
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(values.len(), 10);
    assert!(values.windows(2).all(|w| w[1] < w[0]), "{values:?}");
}

#[test]
fn lebesgue_is_subinvariant_at_rate_zero() {
    let o = run(&["--json", "measure", "subinv", "--r", "0", "--measure", "lebesgue"]);
    assert!(o.status.success());
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v[0]["pass"], Value::Bool(true));
    assert_eq!(v[0]["max_residual"].as_f64(), Some(0.0));
}

#[test]
fn reversed_measure_fails_subinvariance() {
    let o = run(&["--json", "measure", "subinv", "--r", "1", "--measure", "reversed"]);
    assert_eq!(o.status.code(), Some(1));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v[0]["pass"], Value::Bool(false));
    assert!(!v[0]["witnesses"].as_array().unwrap().is_empty());
}

#[test]
fn decompose_and_probe_recover_extremes() {
    let o = run(&["measure", "decompose", "--r", "1", "--n", "2", "--measure", "mr@0.25"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("1,1.0000000"), "{text}");
    let o = run(&["measure", "probe", "--r", "1", "--n", "3", "--measure", "mr"]);
    assert_eq!(stdout(&o).trim(), "ForcedEqual");
}

#[test]
fn cycle_vectors_at_two_ln_two() {
    let o = run(&["cycle", "vectors", "--n", "1", "--r", "1.3862944"]);
    assert_eq!(stdout(&o), "0.6666667,0.3333333\n0.3333333,0.6666667\n");
}

#[test]
fn cycle_decompose_symmetric_vector() {
    let o = run(&["cycle", "decompose", "--n", "1", "--r", "1.3862944", "--x", "0.5,0.5"]);
    assert_eq!(stdout(&o).trim(), "0.5000000,0.5000000");
}

#[test]
fn cycle_decompose_reports_offending_index() {
    let o = run(&["cycle", "decompose", "--n", "1", "--r", "1.3862944", "--x", "0.9,0.1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("NotSubinvariant index 1"), "{}", stderr(&o));
}

#[test]
fn kms_eval_gap_complement() {
    let o = run(&[
        "kms",
        "eval",
        "--expr",
        "S^1 [] S*^1",
        "--level",
        "0",
        "--beta",
        "1",
        "--solenoid",
        "0,0,0",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o).trim(), "0.3678794");
}

#[test]
fn kms_eval_rejects_incompatible_solenoid() {
    let o = run(&["kms", "eval", "--expr", "[]", "--solenoid", "0.3,0.1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("inconsistent"));
}

#[test]
fn factor_test_distinguishes_beta_zero() {
    let o = run(&["kms", "factor-test", "--beta", "0", "--states", "3"]);
    assert_eq!(stdout(&o).lines().last(), Some("true"));
    let o = run(&["kms", "factor-test", "--beta", "1", "--states", "3"]);
    assert_eq!(stdout(&o).lines().last(), Some("false"));
}

#[test]
fn verify_campaign_passes() {
    let o = run(&[
        "--json",
        "kms",
        "verify",
        "--N",
        "2",
        "--theta0",
        "0.3333333",
        "--beta",
        "1",
        "--depth",
        "4",
        "--samples",
        "1000",
        "--seed",
        "42",
    ]);
    assert!(o.status.success(), "{}", stdout(&o));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    for r in v.as_array().unwrap() {
        assert_eq!(r["pass"], Value::Bool(true), "{r}");
        assert!(r["max_residual"].as_f64().unwrap() <= 1e-9);
        assert!(r["cases"].as_u64().unwrap() > 0);
    }
}

#[test]
fn negative_beta_is_a_failing_report() {
    let o = run(&["--json", "kms", "verify", "--beta", "-0.5", "--samples", "5"]);
    assert_eq!(o.status.code(), Some(1));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v[0]["pass"], Value::Bool(false));
    let witness = v[0]["witnesses"][0]["error"].as_str().unwrap();
    assert!(witness.contains("no KMS states"), "{witness}");
}

#[test]
fn trace0_passes() {
    let o = run(&["kms", "trace0", "--samples", "200"]);
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(stdout(&o).starts_with("PASS trace_beta_zero"));
}

#[test]
fn report_is_deterministic_and_writes_tables() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    let tables = dir.path().join("tables");
    let common = ["--samples", "100", "--states", "4", "--seed", "9"];
    let mut args = vec![
        "report",
        "--out",
        a.to_str().unwrap(),
        "--density-dir",
        tables.to_str().unwrap(),
    ];
    args.extend(common);
    let o = run(&args);
    assert!(o.status.success(), "{}", stdout(&o));
    let mut args = vec!["report", "--out", b.to_str().unwrap()];
    args.extend(common);
    assert!(run(&args).status.success());

    let ra: Value = serde_json::from_str(&std::fs::read_to_string(&a).unwrap()).unwrap();
    let rb: Value = serde_json::from_str(&std::fs::read_to_string(&b).unwrap()).unwrap();
    let names: Vec<&str> = ra
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["test"].as_str().unwrap())
        .collect();
    for expected in [
        "cycle_resolvent",
        "l1_final_value",
        "pushforward_identity",
        "omega_zero_singleton",
        "kms_identity",
    ] {
        assert!(names.contains(&expected), "{names:?}");
    }
    assert_eq!(strip_times(ra), strip_times(rb));

    let table = std::fs::read_to_string(tables.join("density_level_0.csv")).unwrap();
    let mut lines = table.lines();
    assert_eq!(lines.next(), Some("t,density"));
    assert_eq!(lines.count(), 512);
    assert!(tables.join("density_level_4.csv").exists());
}

#[test]
fn report_to_unwritable_path_names_it() {
    let o = run(&[
        "report",
        "--out",
        "/nonexistent-dir/r.json",
        "--samples",
        "5",
        "--states",
        "2",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("/nonexistent-dir/r.json"));
}

#[test]
fn config_file_and_env_seed() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cfg.json");
    std::fs::write(
        &path,
        r#"{"N": 3, "theta0": 0.123, "beta": 0.5, "samples": 30, "states": 3}"#,
    )
    .unwrap();
    let o = run(&["--json", "kms", "verify", "--config", path.to_str().unwrap()]);
    assert!(o.status.success());
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v[0]["parameters"]["N"], Value::from(3));
    assert_eq!(v[0]["parameters"]["seed"], Value::from(42));

    let o = Command::new(env!("CARGO_BIN_EXE_solenoid-kms"))
        .args([
            "--json",
            "kms",
            "verify",
            "--config",
            path.to_str().unwrap(),
            "--beta",
            "1",
        ])
        .env("SOLENOID_KMS_SEED", "1234")
        .output()
        .unwrap();
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v[0]["parameters"]["seed"], Value::from(1234));
    assert_eq!(v[0]["parameters"]["beta"], Value::from(1.0));
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(run(&["measure", "mr"]).status.code(), Some(2));
    assert_eq!(run(&["kms", "verify", "--samples", "0"]).status.code(), Some(2));
    let o = run(&["kms", "eval", "--expr", "S^1 [1:1,0"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("error:"));
}

#[test]
fn closed_stdout_is_not_a_crash() {
    use std::io::{BufRead, BufReader};
    use std::process::Stdio;
    let mut child = Command::new(env!("CARGO_BIN_EXE_solenoid-kms"))
        .args(["measure", "mr", "--r", "1", "--points", "200000"])
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut first = String::new();
    BufReader::new(child.stdout.take().unwrap())
        .read_line(&mut first)
        .unwrap();
    assert_eq!(first, "t,density\n");
    let o = child.wait_with_output().unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(!stderr(&o).contains("panicked"));
}
