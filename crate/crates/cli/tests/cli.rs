use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn oprisk(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_oprisk"))
        .args(args)
        .env_remove("OPRISK_WORKERS")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = oprisk(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(String::from).collect())
        .collect();
    (header, rows)
}

#[test]
fn phase_diagram_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("phase.csv");
    let res = ok(&["phase-diagram", "--rho-min", "1.5", "--rho-max", "4", "--steps", "251", "-o", path_str(&out)]);
    assert!(String::from_utf8_lossy(&res.stdout).contains("251 rows"));
    let (header, rows) = read_csv(&out);
    assert_eq!(header, ["rho", "lambda_A", "lambda_C", "lambda_B", "lambda_D"]);
    assert_eq!(rows.len(), 251);
    let nearest = rows
        .iter()
        .min_by(|a, b| {
            let da = (a[0].parse::<f64>().unwrap() - 2.0).abs();
            let db = (b[0].parse::<f64>().unwrap() - 2.0).abs();
            da.total_cmp(&db)
        })
        .unwrap();
    assert_eq!(nearest, &["2", "1", "2", "4", "4"]);
}

#[test]
fn printed_forms_flag_changes_curves_away_from_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("phase.csv");
    ok(&["phase-diagram", "--rho-min", "2", "--rho-max", "3", "--steps", "2", "--exponent-printed-forms", "-o", path_str(&out)]);
    let (_, rows) = read_csv(&out);
    assert_eq!(rows[0], ["2", "1", "2", "4", "4"]);
    assert_eq!(rows[1], ["3", "0.5", "1", "1.5", "2.25"]);
}

#[test]
fn fluctuations_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let common = ["fluctuations", "--rho", "2", "--lambda", "2", "--family", "gaussian", "--n-list", "16,64", "--reps", "2000", "--seed", "7"];
    let mut args_a = common.to_vec();
    args_a.extend(["--workers", "1", "-o", path_str(&a)]);
    let mut args_b = common.to_vec();
    args_b.extend(["--workers", "3", "-o", path_str(&b)]);
    let res = ok(&args_a);
    assert!(String::from_utf8_lossy(&res.stdout).contains("seed 7"));
    ok(&args_b);
    let bytes_a = std::fs::read(&a).unwrap();
    assert_eq!(bytes_a, std::fs::read(&b).unwrap());
    let (header, rows) = read_csv(&a);
    assert_eq!(header, ["N", "eps_var_mc", "eps_var_analytic", "ks_stable", "ks_normal", "gamma_fit", "delta_fit"]);
    assert_eq!(rows.len(), 2);
}

#[test]
fn workers_fall_back_to_environment() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let args = ["correlation", "--n-list", "4,8", "--reps", "500", "--seed", "3"];
    let mut args_a = args.to_vec();
    args_a.extend(["-o", path_str(&a)]);
    let out = Command::new(env!("CARGO_BIN_EXE_oprisk"))
        .args(&args_a)
        .env("OPRISK_WORKERS", "2")
        .output()
        .unwrap();
    assert!(out.status.success());
    let mut args_b = args.to_vec();
    args_b.extend(["--workers", "1", "-o", path_str(&b)]);
    ok(&args_b);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let bad = Command::new(env!("CARGO_BIN_EXE_oprisk"))
        .args(["correlation", "--n-list", "4", "--reps", "500"])
        .env("OPRISK_WORKERS", "many")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn simulate_pins_the_mean() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sim.csv");
    ok(&["simulate", "--schedule", "exact-lognormal", "--a", "1", "--b", "1", "--n", "1", "--reps", "100000", "-o", path_str(&out)]);
    let (header, rows) = read_csv(&out);
    let col = |name: &str| header.iter().position(|h| h == name).unwrap();
    let mean: f64 = rows[0][col("mean")].parse().unwrap();
    let se: f64 = rows[0][col("mean_se")].parse().unwrap();
    assert!((mean - 1.0).abs() < 3.0 * se, "{mean} +/- {se}");
    assert!(header.contains(&"q0.99".to_string()));
}

#[test]
fn schedule_table_matches_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("schedule.csv");
    ok(&["schedule", "--schedule", "asymptotic", "--lambda", "2", "--n-list", "2,1024", "--c0", "1", "-o", path_str(&out)]);
    let (header, rows) = read_csv(&out);
    assert_eq!(header, ["N", "mu_N", "t_N", "rho_N"]);
    let n: f64 = 1024.0;
    let mu: f64 = rows[1][1].parse().unwrap();
    let t: f64 = rows[1][2].parse().unwrap();
    let rho: f64 = rows[1][3].parse().unwrap();
    assert!((mu + 1.5 * n.ln()).abs() < 1e-12);
    assert!((t - n.ln().sqrt()).abs() < 1e-12);
    assert!((rho - 1.0 / n.ln()).abs() < 1e-15);
}

#[test]
fn json_output_reproduces_from_embedded_config() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first.json");
    let second = dir.path().join("second.json");
    ok(&["diversification", "--schedule", "exact-lognormal", "--n-list", "1,8,32", "--reps", "3000", "--q", "0.99", "--seed", "11", "-o", path_str(&first)]);
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(&first).unwrap()).unwrap();
    let keys: Vec<&str> = doc.as_object().unwrap().keys().map(String::as_str).collect();
    assert_eq!(keys, ["config", "rows", "seed", "version"]);
    assert_eq!(doc["seed"], 11);
    assert_eq!(doc["rows"][0]["dr_mc"], 1.0);
    ok(&["diversification", "--config", path_str(&first), "-o", path_str(&second)]);
    let again: Value = serde_json::from_str(&std::fs::read_to_string(&second).unwrap()).unwrap();
    assert_eq!(doc["rows"], again["rows"]);
    assert_eq!(doc["config"], again["config"]);
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"rho-min": 1.5, "rho-max": 4, "steps": 6}"#).unwrap();
    let out = dir.path().join("p.csv");
    ok(&["phase-diagram", "--config", path_str(&cfg), "--steps", "11", "-o", path_str(&out)]);
    let (_, rows) = read_csv(&out);
    assert_eq!(rows.len(), 11);
    assert_eq!(rows[0][0], "1.5");
}

#[test]
fn validation_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"rho-min": 1.5, "colour": "red"}"#).unwrap();
    let cases: Vec<Vec<&str>> = vec![
        vec!["phase-diagram", "--rho-min", "2", "--rho-max", "2", "--steps", "1"],
        vec!["phase-diagram", "--config", path_str(&cfg)],
        vec!["simulate", "--rho", "0.5", "--family", "weibull"],
        vec!["simulate", "--rho", "3", "--family", "gaussian"],
        vec!["simulate", "--schedule", "exact-lognormal", "--rho", "3"],
        vec!["simulate", "--reps", "10"],
        vec!["diversification", "--q", "0.4"],
        vec!["correlation", "--n-list", "1,4"],
        vec!["fluctuations", "--format", "xml"],
        vec!["teleport"],
    ];
    for args in cases {
        let out = oprisk(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn numerical_failure_exits_with_three() {
    let out = oprisk(&["simulate", "--schedule", "asymptotic", "--t-fixed", "400", "--n", "4", "--reps", "200"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn unwritable_output_exits_with_four() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("missing").join("phase.csv");
    let res = oprisk(&["phase-diagram", "-o", path_str(&out)]);
    assert_eq!(res.status.code(), Some(4));
}
