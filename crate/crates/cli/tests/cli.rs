use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn cascade(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cascade"))
        .args(args)
        .env_remove("CASCADE_SEED")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn scratch(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR"));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn bound_two_message_example() {
    let v = json(&cascade(&[
        "bound", "--n", "5", "--N", "2", "--R", "0.5", "--snr", "1", "--format", "json",
    ]));
    assert!((v["theorem1_bits"].as_f64().unwrap() - 0.4249).abs() < 1e-4);
    assert!((v["per_hop_factor"].as_f64().unwrap() - 0.8427007929497148).abs() < 1e-9);
}

#[test]
fn bound_zero_hops_is_message_bits() {
    let v = json(&cascade(&[
        "bound", "--n", "0", "--N", "4", "--R", "0.5", "--snr", "2", "--format", "json",
    ]));
    assert_eq!(v["theorem1_bits"].as_f64().unwrap(), 2.0);
}

#[test]
fn snr_db_matches_linear() {
    let a = cascade(&[
        "bound", "--n", "3", "--N", "2", "--R", "0.5", "--snr", "1", "--format", "json",
    ]);
    let b = cascade(&[
        "bound", "--n", "3", "--N", "2", "--R", "0.5", "--snr-db", "0", "--format", "json",
    ]);
    assert_eq!(json(&a), json(&b));
}

#[test]
fn bound_monte_carlo_uses_seed() {
    let args = [
        "bound",
        "--n",
        "2",
        "--N",
        "2",
        "--R",
        "0.5",
        "--snr",
        "1",
        "--method",
        "monte-carlo",
        "--samples",
        "100000",
        "--format",
        "json",
    ];
    let a = cascade(&args);
    let b = cascade(&args);
    assert_eq!(a.stdout, b.stdout);
    let v = json(&a);
    let se = v["per_hop_factor_stderr"].as_f64().unwrap();
    assert!(se > 0.0);
    assert!((v["per_hop_factor"].as_f64().unwrap() - 0.8427007929497148).abs() < 4.0 * se);
}

#[test]
fn invalid_flags_fail() {
    let out = cascade(&["bound", "--n", "1", "--N", "2", "--R", "0.3", "--snr", "1"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("N*R"));
    let out = cascade(&["bound", "--n", "1", "--N", "2", "--R", "0.5", "--snr", "-1"]);
    assert!(!out.status.success());
    assert!(!cascade(&["bound", "--n", "1", "--N", "2", "--R", "0.5"])
        .status
        .success());
}

#[test]
fn exponent_spot_value() {
    let v = json(&cascade(&[
        "exponents",
        "--rates",
        "1",
        "--snr-db",
        "6.020599913279624",
        "--format",
        "json",
    ]));
    let rows = v.as_array().unwrap();
    assert_eq!(rows.len(), 1);
    assert!((rows[0]["ratio"].as_f64().unwrap() - 0.7675).abs() < 1e-3);
}

#[test]
fn exponent_default_grid_to_file() {
    let path = scratch("exponents.csv");
    let out = cascade(&["exponents", "--out", path.to_str().unwrap()]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "R,S_dB,E_as_nats,E_nats,ratio");
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 5 * 41);
    assert!(rows.iter().all(|r| r[4] < 1.0));
    let manifest: Value = serde_json::from_str(
        &std::fs::read_to_string(scratch("exponents.csv.manifest.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(manifest["command"], "exponents");
}

#[test]
fn simulate_bsc_cascade_has_slack() {
    let v = json(&cascade(&[
        "simulate", "--n", "5", "--shots", "100000", "--seed", "9", "--format", "json",
    ]));
    assert!(v["slack"].as_f64().unwrap() > 0.0);
    assert_eq!(v["bound_holds"], true);
    assert!((v["mi_matrix_bits"].as_f64().unwrap() - 0.1344).abs() < 0.01);
}

#[test]
fn simulate_near_noiseless() {
    let v = json(&cascade(&[
        "simulate", "--n", "3", "--sigma", "0.001", "--shots", "2000", "--format", "json",
    ]));
    assert!((v["mi_matrix_bits"].as_f64().unwrap() - 1.0).abs() < 1e-9);
}

#[test]
fn simulate_is_deterministic_across_threads() {
    let a = scratch("sim_a.json");
    let b = scratch("sim_b.json");
    let base = [
        "simulate",
        "--n",
        "2",
        "--N",
        "4",
        "--R",
        "0.5",
        "--code",
        "random-sphere",
        "--shots",
        "20000",
        "--seed",
        "4",
    ];
    let mut args_a = base.to_vec();
    args_a.extend(["--threads", "1", "--out", a.to_str().unwrap()]);
    let mut args_b = base.to_vec();
    args_b.extend(["--threads", "4", "--out", b.to_str().unwrap()]);
    assert!(cascade(&args_a).status.success());
    assert!(cascade(&args_b).status.success());
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert!(scratch("sim_a.json.manifest.json").exists());
}

#[test]
fn simulate_from_config_and_env_seed() {
    let cfg = scratch("cascade.json");
    std::fs::write(
        &cfg,
        r#"{"hops":2,"block_length":2,"rate":0.5,"power":1.0,"sigmas":[1.0,1.2],"code_kind":"antipodal",
            "decoder":"max_likelihood","shots_per_message":5000,"seed":1}"#,
    )
    .unwrap();
    let v = json(&cascade(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--format",
        "json",
    ]));
    assert_eq!(v["config"]["seed"], 1);
    assert_eq!(v["config"]["sigmas"].as_array().unwrap().len(), 2);

    let out = Command::new(env!("CARGO_BIN_EXE_cascade"))
        .args([
            "simulate",
            "--config",
            cfg.to_str().unwrap(),
            "--format",
            "json",
        ])
        .env("CASCADE_SEED", "77")
        .output()
        .unwrap();
    assert_eq!(json(&out)["config"]["seed"], 77);
}

#[test]
fn simulate_rejects_bad_configs() {
    let cfg = scratch("broken.json");
    std::fs::write(&cfg, "{not json").unwrap();
    assert!(!cascade(&["simulate", "--config", cfg.to_str().unwrap()])
        .status
        .success());
    let out = cascade(&["simulate", "--n", "10", "--shots", "100000000000"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("budget"));
}

#[test]
fn verify_suites() {
    let out = cascade(&["verify", "matrix"]);
    assert!(out.status.success());
    let lines: Vec<Value> = String::from_utf8(out.stdout)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 3);
    assert!(lines
        .iter()
        .all(|l| l["pass"] == true && l["suite"] == "matrix"));
    let out = cascade(&["verify", "qfunc", "--samples", "20000"]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stdout)
    );
    assert!(!cascade(&["verify", "everything"]).status.success());
}

#[test]
fn table_and_csv_formats() {
    let out = cascade(&[
        "bound", "--n", "1", "--N", "2", "--R", "0.5", "--snr", "1", "--format", "table",
    ]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().any(|l| l.starts_with("theorem1_bits")));
    let out = cascade(&[
        "bound", "--n", "1", "--N", "2", "--R", "0.5", "--snr", "1", "--format", "csv",
    ]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 2);
    assert!(text.starts_with("query.hops,"));
}
