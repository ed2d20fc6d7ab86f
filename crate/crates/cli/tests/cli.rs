use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn netwaves(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_netwaves"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_csv(path: &Path) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(path)
        .unwrap()
        .records()
        .map(|r| r.unwrap())
        .collect()
}

fn col(path: &Path, name: &str) -> usize {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.headers().unwrap().iter().position(|h| h == name).unwrap()
}

fn generate(out: &Path, seed: &str) -> Output {
    netwaves(&[
        "generate", "--out", out.to_str().unwrap(), "--seed", seed,
        "--n", "200", "--alpha", "1.5", "--beta", "0.4",
    ])
}

#[test]
fn generate_is_deterministic_with_exact_column_sums() {
    let dir = TempDir::new().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(code(&generate(&a, "11")), 0);
    assert_eq!(code(&generate(&b, "11")), 0);
    let ea = std::fs::read(a.join("network.csv")).unwrap();
    assert_eq!(ea, std::fs::read(b.join("network.csv")).unwrap());

    let mut sums = vec![0.0; 200];
    for rec in read_csv(&a.join("network.csv")) {
        let supplier: usize = rec[0].parse().unwrap();
        let buyer: usize = rec[1].parse().unwrap();
        assert_ne!(supplier, buyer);
        sums[buyer] += rec[2].parse::<f64>().unwrap();
    }
    for s in sums {
        assert!((s - 0.6).abs() < 1e-12, "column sum {s}");
    }
}

#[test]
fn rejects_alpha_at_most_one() {
    let dir = TempDir::new().unwrap();
    let o = netwaves(&[
        "generate", "--out", dir.path().to_str().unwrap(), "--seed", "1",
        "--n", "50", "--alpha", "0.9", "--beta", "0.4",
    ]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("alpha"), "{}", stderr(&o));
}

#[test]
fn stochastic_command_without_seed_fails() {
    let dir = TempDir::new().unwrap();
    let o = netwaves(&[
        "generate", "--out", dir.path().to_str().unwrap(),
        "--n", "50", "--alpha", "1.5", "--beta", "0.4",
    ]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("missing seed"));
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"network": {"n": 10, "alpah": 1.5}}"#).unwrap();
    let o = netwaves(&[
        "generate", "--config", cfg.to_str().unwrap(),
        "--out", dir.path().to_str().unwrap(), "--seed", "1",
    ]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("alpah"));
}

#[test]
fn tampered_trace_check_fails_with_exit_three() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().to_str().unwrap();
    let ok = netwaves(&["verify", "--out", out, "--criteria", "4"]);
    assert_eq!(code(&ok), 0, "{}", stderr(&ok));
    let bad = netwaves(&["verify", "--out", out, "--criteria", "4", "--tamper-lambda2", "1e-6"]);
    assert_eq!(code(&bad), 3);
    let rows = read_csv(&dir.path().join("verify.csv"));
    assert_eq!(rows.len(), 1);
    assert!(rows[0].iter().any(|f| f == "false"));
}

#[test]
fn zero_shocks_give_zero_risk() {
    let dir = TempDir::new().unwrap();
    let o = netwaves(&[
        "compare", "--out", dir.path().to_str().unwrap(), "--seed", "3",
        "--lambda2", "0.5", "--b", "1", "--T", "50", "--sigma", "0", "--reps", "3", "--c", "1",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let file = dir.path().join("compare.csv");
    for name in ["phi", "phi_star", "phi_hat", "phi_hat_star", "omega_hat_c", "omega_hat_c_star", "kappa"] {
        let k = col(&file, name);
        for rec in read_csv(&file) {
            assert_eq!(rec[k].parse::<f64>().unwrap(), 0.0, "{name}");
        }
    }
}

#[test]
fn shallow_economy_is_smoother_than_deep_one() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(code(&generate(dir.path(), "5")), 0);
    let edges = dir.path().join("network.csv");
    let o = netwaves(&[
        "compare", "--out", out, "--seed", "9", "--mode", "l-economy",
        "--edges", edges.to_str().unwrap(), "--L", "1,100",
        "--T", "100", "--sigma", "1", "--reps", "8", "--c", "1",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let file = dir.path().join("compare.csv");
    let (kr, kl, kv) = (col(&file, "rep"), col(&file, "L"), col(&file, "phi_hat"));
    let rows = read_csv(&file);
    let phi = |rep: &str, l: &str| -> f64 {
        rows.iter()
            .find(|r| &r[kr] == rep && &r[kl] == l)
            .map(|r| r[kv].parse().unwrap())
            .unwrap()
    };
    let wins = (0..8)
        .filter(|r| phi(&r.to_string(), "1") < phi(&r.to_string(), "100"))
        .count();
    assert!(wins >= 7, "L=1 smoother in only {wins}/8 replications");
}

#[test]
fn complex_lambda2_is_refused_for_two_mode() {
    let dir = TempDir::new().unwrap();
    let edges = dir.path().join("cycle.csv");
    std::fs::write(
        &edges,
        "supplier,buyer,weight\n0,1,0.9\n1,2,0.9\n2,0,0.9\n1,0,0.1\n2,1,0.1\n0,2,0.1\n",
    )
    .unwrap();
    let o = netwaves(&[
        "compare", "--out", dir.path().to_str().unwrap(), "--seed", "1",
        "--edges", edges.to_str().unwrap(), "--beta", "0.4", "--normalize",
        "--T", "20", "--sigma", "1", "--reps", "2", "--c", "1",
    ]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("l-economy"), "{}", stderr(&o));
}

#[test]
fn manifest_reproduces_outputs() {
    let dir = TempDir::new().unwrap();
    let first = dir.path().join("first");
    let o = netwaves(&[
        "simulate", "--out", first.to_str().unwrap(), "--seed", "21",
        "--n", "60", "--alpha", "2.5", "--beta", "0.5",
        "--kind", "micro", "--T", "40", "--sigma", "0.1",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let manifest: Value =
        serde_json::from_slice(&std::fs::read(first.join("simulate_manifest.json")).unwrap()).unwrap();

    let second = dir.path().join("second");
    let o = netwaves(&[
        "simulate", "--config", first.join("simulate_config.json").to_str().unwrap(),
        "--out", second.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let again: Value =
        serde_json::from_slice(&std::fs::read(second.join("simulate_manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["outputs"], again["outputs"]);
    assert!(!manifest["outputs"].as_array().unwrap().is_empty());

    let residual = col(&first.join("path.csv"), "recursion_residual");
    for rec in read_csv(&first.join("path.csv")) {
        assert!(rec[residual].parse::<f64>().unwrap().abs() <= 1e-8);
    }
}

#[test]
fn report_summarizes_tables() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = netwaves(&["calibrate", "--out", out, "--grid", "0.5,0.7"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = netwaves(&["report", "--out", out]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let md = std::fs::read_to_string(dir.path().join("report.md")).unwrap();
    assert!(md.contains("## Calibration"), "{md}");
    assert!(md.contains("0.16666666666666666"), "{md}");
}
