use serde_json::Value;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn rwrs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rwrs"))
        .args(args)
        .env("RWRS_WORKERS", "2")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("rwrs-cli-{}-{name}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

#[test]
fn exponent_prints_region_and_zeta() {
    let out = rwrs(&["exponent", "--alpha", "4", "--beta", "1.1", "--d", "5"]);
    assert!(out.status.success());
    let v = json(&out);
    assert_eq!(v["region"], "IV");
    assert!((v["zeta"].as_f64().unwrap() - 29.0 / 35.0).abs() < 1e-12);
    assert_eq!(v["needs_y0"], false);
    assert!(v["formula"].is_string());
}

#[test]
fn simulate_reports_the_silt_identity() {
    let out = rwrs(&["simulate", "--d", "3", "--n", "512", "--seed", "9", "--dyadic-b", "0.3", "--family", "gaussian"]);
    assert!(out.status.success());
    let v = json(&out);
    let silt = v["silt"].as_u64().unwrap();
    let pairs = v["coincidence_pairs"].as_u64().unwrap();
    assert_eq!(silt, 513 + 2 * pairs);
    assert_eq!(v["dyadic"]["inequality"], true);
    assert!(v["x_n"].is_f64());
}

#[test]
fn estimate_exact_and_monte_carlo() {
    let out = rwrs(&["estimate", "--event", "confinement", "--method", "exact-spectral", "--d", "1", "--n", "4", "--r", "3"]);
    assert!(out.status.success());
    assert!((json(&out)["p_hat"].as_f64().unwrap() - 0.25).abs() < 1e-12);

    let out = rwrs(&["estimate", "--event", "silt", "--d", "5", "--n", "1", "--y", "2", "--replicas", "10"]);
    let v = json(&out);
    assert_eq!(v["p_hat"], 1.0);
    assert_eq!(v["method"], "naive");
}

#[test]
fn input_errors_exit_with_two() {
    let out = rwrs(&["estimate", "--event", "rwrs", "--d", "5", "--n", "10", "--y", "1"]);
    assert_eq!(out.status.code(), Some(2));
    let out = rwrs(&["estimate", "--event", "confinement", "--method", "splitting", "--d", "5", "--n", "10"]);
    assert_eq!(out.status.code(), Some(2));
    let out = rwrs(&["verify", "no-such-suite"]);
    assert_eq!(out.status.code(), Some(2));
    let out = Command::new(env!("CARGO_BIN_EXE_rwrs"))
        .args(["exponent", "--alpha", "2", "--beta", "1", "--d", "5"])
        .env("RWRS_WORKERS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn green_constants() {
    let out = rwrs(&["green", "--d", "5", "--radius", "4"]);
    assert!(out.status.success());
    let v = json(&out);
    let g0 = v["g0"].as_f64().unwrap();
    assert!((v["return_prob"].as_f64().unwrap() - (1.0 - 1.0 / g0)).abs() < 1e-12);
    assert_eq!(rwrs(&["green", "--d", "3"]).status.code(), Some(2));
}

#[test]
fn verify_passes_and_canary_fails() {
    let out = rwrs(&["verify", "identities", "--seed", "5"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["passed"], true);
    assert_eq!(v["suite"], "identities");

    let out = rwrs(&["verify", "canary"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json(&out)["passed"], false);

    assert!(rwrs(&["verify", "exponent-map"]).status.success());
}

#[test]
fn run_writes_identical_tables_to_new_files() {
    let dir = scratch("run");
    let cfg = configs().join("exponent_map.toml");
    let a = rwrs(&["run", cfg.to_str().unwrap(), "--out", dir.to_str().unwrap()]);
    let b = rwrs(&["run", cfg.to_str().unwrap(), "--out", dir.to_str().unwrap()]);
    assert!(a.status.success() && b.status.success());
    let (a, b) = (json(&a), json(&b));
    let csv_a = std::fs::read_to_string(a["csv"].as_str().unwrap()).unwrap();
    let csv_b = std::fs::read_to_string(b["csv"].as_str().unwrap()).unwrap();
    assert_ne!(a["csv"], b["csv"]);
    assert_eq!(csv_a, csv_b);
    assert!(csv_a.contains(",III,"));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn run_tail_config_with_fit() {
    let dir = scratch("tail");
    let cfg = dir.join("small.toml");
    std::fs::write(
        &cfg,
        "kind = \"tail\"\nseed = 4\n[grid]\nd = 5\nn = [64, 128, 256, 512]\ny = [1.2]\ny_unit = \"y0-silt\"\nreplicas = 2000\n\
         [event]\nkind = \"silt\"\n[method]\nkind = \"return-chain\"\n[fit]\ntransform = \"log-vs-sqrt-n\"\n",
    )
    .unwrap();
    let out = rwrs(&["run", cfg.to_str().unwrap(), "--out", dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    let csv = std::fs::read_to_string(v["csv"].as_str().unwrap()).unwrap();
    assert!(csv.starts_with("n,y,p_hat,std_err,log_p,method,seed\n"));
    assert_eq!(csv.lines().count(), 5);
    assert!(csv.contains("strategy-lower-bound"));
    assert!(v["fits"][0]["fit"]["slope"].as_f64().unwrap() < 0.0);
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn bad_configs_exit_with_two() {
    let dir = scratch("bad");
    let cfg = dir.join("bad.toml");
    std::fs::write(&cfg, "kind = \"tail\"\nseed = 1\n[grid]\nd = 5\nn = []\ny = [1.0]\n[event]\nkind = \"silt\"\n[method]\nkind = \"naive\"\n").unwrap();
    let out = rwrs(&["run", cfg.to_str().unwrap(), "--out", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("grid.n"));
    let out = rwrs(&["run", dir.join("missing.toml").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn shipped_configs_parse() {
    let mut seen = 0;
    for entry in std::fs::read_dir(configs()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            rwrs_core::experiments::ExperimentConfig::from_path(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            seen += 1;
        }
    }
    assert!(seen >= 4);
}
