use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

fn cvtele(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cvtele"))
        .args(args)
        .current_dir(dir)
        .env_remove("CVTELE_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, value: &Value) -> String {
    let path = dir.join(name);
    fs::write(&path, serde_json::to_string_pretty(value).unwrap()).unwrap();
    path.to_str().unwrap().to_string()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn coherent(r: f64, cutoff: usize) -> Value {
    json!({ "protocol": { "r": r, "cutoff": cutoff, "input": { "kind": "coherent", "beta": [0.5, 0.0] } } })
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    let header = rdr.headers().unwrap().iter().map(String::from).collect();
    let rows = rdr
        .records()
        .map(|r| r.unwrap().iter().map(String::from).collect())
        .collect();
    (header, rows)
}

#[test]
fn teleport_payload_is_byte_reproducible() {
    let tmp = TempDir::new().unwrap();
    let mut cfg = coherent(0.8, 30);
    cfg["outcome"] = json!("sampled");
    cfg["protocol"]["seed"] = json!(7);
    cfg["protocol"]["grid"] = json!({ "half_width": 8.0, "n_points": 61, "adaptive": true });
    let c = write_config(tmp.path(), "run.json", &cfg);
    for (out, format) in [("a", "json"), ("b", "json"), ("c", "csv"), ("d", "csv")] {
        let o = cvtele(tmp.path(), &["teleport", "--config", &c, "--out", out, "--format", format]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let read = |p: &str| fs::read(tmp.path().join(p)).unwrap();
    assert_eq!(read("a/teleport.json"), read("b/teleport.json"));
    assert_eq!(read("c/teleport.csv"), read("d/teleport.csv"));
    let echo = |p: &str| {
        let mut v: Value = serde_json::from_slice(&read(p)).unwrap();
        v["output"]["dir"] = Value::Null;
        v
    };
    assert_eq!(echo("a/teleport.config.json"), echo("b/teleport.config.json"));

    let payload: Value = serde_json::from_slice(&read("a/teleport.json")).unwrap();
    assert_eq!(payload["bob_post"]["kind"], "vector");
    assert!(payload.get("timestamp").is_none());
    let meta: Value = serde_json::from_slice(&read("a/teleport.meta.json")).unwrap();
    assert!(meta["timestamp"].is_string());
    assert_eq!(meta["seed"], 7);

    let (header, rows) = read_csv(&tmp.path().join("c/teleport.csv"));
    assert_eq!(
        header,
        ["chi_plus", "chi_minus", "alpha_re", "alpha_im", "density_weight", "fidelity_post", "truncation_budget"]
    );
    assert_eq!(rows.len(), 1);
}

#[test]
fn tail_violation_exits_3_and_names_required_cutoff() {
    let tmp = TempDir::new().unwrap();
    let c = write_config(tmp.path(), "run.json", &coherent(1.5, 40));
    let o = cvtele(tmp.path(), &["teleport", "--config", &c, "--out", "o"]);
    assert_eq!(o.status.code(), Some(3));
    let msg = stderr(&o);
    assert!(msg.contains("N >= 92"), "{msg}");
    assert!(!tmp.path().join("o/teleport.csv").exists());
}

#[test]
fn flag_overrides_file_in_resolved_echo() {
    let tmp = TempDir::new().unwrap();
    let c = write_config(tmp.path(), "run.json", &coherent(0.5, 40));
    let o = cvtele(tmp.path(), &["teleport", "--config", &c, "--r=1", "--seed", "11", "--out", "o"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let echo: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(echo["protocol"]["r"], 1.0);
    assert_eq!(echo["protocol"]["seed"], 11);
    // Defaults are written out explicitly.
    assert_eq!(echo["protocol"]["gain"], 1.0);
    assert_eq!(echo["protocol"]["max_truncation"], 1e-8);
    assert_eq!(echo["output"]["dir"], "o");
    let saved: Value = serde_json::from_slice(&fs::read(tmp.path().join("o/teleport.config.json")).unwrap()).unwrap();
    assert_eq!(saved, echo);
}

#[test]
fn echo_alone_reproduces_the_run() {
    let tmp = TempDir::new().unwrap();
    let mut cfg = coherent(0.6, 30);
    cfg["outcome"] = json!("sampled");
    cfg["protocol"]["grid"] = json!({ "half_width": 8.0, "n_points": 61, "adaptive": true });
    let c = write_config(tmp.path(), "run.json", &cfg);
    let first = cvtele(tmp.path(), &["teleport", "--config", &c, "--seed", "3", "--out", "x"]);
    assert!(first.status.success());
    let mut echo: Value = serde_json::from_slice(&first.stdout).unwrap();
    echo["output"]["dir"] = json!("y");
    let e = write_config(tmp.path(), "echo.json", &echo);
    let second = cvtele(tmp.path(), &["teleport", "--config", &e]);
    assert!(second.status.success(), "{}", stderr(&second));
    let read = |p: &str| fs::read(tmp.path().join(p)).unwrap();
    assert_eq!(read("x/teleport.csv"), read("y/teleport.csv"));
}

#[test]
fn unknown_keys_and_bad_values_exit_2() {
    let tmp = TempDir::new().unwrap();
    let mut cfg = coherent(0.5, 20);
    cfg["protocol"]["squeezing"] = json!(1.0);
    let c = write_config(tmp.path(), "bad.json", &cfg);
    let o = cvtele(tmp.path(), &["teleport", "--config", &c]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("squeezing"));

    let mut cfg = coherent(0.5, 20);
    cfg["extra"] = json!(true);
    let c = write_config(tmp.path(), "bad2.json", &cfg);
    assert_eq!(cvtele(tmp.path(), &["teleport", "--config", &c]).status.code(), Some(2));

    let c = write_config(tmp.path(), "ok.json", &coherent(0.5, 20));
    let o = cvtele(tmp.path(), &["teleport", "--config", &c, "--gain", "3"]);
    assert_eq!(o.status.code(), Some(2));
    let o = cvtele(tmp.path(), &["teleport", "--config", "missing.json"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn output_dir_precedence() {
    let tmp = TempDir::new().unwrap();
    let c = write_config(tmp.path(), "run.json", &coherent(0.3, 20));
    let env_dir = tmp.path().join("from_env");
    let run = |extra: &[&str]| {
        Command::new(env!("CARGO_BIN_EXE_cvtele"))
            .args(["teleport", "--config", &c])
            .args(extra)
            .current_dir(tmp.path())
            .env("CVTELE_OUT_DIR", &env_dir)
            .output()
            .unwrap()
    };
    assert!(run(&[]).status.success());
    assert!(env_dir.join("teleport.csv").exists());
    assert!(run(&["--out", "from_flag"]).status.success());
    assert!(tmp.path().join("from_flag/teleport.csv").exists());

    let mut cfg = coherent(0.3, 20);
    cfg["output"] = json!({ "dir": "from_file" });
    let c2 = write_config(tmp.path(), "run2.json", &cfg);
    let o = Command::new(env!("CARGO_BIN_EXE_cvtele"))
        .args(["teleport", "--config", &c2])
        .current_dir(tmp.path())
        .env("CVTELE_OUT_DIR", &env_dir)
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(tmp.path().join("from_file/teleport.csv").exists());
}

#[test]
fn sweep_oracle_column_for_coherent_input() {
    let tmp = TempDir::new().unwrap();
    let c = write_config(tmp.path(), "run.json", &coherent(0.0, 40));
    let o = cvtele(tmp.path(), &["fidelity-sweep", "--config", &c, "--r-list", "0,1", "--out", "o"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (header, rows) = read_csv(&tmp.path().join("o/fidelity_sweep.csv"));
    assert_eq!(header, ["r", "mean_fidelity", "stderr", "oracle_value", "truncation_budget"]);
    assert_eq!(rows.len(), 2);
    let num = |s: &str| s.parse::<f64>().unwrap();
    assert!((num(&rows[0][3]) - 0.5).abs() <= 1e-6);
    assert!((num(&rows[1][3]) - 0.880797).abs() <= 1e-6);
    for row in &rows {
        assert!((num(&row[1]) - num(&row[3])).abs() <= 1e-6);
    }
}

#[test]
fn sweep_oracle_column_empty_for_fock_input() {
    let tmp = TempDir::new().unwrap();
    let cfg = json!({
        "protocol": { "r": 0.5, "cutoff": 30, "input": { "kind": "fock", "n": 1 } },
        "sweep": { "parameter": "r", "values": [0.5] }
    });
    let c = write_config(tmp.path(), "run.json", &cfg);
    let o = cvtele(tmp.path(), &["fidelity-sweep", "--config", &c, "--out", "o"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (_, rows) = read_csv(&tmp.path().join("o/fidelity_sweep.csv"));
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][3], "");
    let f: f64 = rows[0][1].parse().unwrap();
    assert!(f > 0.0 && f < 1.0);
}

#[test]
fn empty_r_list_writes_header_only() {
    let tmp = TempDir::new().unwrap();
    let c = write_config(tmp.path(), "run.json", &coherent(0.5, 20));
    let o = cvtele(tmp.path(), &["fidelity-sweep", "--config", &c, "--r-list", "", "--out", "o"]);
    assert_eq!(o.status.code(), Some(0));
    let text = fs::read_to_string(tmp.path().join("o/fidelity_sweep.csv")).unwrap();
    assert_eq!(text, "r,mean_fidelity,stderr,oracle_value,truncation_budget\n");
}

#[test]
fn sweep_point_failure_exits_3() {
    let tmp = TempDir::new().unwrap();
    let c = write_config(tmp.path(), "run.json", &coherent(0.5, 20));
    let o = cvtele(tmp.path(), &["fidelity-sweep", "--config", &c, "--r-list", "0.5,2.5", "--out", "o"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("r = 2.5"));
}

fn vacuum() -> Value {
    json!({ "protocol": { "r": 0.0, "cutoff": 8, "input": { "kind": "fock", "n": 0 } } })
}

#[test]
fn vacuum_density_is_normalized_gaussian() {
    let tmp = TempDir::new().unwrap();
    let c = write_config(tmp.path(), "run.json", &vacuum());
    let o = cvtele(tmp.path(), &["density", "--config", &c, "--grid-n", "41", "--out", "o"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (header, rows) = read_csv(&tmp.path().join("o/density.csv"));
    assert_eq!(header, ["chi_plus", "chi_minus", "density"]);
    assert_eq!(rows.len(), 41 * 41);
    let meta: Value = serde_json::from_slice(&fs::read(tmp.path().join("o/density.meta.json")).unwrap()).unwrap();
    assert!(meta["grid"]["normalization_deficit"].as_f64().unwrap().abs() <= 1e-6);
    assert_eq!(meta["grid"]["n_points"], 41);
    // Vacuum on both Bell inputs: p = exp(−(χ₊² + χ₋²)/2) / 2π.
    for row in rows.iter().step_by(97) {
        let v: Vec<f64> = row.iter().map(|s| s.parse().unwrap()).collect();
        let expect = (-(v[0] * v[0] + v[1] * v[1]) / 2.0).exp() / (2.0 * std::f64::consts::PI);
        assert!((v[2] - expect).abs() <= 1e-10, "{row:?}");
    }
}

#[test]
fn density_grid_too_small_exits_3() {
    let tmp = TempDir::new().unwrap();
    let mut cfg = vacuum();
    cfg["protocol"]["grid"] = json!({ "half_width": 8.0, "n_points": 41, "adaptive": false });
    let c = write_config(tmp.path(), "run.json", &cfg);
    let o = cvtele(tmp.path(), &["density", "--config", &c, "--grid-l", "1", "--out", "o"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("widen the grid"));
}

fn physics(kappa: f64) -> Value {
    // κ/|g₀η_x𝓔/Δ| = κ/0.1 and ν_x/κ = 10/κ.
    json!({
        "units": "MHz",
        "g0": 10.0,
        "eta_x": 0.1,
        "delta": 100.0,
        "kappa": kappa,
        "nu_x": 10.0,
        "laser": { "shape": "constant", "peak": 10.0 }
    })
}

#[test]
fn physics_boundary_ratio_passes() {
    let tmp = TempDir::new().unwrap();
    let c = write_config(tmp.path(), "p.json", &physics(1.0));
    let o = cvtele(tmp.path(), &["validate-physics", "--config", &c, "--ratio", "10", "--format", "json", "--out", "o"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rep: Value = serde_json::from_slice(&fs::read(tmp.path().join("o/validate_physics.json")).unwrap()).unwrap();
    assert_eq!(rep["passed"], true);
    for check in rep["checks"].as_array().unwrap() {
        assert_eq!(check["passed"], true, "{check}");
    }
}

#[test]
fn physics_half_ratio_fails_naming_inequality() {
    let tmp = TempDir::new().unwrap();
    let c = write_config(tmp.path(), "p.json", &physics(0.5));
    let o = cvtele(tmp.path(), &["validate-physics", "--config", &c, "--ratio", "10", "--out", "o"]);
    assert_eq!(o.status.code(), Some(2));
    let msg = stderr(&o);
    assert!(msg.contains("kappa >> |g0 eta_x E_L / delta|"), "{msg}");
    assert!(!msg.contains("nu_x >> kappa"), "{msg}");
    let (header, rows) = read_csv(&tmp.path().join("o/validate_physics.csv"));
    assert_eq!(header, ["name", "lhs", "rhs", "ratio", "required", "passed"]);
    let kappa_row = rows.iter().find(|r| r[0].starts_with("kappa")).unwrap();
    assert_eq!(kappa_row[5], "false");
    assert!((kappa_row[3].parse::<f64>().unwrap() - 5.0).abs() <= 1e-9);
}

#[test]
fn physics_mhz_rates_report_microseconds() {
    let tmp = TempDir::new().unwrap();
    let c = write_config(tmp.path(), "p.json", &physics(1.0));
    let o = cvtele(tmp.path(), &["validate-physics", "--config", &c, "--format", "json", "--out", "o"]);
    assert!(o.status.success());
    let rep: Value = serde_json::from_slice(&fs::read(tmp.path().join("o/validate_physics.json")).unwrap()).unwrap();
    // Γ = (10·0.1·10/100)²/1 = 0.01 in units of 2π·MHz.
    let two_pi = 2.0 * std::f64::consts::PI;
    let gamma = 0.01 * two_pi * 1e6;
    assert!((rep["gamma_peak"].as_f64().unwrap() / gamma - 1.0).abs() <= 1e-12);
    assert_eq!(rep["time_unit"], "us");
    let expect_us = 1.0 / (two_pi * 0.01);
    assert!((rep["gamma_inverse"].as_f64().unwrap() / expect_us - 1.0).abs() <= 1e-12);
}

#[test]
fn physics_block_sets_efficiencies_or_rejects_regime() {
    let tmp = TempDir::new().unwrap();
    let mut cfg = coherent(0.5, 30);
    cfg["physics"] = json!({ "params": physics(1.0), "interaction_time": 50.0 });
    let c = write_config(tmp.path(), "run.json", &cfg);
    let o = cvtele(tmp.path(), &["teleport", "--config", &c, "--out", "o"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let echo: Value = serde_json::from_slice(&o.stdout).unwrap();
    // η = 1 − exp(−2Γt), Γt = 2π·0.01·50.
    let eta = 1.0 - (-2.0 * 2.0 * std::f64::consts::PI * 0.01 * 50.0).exp();
    for key in ["eta_write", "eta_read", "eta_epr_a", "eta_epr_b"] {
        assert!((echo["protocol"][key].as_f64().unwrap() - eta).abs() <= 1e-12, "{key}");
    }

    cfg["physics"]["params"] = physics(0.5);
    let c = write_config(tmp.path(), "bad.json", &cfg);
    let o = cvtele(tmp.path(), &["teleport", "--config", &c, "--out", "o"]);
    assert_eq!(o.status.code(), Some(2));
    cfg["physics"]["allow_violation"] = json!(true);
    let c = write_config(tmp.path(), "forced.json", &cfg);
    let o = cvtele(tmp.path(), &["teleport", "--config", &c, "--out", "o"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let meta: Value = serde_json::from_slice(&fs::read(tmp.path().join("o/teleport.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["physics"]["override_used"], true);
}
