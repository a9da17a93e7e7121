use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_coorbit")).args(args).output().expect("binary runs")
}

fn dir(name: &str) -> PathBuf {
    let d = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("cli").join(name);
    let _ = fs::remove_dir_all(&d);
    d
}

fn json(path: PathBuf) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn small_grid_config(d: &PathBuf) -> PathBuf {
    fs::create_dir_all(d).unwrap();
    let p = d.join("grid.cfg");
    fs::write(&p, "# coarse group grid\nn_a = 16\nn_b = 64\n").unwrap();
    p
}

#[test]
fn cone_dimension_two_is_rejected() {
    let o = run(&["cone", "cover", "--n", "2"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("n must be >= 3"));
}

#[test]
fn norms_outside_the_range_name_the_inequality() {
    let d = dir("norms-range");
    let o = run(&["disc", "norms", "--s", "1.5", "--r", "0", "--p", "1", "--out", d.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("2-s < r+2/p < s"));
    assert!(!d.join("ratios.json").exists());
}

#[test]
fn norms_create_the_output_dir_and_rerun_identically() {
    let d = dir("norms").join("nested");
    let out = d.to_str().unwrap();
    let o = run(&["disc", "norms", "--s", "4", "--r", "0", "--p", "2", "--out", out]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(d.join("ratios.json"));
    assert!(v["default"]["spread"].as_f64().unwrap() < 5e-3);
    assert_eq!(v["default"]["entries"].as_array().unwrap().len(), 5);
    let first = fs::read(d.join("ratios.json")).unwrap();
    assert_eq!(code(&run(&["disc", "norms", "--s", "4", "--r", "0", "--p", "2", "--out", out])), 0);
    assert_eq!(fs::read(d.join("ratios.json")).unwrap(), first);
}

#[test]
fn flags_override_the_config_file() {
    let d = dir("override");
    fs::create_dir_all(&d).unwrap();
    let cfg = d.join("run.cfg");
    fs::write(&cfg, format!("s = 3\nr = 1\np = 2\nout = {}\n", d.join("from-config").display())).unwrap();
    let o = run(&["disc", "norms", "--config", cfg.to_str().unwrap(), "--s", "4"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(d.join("from-config").join("ratios.json"));
    assert_eq!(v["default"]["s"].as_f64(), Some(4.0));
    assert_eq!(v["default"]["r"].as_f64(), Some(1.0));
}

#[test]
fn unknown_and_malformed_parameters_are_validation_errors() {
    assert_eq!(code(&run(&["disc", "norms", "--set", "colour=blue"])), 2);
    assert_eq!(code(&run(&["disc", "norms", "--s", "four"])), 2);
    assert_eq!(code(&run(&["cone", "cover", "--p", "2"])), 2);
    assert_eq!(code(&run(&["cone", "besov", "--n", "4"])), 2);
    assert_eq!(code(&run(&["disc", "reconstruct", "--set", "a0=1"])), 2);
}

#[test]
fn cover_json_is_certified_and_seeded_runs_repeat() {
    let d = dir("cover");
    let out = d.to_str().unwrap();
    assert_eq!(code(&run(&["cone", "cover", "--n", "3", "--delta", "0.4", "--out", out])), 0);
    let v = json(d.join("cover.json"));
    assert_eq!(v["delta"].as_f64(), Some(0.4));
    assert!(v["N"].as_u64().unwrap() >= 1);
    assert!(v["certificate"]["disjoint"].as_bool().unwrap());
    assert!(v["dense_certificate"]["covered"].as_bool().unwrap());
    let seeded = |sub: &str| {
        let p = d.join(sub);
        assert_eq!(code(&run(&["cone", "cover", "--seed", "7", "--out", p.to_str().unwrap()])), 0);
        fs::read(p.join("cover.json")).unwrap()
    };
    assert_eq!(seeded("s1"), seeded("s2"));
}

#[test]
fn zero_tolerance_fails_every_quadrature_check() {
    let d = dir("check-tol0");
    let cfg = small_grid_config(&d);
    let o = run(&["check", "--tol", "0", "--config", cfg.to_str().unwrap(), "--out", d.to_str().unwrap()]);
    assert_eq!(code(&o), 3);
    let v = json(d.join("axioms.json"));
    assert!(v["closed_form"].as_array().unwrap().iter().all(|r| r["pass"].as_bool().unwrap()));
    let quad = v["quadrature"].as_array().unwrap();
    assert!(!quad.is_empty() && quad.iter().all(|r| !r["pass"].as_bool().unwrap()));
}

#[test]
fn seeded_check_is_byte_identical() {
    let d = dir("check-seed");
    let cfg = small_grid_config(&d);
    let once = |sub: &str| {
        let p = d.join(sub);
        run(&["check", "--seed", "7", "--config", cfg.to_str().unwrap(), "--out", p.to_str().unwrap()]);
        fs::read(p.join("axioms.json")).unwrap()
    };
    assert_eq!(once("a"), once("b"));
}

#[test]
fn reconstruction_writes_field_and_summary() {
    let d = dir("reconstruct");
    let o = run(&[
        "disc", "reconstruct", "--set", "a0=1.4", "--set", "b0=0.5", "--set", "l=1.5", "--set", "b_max=6",
        "--set", "r2_min=0", "--out", d.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let csv = fs::read_to_string(d.join("reconstruction.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("a,b,re,im"));
    assert_eq!(csv.lines().count(), 1 + 24 * 96);
    let v = json(d.join("reconstruction.json"));
    assert!(v["summary"]["final_error"].as_f64().unwrap() < 1e-2);
    assert_eq!(v["summary"]["residuals"].as_array().unwrap().len(), 26);
}

#[test]
fn coarse_lattice_is_refused_with_a_threshold_exit() {
    let d = dir("refused");
    let o = run(&[
        "disc", "reconstruct", "--set", "a0=4", "--set", "b0=2", "--set", "l=1.5", "--set", "b_max=6", "--out",
        d.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 3);
    let v = json(d.join("reconstruction.json"));
    assert!(v["refusal"].as_str().unwrap().contains("contraction"));
    assert!(!d.join("reconstruction.csv").exists());
}

#[test]
fn small_equivalence_run_reports_c_emp() {
    let d = dir("equivalence");
    let o = run(&["cone", "equivalence", "--p", "2", "--q", "2", "--s", "3", "--set", "size=32", "--set", "h=4", "--out", d.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(d.join("equivalence.json"));
    let c = v["report"]["C_emp"].as_f64().unwrap();
    assert!(c.is_finite() && c >= 1.0);
    assert_eq!(v["report"]["per_function"].as_array().unwrap().len(), 6);
}
