use std::path::Path;
use std::process::Command;

use dualdet_cli::config::{Model, Params};
use dualdet_cli::{parse_config, parse_config_str, render, run_experiment, ExperimentConfig, Format, Kind, Report};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dualdet"))
}

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn run_cli(args: &[&str], threads: Option<&str>) -> (i32, String, String) {
    let mut cmd = bin();
    cmd.args(args);
    if let Some(t) = threads {
        cmd.env("DUALDET_THREADS", t);
    }
    let out = cmd.output().unwrap();
    (out.status.code().unwrap(), String::from_utf8_lossy(&out.stdout).into(), String::from_utf8_lossy(&out.stderr).into())
}

#[test]
fn minimal_simulate_config_fills_defaults() {
    let cfg = parse_config_str(r#"{"kind": "simulate"}"#, None).unwrap();
    assert_eq!(cfg.kind, Kind::Simulate);
    assert_eq!(cfg.seed, 42);
    match cfg.params {
        Params::Simulate(p) => {
            assert_eq!(p.model, Model::Asep);
            assert_eq!(p.tau, 0.4);
            assert_eq!(p.paths, 10_000);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn unknown_kind_names_the_field() {
    let e = parse_config_str(r#"{"kind": "teleport"}"#, None).unwrap_err();
    assert_eq!(e.field, "kind");
    let e = parse_config_str(r#"{"kind": "simulate", "params": {"paths": "many"}}"#, None).unwrap_err();
    assert_eq!(e.field, "params.paths");
    let e = parse_config_str(r#"{"kind": "moment", "tolerances": {"z": 2}}"#, None).unwrap_err();
    assert_eq!(e.field, "tolerances.z");
    let e = parse_config_str(r#"{"kind": "moment"}"#, Some(Kind::Invert)).unwrap_err();
    assert_eq!(e.field, "kind");
    assert_eq!(parse_config_str("[1, 2]", None).unwrap_err().field, "config");
}

#[test]
fn tau_outside_unit_interval_is_rejected() {
    for tau in ["1.0", "0.0", "-0.3", "2"] {
        let e = parse_config_str(&format!(r#"{{"kind": "moment", "params": {{"tau": {tau}}}}}"#), None).unwrap_err();
        assert_eq!(e.field, "params.tau", "{tau}");
    }
    let e = parse_config_str(r#"{"kind": "tw-convergence", "params": {"tau": 1.0}}"#, None).unwrap_err();
    assert_eq!(e.field, "params.tau");
}

#[test]
fn missing_file_is_a_config_error() {
    let e = parse_config(Path::new("/nonexistent/dualdet.json")).unwrap_err();
    assert_eq!(e.field, "config");
    let (code, _, err) = run_cli(&["simulate", "--config", "/nonexistent/dualdet.json"], None);
    assert_eq!(code, 2);
    assert!(err.contains("config"));
}

#[test]
fn identity_suite_defaults_pass() {
    let dir = tempfile::tempdir().unwrap();
    let (code, out, err) = run_cli(&["identity-suite", "--out", dir.path().to_str().unwrap()], None);
    assert_eq!(code, 0, "{out}\n{err}");
    assert!(!out.contains("FAIL"));
    assert!(dir.path().join("identity-suite.csv").exists());
}

#[test]
fn det_scan_grid_gives_one_row_per_zeta() {
    let cfg = parse_config_str(
        r#"{"kind": "det-scan", "params": {"model": "asep", "zetas": [], "grid": {"re": [-0.6, -0.2], "im": [-0.1, 0.1], "n_re": 3, "n_im": 2}}}"#,
        None,
    )
    .unwrap();
    let rep = run_experiment(&cfg).unwrap();
    assert_eq!(rep.rows.len(), 6);
    let csv = render(&rep, Format::Csv).unwrap();
    let data: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(data.len(), 7);
    assert_eq!(data[0], "zeta_re,zeta_im,value_re,value_im,error,nodes");
}

#[test]
fn impossible_window_exits_with_config_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", r#"{"kind": "duality-check", "params": {"model": "asep", "t": 2.0, "padding": 5}}"#);
    let (code, _, err) = run_cli(&["duality-check", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()], None);
    assert_eq!(code, 2);
    assert!(err.contains("params.padding"), "{err}");
    assert!(!dir.path().join("duality-check.csv").exists());
}

#[test]
fn non_convergence_exits_with_code_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", r#"{"params": {"m_max": 2, "inv_tol": 1e-30}}"#);
    let (code, _, err) = run_cli(&["invert", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()], None);
    assert_eq!(code, 3, "{err}");
}

#[test]
fn failed_tolerance_exits_with_code_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", r#"{"params": {"compare_routes": true}, "tolerances": {"abs": 0.0}}"#);
    let (code, out, _) = run_cli(&["det-scan", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()], None);
    assert_eq!(code, 1);
    assert!(out.contains("FAIL route_gap"));
    // the table is still written
    assert!(dir.path().join("det-scan.csv").exists());
}

#[test]
fn same_config_and_seed_give_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", r#"{"params": {"model": "qtasep", "particle": 2, "paths": 3000}}"#);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for (out, threads) in [(&a, "1"), (&b, "2")] {
        for fmt in ["csv", "json", "plot"] {
            let (code, _, err) = run_cli(&["simulate", "--config", cfg.to_str().unwrap(), "--seed", "7", "--out", out.to_str().unwrap(), "--format", fmt], Some(threads));
            assert_eq!(code, 0, "{err}");
        }
    }
    for f in ["simulate.csv", "simulate.json", "simulate.dat"] {
        let x = std::fs::read(a.join(f)).unwrap();
        assert_eq!(x, std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let text = std::fs::read_to_string(a.join("simulate.csv")).unwrap();
    assert!(text.contains("# seed: 7"));
    let (_, _, _) = run_cli(&["simulate", "--config", cfg.to_str().unwrap(), "--seed", "8", "--out", a.to_str().unwrap()], None);
    assert_ne!(std::fs::read_to_string(a.join("simulate.csv")).unwrap(), text);
}

#[test]
fn json_round_trips() {
    let mut cfg = ExperimentConfig::defaults(Kind::Invert);
    if let Params::Invert(p) = &mut cfg.params {
        p.m_max = 3;
    }
    let rep = run_experiment(&cfg).unwrap();
    let text = render(&rep, Format::Json).unwrap();
    let back: Report = serde_json::from_str(&text).unwrap();
    assert_eq!(back, rep);
    assert_eq!(render(&back, Format::Csv).unwrap(), render(&rep, Format::Csv).unwrap());
}

#[test]
fn empty_result_set_is_header_only() {
    let cfg = parse_config_str(r#"{"kind": "det-scan", "params": {"zetas": []}}"#, None).unwrap();
    let rep = run_experiment(&cfg).unwrap();
    assert!(rep.rows.is_empty());
    let csv = render(&rep, Format::Csv).unwrap();
    assert_eq!(csv.lines().last().unwrap(), "zeta_re,zeta_im,value_re,value_im,error,nodes");
    assert!(csv.lines().rev().skip(1).all(|l| l.starts_with('#')));
}

#[test]
fn floats_carry_seventeen_significant_digits() {
    assert_eq!(dualdet_cli::report::fmt_float(0.1), "1.0000000000000001e-1");
    assert_eq!(dualdet_cli::report::fmt_float(-2.5), "-2.5000000000000000e0");
    for v in [std::f64::consts::PI, 1e-300, -7.123456789012345e12] {
        assert_eq!(dualdet_cli::report::fmt_float(v).parse::<f64>().unwrap(), v);
    }
}
