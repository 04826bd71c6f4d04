use std::path::Path;
use std::process::{Command, Output};

use fpcascade::oracles;
use serde_json::Value;

const SMALL: &[&str] = &[
    "--x-min", "-16", "--x-max", "16", "--nx", "321", "--t0", "0.05", "--t-max", "2", "--nt", "40", "--paths", "2000",
];

fn fpcascade(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fpcascade"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn small(sub: &str, extra: &[&str], out: &Path) -> Output {
    let mut args = vec![sub];
    args.extend_from_slice(SMALL);
    args.extend_from_slice(extra);
    fpcascade(&args, out)
}

fn summary(dir: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(dir.join("summary.json")).unwrap()).unwrap()
}

fn rows(dir: &Path) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(dir.join("density.csv"))
        .unwrap()
        .records()
        .map(|r| r.unwrap())
        .collect()
}

fn write_config(dir: &Path, json: &str) -> String {
    let path = dir.join("run.json");
    std::fs::write(&path, json).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn example1_writes_both_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let run = small(
        "example1",
        &["--v", "cos", "--omega", "1", "--lambda", "0.5", "--d", "1"],
        &out,
    );
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));

    let text = std::fs::read_to_string(out.join("density.csv")).unwrap();
    assert!(!text.contains('\r'));
    assert_eq!(
        text.lines().next().unwrap(),
        "x,t,w_pert,w_pert_numeric,w_exact,w_fd,w_mc"
    );
    let records = rows(&out);
    assert_eq!(records.len(), 321 * 40);
    assert!(records.iter().all(|r| r.len() == 7));
    // Time-major order, Monte Carlo only on checkpoint slices.
    assert_eq!(&records[0][1], &records[320][1]);
    assert_ne!(&records[320][1], &records[321][1]);
    assert_eq!(&records[0][6], "");
    assert!(records.iter().any(|r| !r[6].is_empty()));
    assert_eq!(records[5][0].len(), "-1.1500000000000000e1".len());

    let s = summary(&out);
    for key in [
        "config",
        "masses",
        "moments",
        "distances",
        "translation_residual",
        "scaling_fit",
        "resummation_gaps",
    ] {
        assert!(s.get(key).is_some(), "missing {key}");
    }
    assert!(s["translation_residual"].as_f64().unwrap() <= 1e-12);
    assert_eq!(s["config"]["lambda"].as_f64(), Some(0.5));
    assert_eq!(s["config"]["grid"]["nx"].as_u64(), Some(321));
}

#[test]
fn identical_invocations_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let read = |file: &str| std::fs::read_to_string(out.join(file)).unwrap();
    assert!(small("ou", &["--lambda", "0.1", "--seed", "7"], &out).status.success());
    let first = (read("density.csv"), read("summary.json"));
    std::fs::remove_dir_all(&out).unwrap();
    assert!(small("ou", &["--lambda", "0.1", "--seed", "7"], &out).status.success());
    assert!(first.0 == read("density.csv"), "density.csv differs");
    assert!(first.1 == read("summary.json"), "summary.json differs");
}

#[test]
fn zero_coupling_gives_pure_diffusion() {
    let tmp = tempfile::tempdir().unwrap();
    let run = small("example1", &["--lambda", "0", "--v", "cos"], tmp.path());
    assert!(run.status.success());
    for r in rows(tmp.path()) {
        let (x, t): (f64, f64) = (r[0].parse().unwrap(), r[1].parse().unwrap());
        let heat = oracles::w0_diffusion(x, t, 1.0);
        for column in 2..=4 {
            let w: f64 = r[column].parse().unwrap();
            assert!(
                (w - heat).abs() <= 1e-12 * (1.0 + heat),
                "column {column} at ({x}, {t})"
            );
        }
    }
}

#[test]
fn ou_summary_reports_scaling_fit_and_gaps() {
    let tmp = tempfile::tempdir().unwrap();
    let run = small(
        "ou",
        &["--lambda", "0.1", "--d", "1", "--lambda-sweep", "0.02,0.04,0.08,0.16"],
        tmp.path(),
    );
    assert!(run.status.success());
    let s = summary(tmp.path());
    let fit = &s["scaling_fit"];
    assert_eq!(fit["lambdas"].as_array().unwrap().len(), 4);
    assert_eq!(fit["t"].as_f64(), Some(1.0));
    // The perturbative error is quartic in the coupling; see the acceptance suite.
    let slope = fit["slope"].as_f64().unwrap();
    assert!((3.7..=4.1).contains(&slope), "slope {slope}");
    assert_eq!(s["resummation_gaps"]["gaps"].as_array().unwrap().len(), 4);
    let worst = s["distances"]["w_pert:w_exact"]["peak_relative_linf"]["max"]
        .as_f64()
        .unwrap();
    assert!(worst <= 2e-3, "{worst}");
    assert!(s["translation_residual"].is_null());
}

#[test]
fn custom_config_runs_and_flags_override_it() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(
        tmp.path(),
        r#"{
            "drift": {"family": "linear_time_modulated", "v": {"kind": "sin", "omega": 2.0}},
            "lambda": 0.3,
            "grid": {"x_min": -16.0, "x_max": 16.0, "nx": 201, "t0": 0.05, "t_max": 2.0, "nt": 40},
            "monte_carlo": {"paths": 1000}
        }"#,
    );
    let out = tmp.path().join("out");
    let run = fpcascade(&["custom", "--config", &config, "--nx", "321"], &out);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    assert_eq!(rows(&out).len(), 321 * 40);
    let s = summary(&out);
    assert_eq!(s["config"]["drift"]["v"]["kind"], "sin");
    assert_eq!(s["config"]["lambda"].as_f64(), Some(0.3));
}

#[test]
fn custom_potential_without_oracle_leaves_oracle_columns_empty() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(
        tmp.path(),
        r#"{
            "drift": {"family": "custom", "orders": [{"term": "zero"}, {"term": "quadratic", "stiffness": 1.0}]},
            "lambda": 0.1,
            "grid": {"x_min": -16.0, "x_max": 16.0, "nx": 321, "t0": 0.05, "t_max": 2.0, "nt": 40},
            "monte_carlo": {"paths": 1000}
        }"#,
    );
    let out = tmp.path().join("out");
    let run = fpcascade(&["custom", "--config", &config], &out);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let records = rows(&out);
    assert!(records
        .iter()
        .all(|r| r[2].is_empty() && r[4].is_empty() && !r[3].is_empty()));
}

#[test]
fn rejected_configurations_exit_with_status_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cases = [
        (r#"{"drift": {"family": "quadratic_ou"}, "order": 9}"#, "order 9"),
        (
            r#"{"grid": {"x_min": -10.0, "x_max": 10.0, "nx": 101, "t0": 0.0, "t_max": 1.0, "nt": 11}}"#,
            "t0",
        ),
        (
            r#"{"drift": {"family": "custom", "orders": [{"term": "quadratic", "stiffness": 1.0}]}}"#,
            "base potential",
        ),
        (r#"{"d": -1.0}"#, "D must be positive"),
        (r#"{"unknown": 1}"#, "unknown"),
    ];
    for (json, needle) in cases {
        let config = write_config(tmp.path(), json);
        let run = fpcascade(&["custom", "--config", &config], &tmp.path().join("out"));
        assert_eq!(run.status.code(), Some(2), "{json}");
        let stderr = String::from_utf8_lossy(&run.stderr);
        assert!(stderr.contains(needle), "{stderr}");
    }
    let run = fpcascade(&["custom"], &tmp.path().join("out"));
    assert_eq!(run.status.code(), Some(2));
    assert!(!tmp.path().join("out").exists());
}

#[test]
fn solver_abort_exits_with_status_3() {
    let tmp = tempfile::tempdir().unwrap();
    let run = fpcascade(&["example1", "--x-min", "-2", "--x-max", "2", "--nx", "81"], tmp.path());
    assert_eq!(run.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&run.stderr).contains("reference"));
}

#[test]
fn emission_check_failure_exits_with_status_4_and_writes_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(
        tmp.path(),
        r#"{
            "grid": {"x_min": -12.0, "x_max": 12.0, "nx": 241, "t0": 0.05, "t_max": 1.0, "nt": 20},
            "tolerances": {"emission_mass": 1e-300},
            "monte_carlo": {"paths": 500}
        }"#,
    );
    let out = tmp.path().join("out");
    let run = fpcascade(&["custom", "--config", &config], &out);
    assert_eq!(run.status.code(), Some(4), "{}", String::from_utf8_lossy(&run.stderr));
    assert!(!out.exists());
}

#[test]
fn default_grid_example1_run_succeeds() {
    let tmp = tempfile::tempdir().unwrap();
    let run = fpcascade(
        &[
            "example1", "--v", "cos", "--omega", "1", "--lambda", "0.5", "--d", "1", "--t-max", "5",
        ],
        tmp.path(),
    );
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let s = summary(tmp.path());
    assert!(s["translation_residual"].as_f64().unwrap() <= 1e-12);
    assert_eq!(rows(tmp.path()).len(), 1001 * 101);
}
