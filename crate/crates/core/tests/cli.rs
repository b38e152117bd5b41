use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use vimkit::cli::{EstimateReport, SimulateReport};
use vimkit::simulation::{generate, SimScenario};
use vimkit::Dataset;

fn vimkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vimkit"))
        .args(args)
        .env("VIMKIT_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn write_csv(d: &Dataset, path: &Path) {
    let mut w = csv::Writer::from_path(path).unwrap();
    w.write_record(["x1", "x2", "y"]).unwrap();
    for i in 0..d.n() {
        let x = d.features();
        w.write_record([x[(i, 0)], x[(i, 1)], d.outcome()[i]].map(|v| v.to_string()))
            .unwrap();
    }
    w.flush().unwrap();
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn unknown_group_column_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let data = write(dir.path(), "d.csv", "x1,y\n0,0\n1,1\n2,1\n");
    let groups = write(dir.path(), "g.json", r#"{"bad": ["x9"]}"#);
    let out = vimkit(&[
        "estimate",
        "--input",
        data.to_str().unwrap(),
        "--outcome",
        "y",
        "--groups",
        groups.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.starts_with("E_CONFIG"), "{err}");
    assert!(err.contains("x9"));
}

#[test]
fn unknown_flag_and_outcome_are_config_errors() {
    assert_eq!(vimkit(&["estimate", "--bogus"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let data = write(dir.path(), "d.csv", "x1,y\n0,0\n1,1\n");
    let out = vimkit(&["estimate", "--input", data.to_str().unwrap(), "--outcome", "z"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("E_CONFIG"));
}

#[test]
fn malformed_cell_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let data = write(dir.path(), "d.csv", "x1,y\n0,0\nabc,1\n");
    let out = vimkit(&["estimate", "--input", data.to_str().unwrap(), "--outcome", "y"]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.starts_with("E_DATA") && err.contains("row 2") && err.contains("x1"), "{err}");
}

#[test]
fn constant_outcome_is_degenerate() {
    let dir = tempfile::tempdir().unwrap();
    let mut text = String::from("x1,x2,y\n");
    for i in 0..60 {
        text.push_str(&format!("{},{},1\n", i, i % 7));
    }
    let data = write(dir.path(), "d.csv", &text);
    let out = vimkit(&["estimate", "--input", data.to_str().unwrap(), "--outcome", "y", "--measure", "r_squared"]);
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("E_DEGENERATE"));
}

#[test]
fn null_feature_test_rarely_rejects() {
    let dir = tempfile::tempdir().unwrap();
    let groups = write(dir.path(), "g.json", r#"{"second": ["x2"]}"#);
    let seeds = 100;
    let mut kept = 0;
    for seed in 0..seeds {
        let path = dir.path().join(format!("s{seed}.csv"));
        write_csv(&generate(&SimScenario::scenario2(), 1_000, 1_000 + seed), &path);
        let seed_arg = seed.to_string();
        let out = vimkit(&[
            "test",
            "--input",
            path.to_str().unwrap(),
            "--outcome",
            "y",
            "--groups",
            groups.to_str().unwrap(),
            "--seed",
            &seed_arg,
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let report: EstimateReport = serde_json::from_slice(&out.stdout).unwrap();
        assert_eq!(report.groups.len(), 1);
        if report.groups[0].reject == Some(false) {
            kept += 1;
        }
    }
    assert!(kept as f64 >= 0.93 * seeds as f64, "{kept} of {seeds}");
}

#[test]
fn simulate_recovers_auc_importance() {
    let out = vimkit(&[
        "simulate", "--scenario", "2", "--measure", "auc", "--n", "4000", "--reps", "50",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: SimulateReport = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report.rows.len(), 1);
    assert!((report.rows[0].mean_psi - 0.356).abs() < 0.05, "{}", report.rows[0].mean_psi);
    assert_eq!(report.schema, "vim-report/1");
}

#[test]
fn reports_round_trip_and_render_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    write_csv(&generate(&SimScenario::scenario1(), 400, 9), &path);
    let input = path.to_str().unwrap();
    let out = vimkit(&["test", "--input", input, "--outcome", "y", "--seed", "3"]);
    assert!(out.status.success());
    let report: EstimateReport = serde_json::from_slice(&out.stdout).unwrap();
    let mut again = serde_json::to_vec_pretty(&report).unwrap();
    again.push(b'\n');
    assert_eq!(again, out.stdout);
    assert_eq!(report.command, "test");
    assert_eq!(report.groups.len(), 2);
    for g in &report.groups {
        assert!(g.t_stat.is_some() && g.p_value.is_some() && g.reject.is_some());
    }

    let est = vimkit(&["estimate", "--input", input, "--outcome", "y", "--seed", "3"]);
    let report: EstimateReport = serde_json::from_slice(&est.stdout).unwrap();
    assert!(report.groups.iter().all(|g| g.p_value.is_none()));

    let csv_path = dir.path().join("out.csv");
    let out = vimkit(&[
        "test", "--input", input, "--outcome", "y", "--seed", "3", "--format", "csv",
        "--output", csv_path.to_str().unwrap(),
    ]);
    assert!(out.status.success() && out.stdout.is_empty());
    let text = std::fs::read_to_string(&csv_path).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("group,columns,psi,se,ci_lo,ci_hi"));
    assert_eq!(lines.count(), 2);
}
