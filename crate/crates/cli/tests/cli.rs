use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn hamspec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hamspec")).args(args).output().expect("run hamspec")
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

const IDENTITY2: &str = "[[[1,0],[0,0]],[[0,0],[1,0]]]";

fn lcc_config(schedule: &str) -> String {
    format!(
        r#"{{"system": {{"builtin": "ex-lcc"}},
            "extension": {{"M": {IDENTITY2}, "N": {IDENTITY2}}},
            "schedule": {schedule}, "shift": 5.0, "defect_samples": 2, "seed": 3}}"#
    )
}

const DIRICHLET8: &str = r#"{"system": {"builtin": "second_order", "params": {"p": 1.0, "q": 0.0, "w": 1.0}},
    "regular_bc": "dirichlet",
    "resolvent": {"z": [-1, 0], "g": {"start": 0, "values": [[[0,0],[0,0]], [[1,0],[0,0]], [[0,0],[0,0]]]}}}"#;

/// Data rows of a CSV as numbers (empty cells become None).
fn csv_rows(text: &str) -> (Vec<String>, Vec<Vec<Option<f64>>>) {
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(str::to_string).collect();
    let rows =
        lines.map(|l| l.split(',').map(|c| if c.is_empty() { None } else { c.parse().ok() }).collect()).collect();
    (header, rows)
}

#[test]
fn validate_accepts_reference_extension() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "lcc.json", &lcc_config("[15, 30]"));
    let o = hamspec(&["validate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["case"]["kind"], "LimitCircle");
    for bc in v["boundary_conditions"].as_array().unwrap() {
        assert_eq!(bc["rank"], 2);
        assert!(bc["symplectic_residual"].as_f64().unwrap() <= 1e-9);
    }
}

#[test]
fn validate_rejects_non_symplectic_pair() {
    let dir = tempfile::tempdir().unwrap();
    let body = format!(
        r#"{{"system": {{"builtin": "ex-lcc"}}, "extension": {{"M": {IDENTITY2}, "N": [[[0,0],[0,0]],[[0,0],[0,0]]]}}}}"#
    );
    let cfg = write_config(dir.path(), "bad.json", &body);
    let o = hamspec(&["validate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("MJM* − NJN*"), "{}", stderr(&o));
}

#[test]
fn missing_config_is_an_io_error() {
    let o = hamspec(&["validate", "--config", "/nonexistent/run.json"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(hamspec(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(hamspec(&["eigs"]).status.code(), Some(1));
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "d.json", DIRICHLET8);
    // eigs without --b
    assert_eq!(hamspec(&["eigs", "--config", cfg.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn classify_reference_systems() {
    let dir = tempfile::tempdir().unwrap();
    for (name, kind, d) in [("ex-lcc", "LimitCircle", 2), ("ex-lpc", "LimitPoint", 1), ("ex-mid", "Intermediate", 3)] {
        let cfg = write_config(dir.path(), "c.json", &format!(r#"{{"system": {{"builtin": "{name}"}}}}"#));
        let o = hamspec(&["classify", "--config", cfg.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
        assert_eq!(v["kind"], kind, "{name}");
        assert_eq!(v["d"], d, "{name}");
    }
}

#[test]
fn eigs_dirichlet_chain_with_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "d.json", DIRICHLET8);
    let o = hamspec(&["eigs", "--config", cfg.to_str().unwrap(), "--b", "8", "--oracle"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (header, rows) = csv_rows(&stdout(&o));
    assert_eq!(header.len(), 5);
    assert!(header[2].contains("cluster_rtol"));
    assert_eq!(rows.len(), 8);
    for (i, row) in rows.iter().enumerate() {
        let k = (i + 1) as f64;
        let exact = 4.0 * (k * std::f64::consts::PI / 18.0).sin().powi(2);
        assert_eq!(row[0], Some(k));
        assert!((row[2].unwrap() - exact).abs() <= 1e-8);
        assert!((row[3].unwrap() - exact).abs() <= 1e-7);
    }
    let plain = hamspec(&["eigs", "--config", cfg.to_str().unwrap(), "--b", "8"]);
    assert_eq!(csv_rows(&stdout(&plain)).0.len(), 3);
}

#[test]
fn eigs_on_massless_system_is_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "z.json",
        r#"{"system": {"builtin": "second_order", "params": {"p": 1.0, "q": 0.0, "w": 0.0}}, "regular_bc": "dirichlet"}"#,
    );
    let o = hamspec(&["eigs", "--config", cfg.to_str().unwrap(), "--b", "8"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().count(), 1);
}

#[test]
fn approx_limit_circle_writes_plot_with_envelopes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "lcc.json", &lcc_config("[15, 30, 60]"));
    let out = dir.path().join("out");
    let o = hamspec(&["approx", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let svg = std::fs::read_to_string(out.join("convergence.svg")).unwrap();
    assert!(svg.matches("class=\"trajectory\"").count() >= 6);
    assert!(svg.contains("class=\"envelope\""));
    assert!(!svg.contains("inclusion-only"));
    let traj = std::fs::read_to_string(out.join("trajectories.csv")).unwrap();
    let header = traj.lines().next().unwrap();
    for name in ["r [", "b_r [", "k [", "lambda [", "e_r [", "bound_a [", "bound_b [", "verdict ["] {
        assert!(header.contains(name), "{name} missing from {header}");
    }
    assert!(traj.lines().skip(1).all(|l| l.ends_with(",converged")));
    let defects = std::fs::read_to_string(out.join("defects.csv")).unwrap();
    assert_eq!(defects.lines().count(), 1 + 2 * 3);
    let report: Value = serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["approximation"]["kind"], "LimitCircle");
}

#[test]
fn approx_limit_point_is_inclusion_only() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "lpc.json",
        r#"{"system": {"builtin": "ex-lpc"}, "extension": {"M": [[[1,0],[0,0]]]}, "schedule": [20, 40]}"#,
    );
    let out = dir.path().join("out");
    let o = hamspec(&["approx", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let svg = std::fs::read_to_string(out.join("convergence.svg")).unwrap();
    assert!(svg.contains("inclusion-only"));
    assert!(!svg.contains("class=\"envelope\""));
    let traj = std::fs::read_to_string(out.join("trajectories.csv")).unwrap();
    assert!(traj.lines().skip(1).all(|l| l.ends_with(",,,,inclusion-only")));
}

#[test]
fn approx_with_empty_schedule_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "e.json", &lcc_config("[]"));
    let out = dir.path().join("out");
    let o = hamspec(&["approx", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!out.exists());
}

#[test]
fn approx_output_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "lcc.json", &lcc_config("[15, 30, 60]"));
    let (o1, o2) = (dir.path().join("one"), dir.path().join("two"));
    for out in [&o1, &o2] {
        let o = hamspec(&["approx", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0));
    }
    for f in ["trajectories.csv", "defects.csv", "eigenvalues.csv", "report.json", "convergence.svg"] {
        assert_eq!(std::fs::read(o1.join(f)).unwrap(), std::fs::read(o2.join(f)).unwrap(), "{f} differs");
    }
}

#[test]
fn resolvent_self_check_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "d.json", DIRICHLET8);
    let c = cfg.to_str().unwrap();
    let o = hamspec(&["resolvent", "--config", c, "--b", "8"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (header, rows) = csv_rows(&stdout(&o));
    assert!(header.last().unwrap().starts_with("residual ["));
    assert_eq!(rows.len(), 10);
    assert!(rows.iter().filter_map(|r| *r.last().unwrap()).all(|r| r <= 1e-8));
    assert!(rows.iter().any(|r| r[1].unwrap() != 0.0));

    // λ = 1 = 4 sin²(3π/18) is an eigenvalue of the chain.
    let o = hamspec(&["resolvent", "--config", c, "--b", "8", "--z", "1,0"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("eigenvalue"));

    let zero = DIRICHLET8.replace("[[1,0],[0,0]]", "[[0,0],[0,0]]");
    let cfg0 = write_config(dir.path(), "z.json", &zero);
    let o = hamspec(&["resolvent", "--config", cfg0.to_str().unwrap(), "--b", "8", "--z", "0.3,0.2"]);
    let (_, rows) = csv_rows(&stdout(&o));
    assert!(rows.iter().all(|r| r[1..5].iter().all(|x| *x == Some(0.0))));
}

#[test]
fn resolvent_on_half_line_limit_circle() {
    let dir = tempfile::tempdir().unwrap();
    let body = format!(
        r#"{{"system": {{"builtin": "ex-lcc"}}, "extension": {{"M": {IDENTITY2}, "N": {IDENTITY2}}},
            "resolvent": {{"z": [0.5, 1], "g": {{"start": 0, "values": [[[1,0],[0,0]], [[0,0],[0.5,0]]]}}, "end": 50}}}}"#
    );
    let cfg = write_config(dir.path(), "r.json", &body);
    let out = dir.path().join("out");
    let o = hamspec(&["resolvent", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (_, rows) = csv_rows(&std::fs::read_to_string(out.join("resolvent.csv")).unwrap());
    assert_eq!(rows.len(), 51);
    assert!(rows.iter().filter_map(|r| *r.last().unwrap()).all(|r| r <= 1e-8));
}
