use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_impulse-hum")).args(args).output().unwrap()
}

fn listing(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = walk(dir)
        .into_iter()
        .map(|p| p.strip_prefix(dir).unwrap().to_string_lossy().into_owned())
        .collect();
    names.sort();
    names
}

fn walk(dir: &Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    for e in fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            out.extend(walk(&p));
        } else {
            out.push(p);
        }
    }
    out
}

#[test]
fn single_run_writes_flat_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["--bc", "dirichlet", "--eps", "1e-2", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(
        listing(dir.path()),
        [
            "control.csv",
            "residuals.csv",
            "table.csv",
            "trajectory_controlled.csv",
            "trajectory_uncontrolled.csv"
        ]
    );
    let table = fs::read_to_string(dir.path().join("table.csv")).unwrap();
    let mut lines = table.lines();
    assert_eq!(lines.next(), Some("bc,epsilon,n_iter,final_norm,control_norm,converged,wall_time_s"));
    assert!(lines.next().unwrap().starts_with("dirichlet,1.0000000000000000e-2,"));
    assert_eq!(lines.next(), None);
}

#[test]
fn full_matrix_with_fit() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["--fit-cost", "--snapshots", "5", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let files = listing(dir.path());
    assert_eq!(files.len(), 2 + 9 * 4);
    assert!(files.contains(&"costfit.csv".to_string()));
    assert!(files.contains(&"neumann_eps_1e-3/control.csv".to_string()));
    let table = fs::read_to_string(dir.path().join("table.csv")).unwrap();
    assert_eq!(table.lines().count(), 10);
    let fit = fs::read_to_string(dir.path().join("costfit.csv")).unwrap();
    assert_eq!(fit.lines().count(), 4);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("dynamic"));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let out = run(&["--bc", "all", "--eps", "1e-1,1e-2", "--out", d.path().to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0));
    }
    let files = listing(a.path());
    assert_eq!(files, listing(b.path()));
    for f in files {
        assert_eq!(fs::read(a.path().join(&f)).unwrap(), fs::read(b.path().join(&f)).unwrap(), "{f} differs");
    }
}

#[test]
fn config_file_is_layered_under_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    fs::write(&cfg, r#"{"bc": "neumann", "eps": [0.1], "nx": 20}"#).unwrap();
    let out_dir = dir.path().join("out");
    let out = run(&[
        "--config",
        cfg.to_str().unwrap(),
        "--nx",
        "30",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let control = fs::read_to_string(out_dir.join("control.csv")).unwrap();
    // one row per interior node of the overriding n_x = 30
    assert_eq!(control.lines().count() - 1, 29);
    assert!(fs::read_to_string(out_dir.join("table.csv")).unwrap().contains("\nneumann,1.0000000000000001e-1,"));
}

#[test]
fn usage_errors_exit_2() {
    for args in [
        &["--tau", "0.03"][..],
        &["--nx", "1"],
        &["--bogus"],
        &["--bc", "robin"],
        &["--eps", "1e-3,1e-2"],
        &["--scheme", "rk4"],
        &["--omega-start", "0.8", "--omega-end", "0.2"],
    ] {
        let out = run(args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn malformed_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, "{bad").unwrap();
    let out = run(&["--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.json"));
}

#[test]
fn runtime_failure_exits_3() {
    let out = run(&["--datum", "file:/nonexistent/datum.csv"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn help_exits_0() {
    let out = run(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("--omega-start"));
}
