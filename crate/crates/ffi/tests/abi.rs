use std::ffi::CStr;
use std::mem::MaybeUninit;
use std::path::Path;
use std::process::Command;
use std::ptr;

use impulse_hum::{BcKind, ExperimentConfig, PropagatorScheme};
use impulse_hum_ffi::*;

fn default_config() -> IhumConfig {
    let mut c = MaybeUninit::uninit();
    assert_eq!(unsafe { ihum_config_default(c.as_mut_ptr()) }, IhumStatus::Ok);
    unsafe { c.assume_init() }
}

fn new_solver(config: &IhumConfig) -> *mut IhumSolver {
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { ihum_solver_new(config, &mut s) }, IhumStatus::Ok);
    assert!(!s.is_null());
    s
}

fn last_error() -> String {
    let p = ihum_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn matches_library_run() {
    for (bc, kind) in [
        (IhumBc::Dirichlet, BcKind::Dirichlet),
        (IhumBc::Neumann, BcKind::Neumann),
        (IhumBc::Dynamic, BcKind::Dynamic),
    ] {
        let config = IhumConfig { bc, ..default_config() };
        let s = new_solver(&config);
        assert_eq!(unsafe { ihum_solver_solve(s) }, IhumStatus::Ok);

        let (mut iters, mut conv, mut fnorm, mut hnorm, mut n) = (0usize, false, 0.0, 0.0, 0usize);
        unsafe {
            assert_eq!(ihum_solver_iterations(s, &mut iters), IhumStatus::Ok);
            assert_eq!(ihum_solver_converged(s, &mut conv), IhumStatus::Ok);
            assert_eq!(ihum_solver_final_norm(s, &mut fnorm), IhumStatus::Ok);
            assert_eq!(ihum_solver_control_norm(s, &mut hnorm), IhumStatus::Ok);
            assert_eq!(ihum_solver_dof_count(s, &mut n), IhumStatus::Ok);
        }

        let lib_config = ExperimentConfig {
            scheme: PropagatorScheme::MatrixExponential,
            ..ExperimentConfig::default()
        };
        let run = impulse_hum::run_single(&lib_config, kind, config.eps).unwrap();
        assert_eq!(iters, run.row.n_iter);
        assert_eq!(conv, run.row.converged);
        assert_eq!(fnorm, run.row.final_norm);
        assert_eq!(hnorm, run.row.control_norm);

        let mut control = vec![0.0; n];
        assert_eq!(unsafe { ihum_solver_copy_control(s, control.as_mut_ptr(), n) }, IhumStatus::Ok);
        assert_eq!(control.as_slice(), run.report.control.values.as_slice());
        let mut state = vec![0.0; n];
        assert_eq!(unsafe { ihum_solver_copy_final_state(s, state.as_mut_ptr(), n) }, IhumStatus::Ok);
        assert_eq!(state.as_slice(), run.controlled.final_state.values.as_slice());
        unsafe { ihum_solver_free(s) };
    }
}

#[test]
fn custom_datum_and_crank_nicolson() {
    let config = IhumConfig {
        scheme: IhumScheme::CrankNicolson,
        dt: 1e-3,
        n_x: 20,
        ..default_config()
    };
    let s = new_solver(&config);
    let mut n = 0;
    unsafe { ihum_solver_dof_count(s, &mut n) };
    assert_eq!(n, 19);

    let zeros = vec![0.0; n];
    assert_eq!(unsafe { ihum_solver_set_datum(s, zeros.as_ptr(), n) }, IhumStatus::Ok);
    assert_eq!(unsafe { ihum_solver_solve(s) }, IhumStatus::Ok);
    let mut h = 1.0;
    unsafe { ihum_solver_control_norm(s, &mut h) };
    assert_eq!(h, 0.0);

    let ones = vec![1.0; n];
    assert_eq!(unsafe { ihum_solver_set_datum(s, ones.as_ptr(), n) }, IhumStatus::Ok);
    let mut iters = 0;
    assert_eq!(unsafe { ihum_solver_iterations(s, &mut iters) }, IhumStatus::NotSolved);
    assert_eq!(unsafe { ihum_solver_solve(s) }, IhumStatus::Ok);
    unsafe { ihum_solver_control_norm(s, &mut h) };
    assert!(h > 0.0);
    unsafe { ihum_solver_free(s) };
}

#[test]
fn error_paths() {
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { ihum_solver_new(ptr::null(), &mut s) }, IhumStatus::NullPointer);
    assert!(s.is_null());

    let bad = IhumConfig {
        tau: 0.5,
        ..default_config()
    };
    assert_eq!(unsafe { ihum_solver_new(&bad, &mut s) }, IhumStatus::InvalidProblem);
    assert!(!last_error().is_empty());

    let bad = IhumConfig {
        omega_start: 0.9,
        omega_end: 0.1,
        ..default_config()
    };
    assert_eq!(unsafe { ihum_solver_new(&bad, &mut s) }, IhumStatus::InvalidArgument);
    assert!(last_error().contains("interval"));

    let s = new_solver(&default_config());
    let mut x = 0.0;
    assert_eq!(unsafe { ihum_solver_final_norm(s, &mut x) }, IhumStatus::NotSolved);
    let short = [1.0; 3];
    assert_eq!(unsafe { ihum_solver_set_datum(s, short.as_ptr(), 3) }, IhumStatus::InvalidArgument);
    assert!(last_error().contains("layout mismatch"));

    assert_eq!(unsafe { ihum_solver_solve(s) }, IhumStatus::Ok);
    let mut buf = [0.0; 2];
    assert_eq!(unsafe { ihum_solver_copy_control(s, buf.as_mut_ptr(), 2) }, IhumStatus::BufferTooSmall);
    assert_eq!(unsafe { ihum_solver_final_norm(s, ptr::null_mut()) }, IhumStatus::NullPointer);
    unsafe {
        ihum_solver_free(s);
        ihum_solver_free(ptr::null_mut());
    }
}

#[test]
fn header_is_valid_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/impulse_hum.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for sym in [
        "ihum_config_default",
        "ihum_solver_new",
        "ihum_solver_free",
        "ihum_solver_set_datum",
        "ihum_solver_solve",
        "ihum_solver_copy_control",
        "ihum_last_error",
        "typedef struct IhumSolver IhumSolver;",
        "IHUM_STATUS_OK = 0",
    ] {
        assert!(text.contains(sym), "header lacks {sym}");
    }
    let Ok(status) = Command::new("cc")
        .args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c"])
        .arg(&header)
        .status()
    else {
        eprintln!("cc not available, skipping syntax check");
        return;
    };
    assert!(status.success());
}
