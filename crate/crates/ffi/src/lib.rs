//! C ABI for the impulse-hum solver.
//!
//! A solver is created from an [`IhumConfig`], optionally given a custom
//! initial datum, solved, and then queried. Every function returns an
//! [`IhumStatus`]; on failure a description is available from
//! [`ihum_last_error`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use impulse_hum::experiment::build_problem;
use impulse_hum::{
    cg_solve, masked_norm, simulate_controlled, BcKind, CgReport, ExperimentConfig, Field, HumError, HumProblem,
    PropagatorScheme,
};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IhumStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidProblem = 3,
    Breakdown = 4,
    BufferTooSmall = 5,
    NotSolved = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IhumBc {
    Dirichlet = 0,
    Neumann = 1,
    Dynamic = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IhumScheme {
    MatrixExponential = 0,
    CrankNicolson = 1,
}

/// Problem parameters. Obtain defaults from [`ihum_config_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct IhumConfig {
    pub bc: IhumBc,
    pub final_time: f64,
    pub tau: f64,
    pub omega_start: f64,
    pub omega_end: f64,
    pub n_x: usize,
    pub eps: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub scheme: IhumScheme,
    /// Time step, used only by `IHUM_SCHEME_CRANK_NICOLSON`.
    pub dt: f64,
}

/// Opaque solver handle.
pub struct IhumSolver {
    problem: HumProblem,
    solution: Option<Solution>,
}

struct Solution {
    report: CgReport,
    final_state: Field,
    final_norm: f64,
    control_norm: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: IhumStatus, msg: impl Into<String>) -> IhumStatus {
    set_error(msg.into());
    status
}

fn status_of(err: &HumError) -> IhumStatus {
    match err {
        HumError::ZeroDirectionBreakdown { .. } | HumError::SingularStep => IhumStatus::Breakdown,
        HumError::InvalidProblem(_) | HumError::ProblemTooLarge { .. } => IhumStatus::InvalidProblem,
        _ => IhumStatus::InvalidArgument,
    }
}

fn guard(f: impl FnOnce() -> IhumStatus) -> IhumStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(IhumStatus::Panic, "internal panic"),
    }
}

fn try_hum<T>(r: impulse_hum::Result<T>) -> Result<T, IhumStatus> {
    r.map_err(|e| fail(status_of(&e), e.to_string()))
}

impl From<IhumBc> for BcKind {
    fn from(bc: IhumBc) -> Self {
        match bc {
            IhumBc::Dirichlet => BcKind::Dirichlet,
            IhumBc::Neumann => BcKind::Neumann,
            IhumBc::Dynamic => BcKind::Dynamic,
        }
    }
}

fn experiment_config(c: &IhumConfig) -> ExperimentConfig {
    let scheme = match c.scheme {
        IhumScheme::MatrixExponential => PropagatorScheme::MatrixExponential,
        IhumScheme::CrankNicolson => PropagatorScheme::CrankNicolson { dt: c.dt },
    };
    ExperimentConfig {
        bcs: vec![c.bc.into()],
        final_time: c.final_time,
        tau: c.tau,
        omega: (c.omega_start, c.omega_end),
        n_x: c.n_x,
        eps_list: vec![c.eps],
        tol: c.tol,
        max_iter: c.max_iter,
        scheme,
        ..ExperimentConfig::default()
    }
}

/// Fills `out` with the reference configuration (Dirichlet boundary).
///
/// # Safety
/// `out` must be null or point to writable memory for one `IhumConfig`.
#[no_mangle]
pub unsafe extern "C" fn ihum_config_default(out: *mut IhumConfig) -> IhumStatus {
    if out.is_null() {
        return fail(IhumStatus::NullPointer, "out is null");
    }
    let d = ExperimentConfig::default();
    out.write(IhumConfig {
        bc: IhumBc::Dirichlet,
        final_time: d.final_time,
        tau: d.tau,
        omega_start: d.omega.0,
        omega_end: d.omega.1,
        n_x: d.n_x,
        eps: d.eps_list.first().copied().unwrap_or(1e-2),
        tol: d.tol,
        max_iter: d.max_iter,
        scheme: IhumScheme::MatrixExponential,
        dt: impulse_hum::operators::DEFAULT_CN_DT,
    });
    IhumStatus::Ok
}

/// Creates a solver. On success `*out` receives a handle to release with
/// [`ihum_solver_free`].
///
/// # Safety
/// `config` must point to a valid `IhumConfig`; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ihum_solver_new(config: *const IhumConfig, out: *mut *mut IhumSolver) -> IhumStatus {
    guard(|| {
        if config.is_null() || out.is_null() {
            return fail(IhumStatus::NullPointer, "config or out is null");
        }
        let cfg = experiment_config(&*config);
        let (problem, _) = match try_hum(build_problem(&cfg, cfg.bcs[0], cfg.eps_list[0])) {
            Ok(p) => p,
            Err(s) => return s,
        };
        out.write(Box::into_raw(Box::new(IhumSolver {
            problem,
            solution: None,
        })));
        IhumStatus::Ok
    })
}

/// Releases a solver. Null is accepted.
///
/// # Safety
/// `solver` must be null or a handle from [`ihum_solver_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ihum_solver_free(solver: *mut IhumSolver) {
    if !solver.is_null() {
        drop(Box::from_raw(solver));
    }
}

/// Number of degrees of freedom of the discrete state.
///
/// # Safety
/// `solver` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ihum_solver_dof_count(solver: *const IhumSolver, out: *mut usize) -> IhumStatus {
    if solver.is_null() || out.is_null() {
        return fail(IhumStatus::NullPointer, "solver or out is null");
    }
    out.write((*solver).problem.generator().n_dof());
    IhumStatus::Ok
}

/// Replaces the initial datum with `len` values, one per degree of freedom.
/// Discards any previous solution.
///
/// # Safety
/// `solver` must be a live handle; `values` must point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ihum_solver_set_datum(solver: *mut IhumSolver, values: *const f64, len: usize) -> IhumStatus {
    guard(|| {
        if solver.is_null() || values.is_null() {
            return fail(IhumStatus::NullPointer, "solver or values is null");
        }
        let s = &mut *solver;
        let layout = s.problem.generator().layout;
        let data = std::slice::from_raw_parts(values, len).to_vec();
        let psi0 = match try_hum(Field::from_values(layout, data)) {
            Ok(f) => f,
            Err(st) => return st,
        };
        match try_hum(s.problem.with_psi0(psi0)) {
            Ok(p) => {
                s.problem = p;
                s.solution = None;
                IhumStatus::Ok
            }
            Err(st) => st,
        }
    })
}

/// Runs conjugate gradient and simulates the controlled state.
///
/// # Safety
/// `solver` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ihum_solver_solve(solver: *mut IhumSolver) -> IhumStatus {
    guard(|| {
        if solver.is_null() {
            return fail(IhumStatus::NullPointer, "solver is null");
        }
        let s = &mut *solver;
        let p = &s.problem;
        let run = || -> impulse_hum::Result<Solution> {
            let report = cg_solve(p)?;
            let final_state = simulate_controlled(p, &report.control, 2)?.final_state;
            let w = &p.generator().weights;
            Ok(Solution {
                final_norm: w.norm_of(&final_state)?,
                control_norm: masked_norm(w, p.mask(), &report.control)?,
                report,
                final_state,
            })
        };
        match try_hum(run()) {
            Ok(sol) => {
                s.solution = Some(sol);
                IhumStatus::Ok
            }
            Err(st) => st,
        }
    })
}

unsafe fn solution<'a>(solver: *const IhumSolver) -> Result<&'a Solution, IhumStatus> {
    if solver.is_null() {
        return Err(fail(IhumStatus::NullPointer, "solver is null"));
    }
    (*solver)
        .solution
        .as_ref()
        .ok_or_else(|| fail(IhumStatus::NotSolved, "ihum_solver_solve has not succeeded"))
}

unsafe fn write_out<T>(solver: *const IhumSolver, out: *mut T, get: impl FnOnce(&Solution) -> T) -> IhumStatus {
    if out.is_null() {
        return fail(IhumStatus::NullPointer, "out is null");
    }
    match solution(solver) {
        Ok(sol) => {
            out.write(get(sol));
            IhumStatus::Ok
        }
        Err(s) => s,
    }
}

/// # Safety
/// `solver` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ihum_solver_iterations(solver: *const IhumSolver, out: *mut usize) -> IhumStatus {
    write_out(solver, out, |s| s.report.iterations)
}

/// # Safety
/// `solver` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ihum_solver_converged(solver: *const IhumSolver, out: *mut bool) -> IhumStatus {
    write_out(solver, out, |s| s.report.converged)
}

/// Weighted L² norm of the controlled state at the final time.
///
/// # Safety
/// `solver` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ihum_solver_final_norm(solver: *const IhumSolver, out: *mut f64) -> IhumStatus {
    write_out(solver, out, |s| s.final_norm)
}

/// L² norm of the impulse over the control region.
///
/// # Safety
/// `solver` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ihum_solver_control_norm(solver: *const IhumSolver, out: *mut f64) -> IhumStatus {
    write_out(solver, out, |s| s.control_norm)
}

unsafe fn copy_field(src: &Field, buf: *mut f64, len: usize) -> IhumStatus {
    if buf.is_null() {
        return fail(IhumStatus::NullPointer, "buffer is null");
    }
    if len < src.len() {
        return fail(
            IhumStatus::BufferTooSmall,
            format!("buffer holds {len} values, need {}", src.len()),
        );
    }
    ptr::copy_nonoverlapping(src.values.as_ptr(), buf, src.len());
    IhumStatus::Ok
}

/// Copies the impulse control (one value per degree of freedom) into `buf`.
///
/// # Safety
/// `solver` must be a live handle; `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ihum_solver_copy_control(solver: *const IhumSolver, buf: *mut f64, len: usize) -> IhumStatus {
    match solution(solver) {
        Ok(s) => copy_field(&s.report.control, buf, len),
        Err(st) => st,
    }
}

/// Copies the controlled final state into `buf`.
///
/// # Safety
/// `solver` must be a live handle; `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ihum_solver_copy_final_state(
    solver: *const IhumSolver,
    buf: *mut f64,
    len: usize,
) -> IhumStatus {
    match solution(solver) {
        Ok(s) => copy_field(&s.final_state, buf, len),
        Err(st) => st,
    }
}

/// Message for the most recent failure on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ihum_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}
