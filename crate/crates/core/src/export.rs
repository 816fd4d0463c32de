//! CSV output. Reals are written with 17 significant digits so that
//! identical runs produce identical bytes.
//!
//! A matrix with a single cell writes every file straight into the output
//! directory; larger matrices put the per-run files into one
//! `<bc>_eps_<ε>/` subdirectory per cell, next to the shared `table.csv`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{HumError, Result};
use crate::experiment::{CostFit, ExperimentRow, RunOutcome};
use crate::grid::{Field, GridSpec};
use crate::hum::Trajectory;

pub const TABLE_HEADER: &str = "bc,epsilon,n_iter,final_norm,control_norm,converged,wall_time_s";
pub const CONTROL_HEADER: &str = "x,dof_kind,h";
pub const TRAJECTORY_HEADER: &str = "t,phase,x,dof_kind,value";
pub const RESIDUALS_HEADER: &str = "k,residual_norm,cost";
pub const COSTFIT_HEADER: &str = "bc,delta_hat,intercept,r_squared";

pub fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}

fn dof_kind(field: &Field, i: usize) -> &'static str {
    if field.layout.is_boundary_dof(i) {
        "boundary"
    } else {
        "interior"
    }
}

pub fn table_csv(rows: &[ExperimentRow], record_timing: bool) -> String {
    let mut s = String::from(TABLE_HEADER);
    s.push('\n');
    for r in rows {
        let wall = if record_timing { r.wall_time } else { 0.0 };
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            r.bc,
            fmt_real(r.eps),
            r.n_iter,
            fmt_real(r.final_norm),
            fmt_real(r.control_norm),
            r.converged,
            fmt_real(wall)
        );
    }
    s
}

pub fn control_csv(grid: &GridSpec, control: &Field) -> String {
    let mut s = String::from(CONTROL_HEADER);
    s.push('\n');
    for (i, h) in control.values.iter().enumerate() {
        let x = grid.node(control.layout.node_of(i));
        let _ = writeln!(s, "{},{},{}", fmt_real(x), dof_kind(control, i), fmt_real(*h));
    }
    s
}

pub fn trajectory_csv(grid: &GridSpec, traj: &Trajectory) -> String {
    let mut s = String::from(TRAJECTORY_HEADER);
    s.push('\n');
    for ((t, phase), state) in traj.times.iter().zip(&traj.phases).zip(&traj.states) {
        let t = fmt_real(*t);
        for (i, v) in state.values.iter().enumerate() {
            let x = grid.node(state.layout.node_of(i));
            let _ = writeln!(s, "{},{},{},{},{}", t, phase.name(), fmt_real(x), dof_kind(state, i), fmt_real(*v));
        }
    }
    s
}

pub fn residuals_csv(run: &RunOutcome) -> String {
    let mut s = String::from(RESIDUALS_HEADER);
    s.push('\n');
    let r = &run.report;
    for (k, (g, j)) in r.residual_history.iter().zip(&r.cost_history).enumerate() {
        let _ = writeln!(s, "{},{},{}", k, fmt_real(*g), fmt_real(*j));
    }
    s
}

pub fn costfit_csv(fits: &[CostFit]) -> String {
    let mut s = String::from(COSTFIT_HEADER);
    s.push('\n');
    for f in fits {
        let _ = writeln!(
            s,
            "{},{},{},{}",
            f.bc,
            fmt_real(f.delta_hat),
            fmt_real(f.intercept),
            fmt_real(f.r_squared)
        );
    }
    s
}

fn write(path: PathBuf, contents: &str, written: &mut Vec<PathBuf>) -> Result<()> {
    fs::write(&path, contents).map_err(|e| HumError::io(&path, e))?;
    written.push(path);
    Ok(())
}

pub fn run_dir_name(row: &ExperimentRow) -> String {
    format!("{}_eps_{:e}", row.bc, row.eps)
}

/// Writes every CSV for `runs` (and `fits`, if any) and returns the paths written.
pub fn export_results(runs: &[RunOutcome], fits: &[CostFit], output_dir: &Path, record_timing: bool) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(output_dir).map_err(|e| HumError::io(output_dir, e))?;
    let mut written = Vec::new();
    let rows: Vec<ExperimentRow> = runs.iter().map(|r| r.row.clone()).collect();
    write(output_dir.join("table.csv"), &table_csv(&rows, record_timing), &mut written)?;

    for run in runs {
        let dir = if runs.len() == 1 {
            output_dir.to_path_buf()
        } else {
            let d = output_dir.join(run_dir_name(&run.row));
            fs::create_dir_all(&d).map_err(|e| HumError::io(&d, e))?;
            d
        };
        write(dir.join("control.csv"), &control_csv(&run.grid, &run.report.control), &mut written)?;
        write(
            dir.join("trajectory_controlled.csv"),
            &trajectory_csv(&run.grid, &run.controlled),
            &mut written,
        )?;
        write(
            dir.join("trajectory_uncontrolled.csv"),
            &trajectory_csv(&run.grid, &run.uncontrolled),
            &mut written,
        )?;
        write(dir.join("residuals.csv"), &residuals_csv(run), &mut written)?;
    }

    if !fits.is_empty() {
        write(output_dir.join("costfit.csv"), &costfit_csv(fits), &mut written)?;
    }
    Ok(written)
}
