//! Single runs, the (boundary condition × ε) matrix, the ordering summary
//! and the empirical fit of the control-norm blow-up `‖h‖ ~ ε^{−δ}`.

use std::fs;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::{ExperimentConfig, InitialDatum};
use crate::error::{HumError, Result};
use crate::grid::{build_grid, build_mask, masked_norm, BcKind, Field, GridSpec};
use crate::hum::{cg_solve, euler_lagrange_residual, simulate_controlled, CgReport, HumProblem, Trajectory};
use crate::operators::assemble_generator;

/// Random test directions drawn per run for the Euler–Lagrange diagnostic.
const EL_PROBES: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRow {
    pub bc: BcKind,
    pub eps: f64,
    pub n_iter: usize,
    /// `‖Ψ(T)‖` of the simulated controlled trajectory.
    pub final_norm: f64,
    /// `‖h‖_{L²(ω)}`.
    pub control_norm: f64,
    pub converged: bool,
    pub wall_time: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub row: ExperimentRow,
    pub report: CgReport,
    pub controlled: Trajectory,
    pub uncontrolled: Trajectory,
    pub grid: GridSpec,
    /// `max |EL(z)| / (‖g₀‖‖z‖)` over seeded random directions `z`.
    pub euler_lagrange_ratio: f64,
}

/// Samples the configured datum on the DOFs of `layout`.
pub fn make_initial_datum(config: &ExperimentConfig, grid: &GridSpec, bc: BcKind) -> Result<Field> {
    let (layout, _) = crate::grid::build_layout(grid, bc);
    match &config.initial_datum {
        InitialDatum::Sine => Ok(Field::from_fn(layout, |i| {
            let x = grid.node(layout.node_of(i));
            2f64.sqrt() * (std::f64::consts::PI * x).sin()
        })),
        InitialDatum::Constant(c) => Ok(Field::from_fn(layout, |_| *c)),
        InitialDatum::Custom(path) => {
            let err = |message: String| HumError::DatumFile {
                path: path.clone(),
                message,
            };
            let text = fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
            let values = text
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty())
                .enumerate()
                .map(|(k, l)| {
                    l.parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| err(format!("line {}: '{l}' is not a finite number", k + 1)))
                })
                .collect::<Result<Vec<f64>>>()?;
            // either one value per DOF, or one per grid node
            let dof_values = if values.len() == layout.n_dof {
                values
            } else if values.len() == grid.n_x + 1 {
                (0..layout.n_dof).map(|i| values[layout.node_of(i)]).collect()
            } else {
                return Err(err(format!(
                    "expected {} (dofs) or {} (nodes) values, found {}",
                    layout.n_dof,
                    grid.n_x + 1,
                    values.len()
                )));
            };
            Field::from_values(layout, dof_values)
        }
    }
}

/// Builds the problem for one boundary condition at the first ε of the config.
pub fn build_problem(config: &ExperimentConfig, bc: BcKind, eps: f64) -> Result<(HumProblem, GridSpec)> {
    let grid = build_grid(config.domain.0, config.domain.1, config.n_x)?;
    let gen = assemble_generator(&grid, bc)?;
    let mask = build_mask(&grid, &gen.layout, config.omega.0, config.omega.1)?;
    let psi0 = make_initial_datum(config, &grid, bc)?;
    let problem = HumProblem::builder(gen, mask, psi0)
        .final_time(config.final_time)
        .impulse_time(config.tau)
        .eps(eps)
        .tol(config.tol)
        .max_iter(config.max_iter)
        .scheme(config.scheme)
        .build()?;
    Ok((problem, grid))
}

fn probe_seed(seed: u64, bc: BcKind, eps: f64) -> u64 {
    let tag = match bc {
        BcKind::Dirichlet => 1u64,
        BcKind::Neumann => 2,
        BcKind::Dynamic => 3,
    };
    seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ eps.to_bits().rotate_left(17)
}

pub fn run_single(config: &ExperimentConfig, bc: BcKind, eps: f64) -> Result<RunOutcome> {
    let start = Instant::now();
    let (problem, grid) = build_problem(config, bc, eps)?;
    let report = cg_solve(&problem)?;
    let controlled = simulate_controlled(&problem, &report.control, config.snapshots)?;
    let uncontrolled = simulate_controlled(&problem, &Field::zeros(problem.generator().layout), config.snapshots)?;
    let wall_time = start.elapsed().as_secs_f64();

    let weights = &problem.generator().weights;
    let final_norm = weights.norm_of(&controlled.final_state)?;
    let control_norm = masked_norm(weights, problem.mask(), &report.control)?;

    let mut rng = ChaCha8Rng::seed_from_u64(probe_seed(config.seed, bc, eps));
    let g0 = report.initial_residual_norm();
    let mut euler_lagrange_ratio = 0.0f64;
    if g0 > 0.0 {
        for _ in 0..EL_PROBES {
            let z = Field::from_fn(problem.generator().layout, |_| rng.gen_range(-1.0..1.0));
            let zn = weights.norm_of(&z)?;
            let el = euler_lagrange_residual(&problem, &report.f_star, &z)?;
            euler_lagrange_ratio = euler_lagrange_ratio.max(el.abs() / (g0 * zn));
        }
    }

    Ok(RunOutcome {
        row: ExperimentRow {
            bc,
            eps,
            n_iter: report.iterations,
            final_norm,
            control_norm,
            converged: report.converged,
            wall_time,
        },
        report,
        controlled,
        uncontrolled,
        grid,
        euler_lagrange_ratio,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderingCheck {
    pub eps: f64,
    /// e.g. `final_norm dirichlet < dynamic`.
    pub label: String,
    pub holds: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct OrderingSummary {
    pub checks: Vec<OrderingCheck>,
}

impl OrderingSummary {
    pub fn all_hold(&self) -> bool {
        self.checks.iter().all(|c| c.holds)
    }
}

#[derive(Debug, Clone)]
pub struct MatrixOutcome {
    pub runs: Vec<RunOutcome>,
    pub ordering: OrderingSummary,
}

impl MatrixOutcome {
    pub fn rows(&self) -> Vec<ExperimentRow> {
        self.runs.iter().map(|r| r.row.clone()).collect()
    }

    pub fn rows_for(&self, bc: BcKind) -> Vec<ExperimentRow> {
        self.runs.iter().filter(|r| r.row.bc == bc).map(|r| r.row.clone()).collect()
    }
}

/// Every (bc, ε) cell of the config; the returned order is (bc, ε) as
/// listed, independent of completion order.
pub fn run_matrix(config: &ExperimentConfig) -> Result<MatrixOutcome> {
    let cells: Vec<(BcKind, f64)> = config
        .bcs
        .iter()
        .flat_map(|bc| config.eps_list.iter().map(move |eps| (*bc, *eps)))
        .collect();
    let runs = cells
        .par_iter()
        .map(|(bc, eps)| run_single(config, *bc, *eps))
        .collect::<Result<Vec<_>>>()?;
    let rows: Vec<ExperimentRow> = runs.iter().map(|r| r.row.clone()).collect();
    let ordering = ordering_summary(&rows);
    Ok(MatrixOutcome { runs, ordering })
}

type Metric = fn(&ExperimentRow) -> f64;

/// At each ε where all three boundary conditions ran, checks
/// `‖Ψ_D(T)‖ < ‖Ψ_Dyn(T)‖ < ‖Ψ_N(T)‖` and `‖h_D‖ < ‖h_Dyn‖ < ‖h_N‖`,
/// one entry per comparison.
pub fn ordering_summary(rows: &[ExperimentRow]) -> OrderingSummary {
    let mut eps_values: Vec<f64> = rows.iter().map(|r| r.eps).collect();
    eps_values.sort_by(|a, b| b.total_cmp(a));
    eps_values.dedup();
    let find = |bc: BcKind, eps: f64| rows.iter().find(|r| r.bc == bc && r.eps == eps);

    let mut checks = Vec::new();
    for eps in eps_values {
        let (Some(d), Some(y), Some(n)) = (
            find(BcKind::Dirichlet, eps),
            find(BcKind::Dynamic, eps),
            find(BcKind::Neumann, eps),
        ) else {
            continue;
        };
        let pairs: [(&str, &ExperimentRow, &ExperimentRow, Metric); 4] = [
            ("final_norm dirichlet < dynamic", d, y, |r| r.final_norm),
            ("final_norm dynamic < neumann", y, n, |r| r.final_norm),
            ("control_norm dirichlet < dynamic", d, y, |r| r.control_norm),
            ("control_norm dynamic < neumann", y, n, |r| r.control_norm),
        ];
        for (label, lo, hi, metric) in pairs {
            checks.push(OrderingCheck {
                eps,
                label: label.to_owned(),
                holds: metric(lo) < metric(hi),
            });
        }
    }
    OrderingSummary { checks }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostFit {
    pub bc: BcKind,
    pub delta_hat: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// `(ε, ‖h‖)`, sorted by decreasing ε.
    pub points: Vec<(f64, f64)>,
}

/// Least-squares slope of `log₁₀‖h‖` against `log₁₀(1/ε)`.
pub fn fit_cost_exponent(rows: &[ExperimentRow]) -> Result<CostFit> {
    if rows.len() < 2 {
        return Err(HumError::InsufficientData(format!("need at least 2 rows, got {}", rows.len())));
    }
    let bc = rows[0].bc;
    if rows.iter().any(|r| r.bc != bc) {
        return Err(HumError::InsufficientData("rows mix boundary conditions".into()));
    }
    if let Some(r) = rows.iter().find(|r| !r.converged) {
        return Err(HumError::InsufficientData(format!("run at eps = {} did not converge", r.eps)));
    }
    if let Some(r) = rows.iter().find(|r| !(r.control_norm > 0.0 && r.eps > 0.0)) {
        return Err(HumError::InsufficientData(format!(
            "non-positive control norm or eps at eps = {}",
            r.eps
        )));
    }
    let mut points: Vec<(f64, f64)> = rows.iter().map(|r| (r.eps, r.control_norm)).collect();
    points.sort_by(|a, b| b.0.total_cmp(&a.0));
    if points.windows(2).any(|w| w[0].0 == w[1].0) {
        return Err(HumError::InsufficientData("eps values must be distinct".into()));
    }

    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|(e, _)| (1.0 / e).log10()).collect();
    let ys: Vec<f64> = points.iter().map(|(_, h)| h.log10()).collect();
    let x_mean = xs.iter().sum::<f64>() / n;
    let y_mean = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - x_mean).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - x_mean) * (y - y_mean)).sum();
    let syy: f64 = ys.iter().map(|y| (y - y_mean).powi(2)).sum();
    let delta_hat = sxy / sxx;
    let intercept = y_mean - delta_hat * x_mean;
    let ss_res: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - delta_hat * x).powi(2)).sum();
    // a flat series is fitted exactly
    let r_squared = if syy == 0.0 { 1.0 } else { (1.0 - ss_res / syy).clamp(0.0, 1.0) };
    Ok(CostFit {
        bc,
        delta_hat,
        intercept,
        r_squared,
        points,
    })
}
