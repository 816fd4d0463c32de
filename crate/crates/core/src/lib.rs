//! Null-approximate impulse controls for the 1-D heat equation.
//!
//! The crate discretises the heat equation by the method of lines under
//! Dirichlet, Neumann or dynamic (Wentzell) boundary conditions, and computes
//! the penalized HUM impulse control by conjugate gradient on the Gramian
//! system `(Λ_τ + εI) f = −e^{TA}Ψ⁰`.

pub mod error;
pub mod grid;
pub mod hum;
pub mod operators;

pub use error::{HumError, Result};
pub use grid::{
    build_grid, build_layout, build_mask, inner_product, masked_norm, BcKind, ControlMask, DofLayout, Field,
    GridSpec, QuadratureWeights,
};
pub use hum::{
    apply_gramian, cg_solve, compute_rhs, dense_gramian_oracle, euler_lagrange_residual, evaluate_cost,
    simulate_controlled, CgReport, HumProblem, HumProblemBuilder, Phase, Trajectory,
};
pub use operators::{apply_control_operator, assemble_generator, propagate, Generator, Propagator, PropagatorScheme};

pub mod config;
pub mod experiment;
pub mod export;

pub use config::{parse_args, parse_config, CliArgs, ExperimentConfig, InitialDatum};
pub use experiment::{
    fit_cost_exponent, make_initial_datum, ordering_summary, run_matrix, run_single, CostFit, ExperimentRow,
    MatrixOutcome, OrderingSummary, RunOutcome,
};
pub use export::export_results;
