//! Penalized HUM for impulse controls.
//!
//! For a datum `Ψ⁰` the minimiser `f*` of
//!
//! ```text
//! J_ε(f) = ½‖B e^{(T−τ)A} f‖² + (ε/2)‖f‖² + ⟨Ψ⁰, e^{TA} f⟩
//! ```
//!
//! solves `(Λ_τ + εI) f = −e^{TA}Ψ⁰` with the Gramian
//! `Λ_τ = e^{(T−τ)A} B e^{(T−τ)A}`. The impulse applied at `τ` is then
//! `ĥ = B e^{(T−τ)A} f*`, and the controlled final state equals `−ε f*` up
//! to the CG residual.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{HumError, Result};
use crate::grid::{masked_norm, ControlMask, Field};
use crate::operators::{restrict, Generator, Propagator, PropagatorScheme};

pub const DEFAULT_TOL: f64 = 1e-3;
pub const DEFAULT_MAX_ITER: usize = 1000;
/// Size guard for [`dense_gramian_oracle`].
pub const ORACLE_MAX_DOF: usize = 64;

/// Problem data together with the three propagators it needs
/// (`e^{τA}`, `e^{(T−τ)A}` and `e^{TA}`).
#[derive(Debug, Clone)]
pub struct HumProblem {
    gen: Arc<Generator>,
    mask: ControlMask,
    final_time: f64,
    tau: f64,
    eps: f64,
    tol: f64,
    max_iter: usize,
    scheme: PropagatorScheme,
    psi0: Field,
    to_impulse: Arc<Propagator>,
    after_impulse: Arc<Propagator>,
    full: Arc<Propagator>,
}

#[derive(Debug, Clone)]
pub struct HumProblemBuilder {
    gen: Arc<Generator>,
    mask: ControlMask,
    psi0: Field,
    final_time: f64,
    tau: f64,
    eps: f64,
    tol: f64,
    max_iter: usize,
    scheme: Option<PropagatorScheme>,
}

impl HumProblemBuilder {
    pub fn final_time(mut self, t: f64) -> Self {
        self.final_time = t;
        self
    }

    pub fn impulse_time(mut self, tau: f64) -> Self {
        self.tau = tau;
        self
    }

    pub fn eps(mut self, eps: f64) -> Self {
        self.eps = eps;
        self
    }

    pub fn tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn scheme(mut self, scheme: PropagatorScheme) -> Self {
        self.scheme = Some(scheme);
        self
    }

    pub fn build(self) -> Result<HumProblem> {
        let HumProblemBuilder {
            gen,
            mask,
            psi0,
            final_time,
            tau,
            eps,
            tol,
            max_iter,
            scheme,
        } = self;
        if !(final_time > 0.0 && final_time.is_finite()) {
            return Err(HumError::InvalidProblem(format!("T must be positive, got {final_time}")));
        }
        if !(tau > 0.0 && tau < final_time) {
            return Err(HumError::InvalidProblem(format!(
                "impulse time must satisfy 0 < tau < T, got tau = {tau}, T = {final_time}"
            )));
        }
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(HumError::InvalidProblem(format!("eps must be positive, got {eps}")));
        }
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(HumError::InvalidProblem(format!("tol must be positive, got {tol}")));
        }
        if max_iter == 0 {
            return Err(HumError::InvalidProblem("max_iter must be at least 1".into()));
        }
        psi0.check_layout(&gen.layout)?;
        if mask.layout != gen.layout {
            return Err(HumError::LayoutMismatch {
                expected: gen.layout.n_dof,
                actual: mask.indicator.len(),
            });
        }
        if psi0.values.iter().any(|v| !v.is_finite()) {
            return Err(HumError::InvalidProblem("initial datum has non-finite entries".into()));
        }
        let scheme = scheme.unwrap_or_else(|| PropagatorScheme::default_for(gen.n_dof()));
        let to_impulse = Arc::new(gen.propagator(tau, scheme)?);
        let after_impulse = Arc::new(gen.propagator(final_time - tau, scheme)?);
        let full = Arc::new(gen.propagator(final_time, scheme)?);
        Ok(HumProblem {
            gen,
            mask,
            final_time,
            tau,
            eps,
            tol,
            max_iter,
            scheme,
            psi0,
            to_impulse,
            after_impulse,
            full,
        })
    }
}

impl HumProblem {
    /// Starts a builder with `T = 0.02`, `τ = 0.01`, `ε = 1e−2`, `tol = 1e−3`.
    pub fn builder(gen: impl Into<Arc<Generator>>, mask: ControlMask, psi0: Field) -> HumProblemBuilder {
        HumProblemBuilder {
            gen: gen.into(),
            mask,
            psi0,
            final_time: 0.02,
            tau: 0.01,
            eps: 1e-2,
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            scheme: None,
        }
    }

    pub fn generator(&self) -> &Generator {
        &self.gen
    }

    pub fn mask(&self) -> &ControlMask {
        &self.mask
    }

    pub fn final_time(&self) -> f64 {
        self.final_time
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn max_iter(&self) -> usize {
        self.max_iter
    }

    pub fn scheme(&self) -> PropagatorScheme {
        self.scheme
    }

    pub fn psi0(&self) -> &Field {
        &self.psi0
    }

    /// Same problem with another penalization; propagators are shared.
    pub fn with_eps(&self, eps: f64) -> Result<HumProblem> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(HumError::InvalidProblem(format!("eps must be positive, got {eps}")));
        }
        Ok(HumProblem { eps, ..self.clone() })
    }

    pub fn with_tol(&self, tol: f64, max_iter: usize) -> Result<HumProblem> {
        if !(tol > 0.0 && tol.is_finite()) || max_iter == 0 {
            return Err(HumError::InvalidProblem(format!(
                "need tol > 0 and max_iter > 0, got {tol}, {max_iter}"
            )));
        }
        Ok(HumProblem {
            tol,
            max_iter,
            ..self.clone()
        })
    }

    pub fn with_psi0(&self, psi0: Field) -> Result<HumProblem> {
        psi0.check_layout(&self.gen.layout)?;
        Ok(HumProblem { psi0, ..self.clone() })
    }

    fn dot(&self, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
        self.gen.weights.dot(u, v)
    }

    fn norm(&self, u: &DVector<f64>) -> f64 {
        self.gen.weights.norm(u)
    }

    fn gramian_raw(&self, rho: &DVector<f64>) -> Result<DVector<f64>> {
        let forward = self.after_impulse.apply_raw(rho)?;
        let observed = restrict(&self.mask, &forward);
        self.after_impulse.apply_raw(&observed)
    }

    fn field(&self, values: DVector<f64>) -> Field {
        Field {
            layout: self.gen.layout,
            values,
        }
    }

    /// `e^{(T−τ)A}` applied to a field.
    pub fn propagate_after_impulse(&self, u: &Field) -> Result<Field> {
        self.after_impulse.apply(u)
    }

    /// `e^{TA}` applied to a field.
    pub fn propagate_full(&self, u: &Field) -> Result<Field> {
        self.full.apply(u)
    }
}

/// `Λ_τ ρ = e^{(T−τ)A} B e^{(T−τ)A} ρ`.
pub fn apply_gramian(p: &HumProblem, rho: &Field) -> Result<Field> {
    rho.check_layout(&p.gen.layout)?;
    Ok(p.field(p.gramian_raw(&rho.values)?))
}

/// Right-hand side `−e^{TA}Ψ⁰` of the optimality system.
pub fn compute_rhs(p: &HumProblem) -> Result<Field> {
    Ok(p.field(-p.full.apply_raw(&p.psi0.values)?))
}

#[derive(Debug, Clone)]
pub struct CgReport {
    pub f_star: Field,
    /// `ĥ = B e^{(T−τ)A} f*`.
    pub control: Field,
    pub iterations: usize,
    /// `‖g_k‖` for `k = 0 ..= iterations`.
    pub residual_history: Vec<f64>,
    /// `J_ε(f_k)` for `k = 0 ..= iterations`.
    pub cost_history: Vec<f64>,
    /// `⟨g_k, g_{k−1}⟩ / (‖g_k‖‖g_{k−1}‖)` for `k = 1 ..= iterations`.
    pub residual_cosines: Vec<f64>,
    pub converged: bool,
    pub final_relative_residual: f64,
    /// Last recursively updated residual `g*`.
    pub final_residual: Field,
}

impl CgReport {
    pub fn initial_residual_norm(&self) -> f64 {
        self.residual_history.first().copied().unwrap_or(0.0)
    }

    pub fn final_residual_norm(&self) -> f64 {
        self.residual_history.last().copied().unwrap_or(0.0)
    }
}

/// Conjugate gradient on `(Λ_τ + εI) f = −e^{TA}Ψ⁰`, starting from `f₀ = 0`,
/// with every product taken in the weighted L² of the layout.
pub fn cg_solve(p: &HumProblem) -> Result<CgReport> {
    let n = p.gen.n_dof();
    let layout = p.gen.layout;
    if p.psi0.is_zero() {
        let zero = Field::zeros(layout);
        return Ok(CgReport {
            f_star: zero.clone(),
            control: zero.clone(),
            iterations: 0,
            residual_history: vec![0.0],
            cost_history: vec![0.0],
            residual_cosines: Vec::new(),
            converged: true,
            final_relative_residual: 0.0,
            final_residual: zero,
        });
    }

    let eps = p.eps;
    let mut f = DVector::<f64>::zeros(n);
    let target = p.full.apply_raw(&p.psi0.values)?;
    // g₀ = ε f₀ + Λ f₀ + e^{TA}Ψ⁰
    let mut g = &f * eps + p.gramian_raw(&f)? + &target;
    let mut w = g.clone();
    let mut g_sq = p.dot(&g, &g);
    let g0_norm = g_sq.sqrt();

    let mut residual_history = vec![g0_norm];
    let mut cost_history = vec![evaluate_cost(p, &p.field(f.clone()))?];
    let mut residual_cosines = Vec::new();
    let mut converged = false;
    let mut relative = 1.0;
    let mut k = 0;

    while k < p.max_iter {
        k += 1;
        let g_bar = &w * eps + p.gramian_raw(&w)?;
        let curvature = p.dot(&g_bar, &w);
        if curvature.is_nan() || curvature <= 0.0 {
            return Err(HumError::ZeroDirectionBreakdown {
                iteration: k,
                curvature,
            });
        }
        let rho = g_sq / curvature;
        f.axpy(-rho, &w, 1.0);
        let g_next = &g - &g_bar * rho;
        let g_next_sq = p.dot(&g_next, &g_next);
        let g_next_norm = g_next_sq.sqrt();

        residual_cosines.push(p.dot(&g_next, &g) / (g_next_norm * g_sq.sqrt()));
        residual_history.push(g_next_norm);
        cost_history.push(evaluate_cost(p, &p.field(f.clone()))?);

        relative = g_next_norm / g0_norm;
        if relative <= p.tol {
            g = g_next;
            converged = true;
            break;
        }
        let gamma = g_next_sq / g_sq;
        g = g_next;
        g_sq = g_next_sq;
        w = &g + &w * gamma;
    }

    let control = restrict(&p.mask, &p.after_impulse.apply_raw(&f)?);
    Ok(CgReport {
        f_star: p.field(f),
        control: p.field(control),
        iterations: k,
        residual_history,
        cost_history,
        residual_cosines,
        converged,
        final_relative_residual: relative,
        final_residual: p.field(g),
    })
}

/// `J_ε(f) = ½‖B e^{(T−τ)A} f‖² + (ε/2)‖f‖² + ⟨Ψ⁰, e^{TA} f⟩`.
pub fn evaluate_cost(p: &HumProblem, f: &Field) -> Result<f64> {
    f.check_layout(&p.gen.layout)?;
    let w = &p.gen.weights;
    let observed = p.after_impulse.apply(f)?;
    let observation = masked_norm(w, &p.mask, &observed)?;
    let penalty = p.norm(&f.values);
    let final_state = p.full.apply_raw(&f.values)?;
    Ok(0.5 * observation * observation + 0.5 * p.eps * penalty * penalty + p.dot(&p.psi0.values, &final_state))
}

/// Left-hand side of the Euler–Lagrange equation tested against `z0`:
/// `⟨B e^{(T−τ)A} f*, e^{(T−τ)A} z0⟩ + ε⟨f*, z0⟩ + ⟨Ψ⁰, e^{TA} z0⟩`.
pub fn euler_lagrange_residual(p: &HumProblem, f_star: &Field, z0: &Field) -> Result<f64> {
    f_star.check_layout(&p.gen.layout)?;
    z0.check_layout(&p.gen.layout)?;
    let observed = restrict(&p.mask, &p.after_impulse.apply_raw(&f_star.values)?);
    let z_half = p.after_impulse.apply_raw(&z0.values)?;
    let z_final = p.full.apply_raw(&z0.values)?;
    Ok(p.dot(&observed, &z_half) + p.eps * p.dot(&f_star.values, &z0.values) + p.dot(&p.psi0.values, &z_final))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    /// Before the impulse (`t < τ`, and `τ⁻` itself).
    Pre,
    /// At or after the impulse.
    Post,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::Pre => "pre",
            Phase::Post => "post",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub phases: Vec<Phase>,
    pub states: Vec<Field>,
    pub final_state: Field,
}

impl Trajectory {
    fn index_of(&self, t: f64, phase: Phase) -> Option<usize> {
        self.times
            .iter()
            .zip(&self.phases)
            .position(|(ti, ph)| *ti == t && *ph == phase)
    }

    /// `Ψ(τ⁻)`.
    pub fn before_impulse(&self, tau: f64) -> Option<&Field> {
        self.index_of(tau, Phase::Pre).map(|i| &self.states[i])
    }

    /// `Ψ(τ)`, the state right after the jump.
    pub fn after_impulse(&self, tau: f64) -> Option<&Field> {
        self.index_of(tau, Phase::Post).map(|i| &self.states[i])
    }
}

/// Mild solution with one impulse: `Ψ(t) = e^{tA}Ψ⁰ + 𝟙_{t≥τ} e^{(t−τ)A} B h`.
///
/// Samples `n_snapshots` uniform instants in `[0, T]` plus `0`, `τ⁻`, `τ`, `T`.
pub fn simulate_controlled(p: &HumProblem, h: &Field, n_snapshots: usize) -> Result<Trajectory> {
    h.check_layout(&p.gen.layout)?;
    let tau = p.tau;
    let t_final = p.final_time;

    let mut instants: Vec<(f64, Phase)> = vec![(0.0, Phase::Pre), (tau, Phase::Pre), (tau, Phase::Post), (t_final, Phase::Post)];
    if n_snapshots >= 2 {
        let step = t_final / (n_snapshots - 1) as f64;
        for i in 0..n_snapshots {
            let t = if i + 1 == n_snapshots { t_final } else { i as f64 * step };
            // anything landing on τ is already covered by τ⁻/τ
            if (t - tau).abs() <= 1e-12 * t_final {
                continue;
            }
            let phase = if t < tau { Phase::Pre } else { Phase::Post };
            instants.push((t, phase));
        }
    } else if n_snapshots == 1 {
        instants.push((t_final, Phase::Post));
    }
    instants.sort_by(|a, b| a.0.total_cmp(&b.0).then((a.1 == Phase::Post).cmp(&(b.1 == Phase::Post))));
    instants.dedup_by(|a, b| a.1 == b.1 && (a.0 - b.0).abs() <= 1e-12 * t_final);

    let pre_impulse = p.to_impulse.apply_raw(&p.psi0.values)?;
    let jump = restrict(&p.mask, &h.values);
    let post_impulse = &pre_impulse + &jump;
    let final_state = p.after_impulse.apply_raw(&post_impulse)?;

    let gen = &p.gen;
    let mut times = Vec::with_capacity(instants.len());
    let mut phases = Vec::with_capacity(instants.len());
    let mut states = Vec::with_capacity(instants.len());
    for (t, phase) in instants {
        let values = match phase {
            Phase::Pre if t == 0.0 => p.psi0.values.clone(),
            Phase::Pre if t == tau => pre_impulse.clone(),
            Phase::Pre => gen.propagator(t, p.scheme)?.apply_raw(&p.psi0.values)?,
            Phase::Post if t == tau => post_impulse.clone(),
            Phase::Post if t == t_final => final_state.clone(),
            Phase::Post => gen.propagator(t - tau, p.scheme)?.apply_raw(&post_impulse)?,
        };
        times.push(t);
        phases.push(phase);
        states.push(p.field(values));
    }
    Ok(Trajectory {
        times,
        phases,
        states,
        final_state: p.field(final_state),
    })
}

/// Assembles `Λ_τ` column by column from unit vectors.
pub fn dense_gramian_oracle(p: &HumProblem) -> Result<DMatrix<f64>> {
    let n = p.gen.n_dof();
    if n > ORACLE_MAX_DOF {
        return Err(HumError::ProblemTooLarge {
            n_dof: n,
            limit: ORACLE_MAX_DOF,
        });
    }
    let mut m = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut e = DVector::zeros(n);
        e[j] = 1.0;
        m.set_column(j, &p.gramian_raw(&e)?);
    }
    Ok(m)
}
