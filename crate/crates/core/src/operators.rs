//! Method-of-lines heat generators and their semigroups.
//!
//! Every generator is self-adjoint in the weighted product of
//! [`QuadratureWeights`]: `w_i A[i,j] = w_j A[j,i]`. The exact propagator
//! uses that structure, diagonalising `W^{1/2} A W^{-1/2}`.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{HumError, Result};
use crate::grid::{build_layout, BcKind, ControlMask, DofLayout, Field, GridSpec, QuadratureWeights};

/// Crank–Nicolson step used when none is given.
pub const DEFAULT_CN_DT: f64 = 1e-4;

/// Largest system propagated by eigendecomposition under [`PropagatorScheme::default_for`].
pub const EXPM_DEFAULT_MAX_DOF: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PropagatorScheme {
    CrankNicolson { dt: f64 },
    MatrixExponential,
}

impl PropagatorScheme {
    pub fn default_for(n_dof: usize) -> Self {
        if n_dof <= EXPM_DEFAULT_MAX_DOF {
            PropagatorScheme::MatrixExponential
        } else {
            PropagatorScheme::CrankNicolson { dt: DEFAULT_CN_DT }
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            PropagatorScheme::CrankNicolson { dt } if !(dt > 0.0 && dt.is_finite()) => Err(
                HumError::InvalidProblem(format!("Crank-Nicolson step must be positive, got {dt}")),
            ),
            _ => Ok(()),
        }
    }
}

#[derive(Debug)]
struct Spectrum {
    eigenvalues: DVector<f64>,
    /// Orthonormal eigenvectors of the symmetrised generator.
    vectors: DMatrix<f64>,
    sqrt_w: DVector<f64>,
    inv_sqrt_w: DVector<f64>,
}

#[derive(Debug)]
pub struct Generator {
    pub bc: BcKind,
    pub matrix: DMatrix<f64>,
    pub layout: DofLayout,
    pub weights: QuadratureWeights,
    spectrum: OnceLock<Spectrum>,
}

impl Clone for Generator {
    fn clone(&self) -> Self {
        Generator {
            bc: self.bc,
            matrix: self.matrix.clone(),
            layout: self.layout,
            weights: self.weights.clone(),
            spectrum: OnceLock::new(),
        }
    }
}

impl Generator {
    pub fn n_dof(&self) -> usize {
        self.layout.n_dof
    }

    /// Largest `|w_i A[i,j] − w_j A[j,i]|`, relative to `max |w_i A[i,j]|`.
    pub fn weighted_symmetry_defect(&self) -> f64 {
        let n = self.n_dof();
        let w = &self.weights.weights;
        let mut defect = 0.0f64;
        let mut scale = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let wij = w[i] * self.matrix[(i, j)];
                scale = scale.max(wij.abs());
                defect = defect.max((wij - w[j] * self.matrix[(j, i)]).abs());
            }
        }
        if scale == 0.0 {
            0.0
        } else {
            defect / scale
        }
    }

    /// Eigenvalues of the generator (ascending).
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self.spectrum().eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn apply(&self, u: &Field) -> Result<Field> {
        u.check_layout(&self.layout)?;
        Ok(u.with_values(&self.matrix * &u.values))
    }

    fn spectrum(&self) -> &Spectrum {
        self.spectrum.get_or_init(|| {
            let w = &self.weights.weights;
            let sqrt_w = w.map(f64::sqrt);
            let inv_sqrt_w = sqrt_w.map(|s| 1.0 / s);
            let n = self.n_dof();
            let mut sym = DMatrix::from_fn(n, n, |i, j| sqrt_w[i] * self.matrix[(i, j)] * inv_sqrt_w[j]);
            // remove the rounding asymmetry left by the scaling
            let t = sym.transpose();
            sym = (sym + t) * 0.5;
            let eig = SymmetricEigen::new(sym);
            Spectrum {
                eigenvalues: eig.eigenvalues,
                vectors: eig.eigenvectors,
                sqrt_w,
                inv_sqrt_w,
            }
        })
    }

    /// Builds the linear map `u ↦ e^{tA} u` for a fixed horizon.
    pub fn propagator(&self, t: f64, scheme: PropagatorScheme) -> Result<Propagator> {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(HumError::InvalidProblem(format!(
                "propagation time must be non-negative, got {t}"
            )));
        }
        scheme.validate()?;
        if t == 0.0 || self.n_dof() == 0 {
            return Ok(Propagator {
                layout: self.layout,
                t,
                kind: PropagatorKind::Identity,
            });
        }
        let kind = match scheme {
            PropagatorScheme::MatrixExponential => {
                let s = self.spectrum();
                let decay = s.eigenvalues.map(|lam| (lam * t).exp());
                // W^{-1/2} Q diag(e^{λt}) Qᵀ W^{1/2}
                let left = DMatrix::from_fn(self.n_dof(), self.n_dof(), |i, k| {
                    s.inv_sqrt_w[i] * s.vectors[(i, k)] * decay[k]
                });
                let right = DMatrix::from_fn(self.n_dof(), self.n_dof(), |k, j| {
                    s.vectors[(j, k)] * s.sqrt_w[j]
                });
                PropagatorKind::Dense(left * right)
            }
            PropagatorScheme::CrankNicolson { dt } => {
                let steps = crank_nicolson_steps(t, dt);
                let h = t / steps as f64;
                let n = self.n_dof();
                let eye = DMatrix::<f64>::identity(n, n);
                let implicit = &eye - &self.matrix * (0.5 * h);
                let explicit = &eye + &self.matrix * (0.5 * h);
                let lu = implicit.lu();
                if !lu.is_invertible() {
                    return Err(HumError::SingularStep);
                }
                PropagatorKind::CrankNicolson {
                    lu: Box::new(lu),
                    explicit,
                    steps,
                }
            }
        };
        Ok(Propagator {
            layout: self.layout,
            t,
            kind,
        })
    }
}

/// Number of equal Crank–Nicolson steps covering `t` with step at most `dt`.
pub fn crank_nicolson_steps(t: f64, dt: f64) -> usize {
    let ratio = t / dt;
    let nearest = ratio.round();
    // 0.01 / 1e-4 evaluates to 100.00000000000001; do not add a step for that
    let steps = if (ratio - nearest).abs() <= 1e-9 * nearest.max(1.0) {
        nearest
    } else {
        ratio.ceil()
    };
    (steps as usize).max(1)
}

#[derive(Debug)]
enum PropagatorKind {
    Identity,
    Dense(DMatrix<f64>),
    CrankNicolson {
        lu: Box<nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>>,
        explicit: DMatrix<f64>,
        steps: usize,
    },
}

/// Precomputed `e^{tA}` for one horizon `t`.
#[derive(Debug)]
pub struct Propagator {
    layout: DofLayout,
    t: f64,
    kind: PropagatorKind,
}

impl Propagator {
    pub fn horizon(&self) -> f64 {
        self.t
    }

    pub fn apply(&self, u: &Field) -> Result<Field> {
        u.check_layout(&self.layout)?;
        Ok(u.with_values(self.apply_raw(&u.values)?))
    }

    pub(crate) fn apply_raw(&self, u: &DVector<f64>) -> Result<DVector<f64>> {
        match &self.kind {
            PropagatorKind::Identity => Ok(u.clone()),
            PropagatorKind::Dense(m) => Ok(m * u),
            PropagatorKind::CrankNicolson { lu, explicit, steps } => {
                let mut state = u.clone();
                for _ in 0..*steps {
                    let rhs = explicit * &state;
                    state = lu.solve(&rhs).ok_or(HumError::SingularStep)?;
                }
                Ok(state)
            }
        }
    }
}

pub fn assemble_generator(grid: &GridSpec, bc: BcKind) -> Result<Generator> {
    if grid.n_x < 2 {
        return Err(HumError::GridTooSmall {
            bc: bc.name(),
            n_x: grid.n_x,
        });
    }
    let (layout, weights) = build_layout(grid, bc);
    let n = layout.n_dof;
    let inv_dx = 1.0 / grid.dx;
    let inv_dx2 = inv_dx * inv_dx;
    let mut a = DMatrix::<f64>::zeros(n, n);
    match bc {
        BcKind::Dirichlet | BcKind::Neumann => {
            for i in 0..n {
                a[(i, i)] = -2.0 * inv_dx2;
                if i > 0 {
                    a[(i, i - 1)] = inv_dx2;
                }
                if i + 1 < n {
                    a[(i, i + 1)] = inv_dx2;
                }
            }
            if bc == BcKind::Neumann {
                // u_0 = u_1 and u_{n_x} = u_{n_x-1} folded into the end rows
                a[(0, 0)] += inv_dx2;
                a[(n - 1, n - 1)] += inv_dx2;
            }
        }
        BcKind::Dynamic => {
            for i in 1..n - 1 {
                a[(i, i - 1)] = inv_dx2;
                a[(i, i)] = -2.0 * inv_dx2;
                a[(i, i + 1)] = inv_dx2;
            }
            // ∂_t ψ_Γ = −∂_ν ψ; the surface Laplacian vanishes on a two-point boundary
            a[(0, 0)] = -inv_dx;
            a[(0, 1)] = inv_dx;
            a[(n - 1, n - 1)] = -inv_dx;
            a[(n - 1, n - 2)] = inv_dx;
        }
    }
    Ok(Generator {
        bc,
        matrix: a,
        layout,
        weights,
        spectrum: OnceLock::new(),
    })
}

/// `e^{tA} u0` under the chosen scheme.
pub fn propagate(gen: &Generator, u0: &Field, t: f64, scheme: PropagatorScheme) -> Result<Field> {
    u0.check_layout(&gen.layout)?;
    if t == 0.0 {
        scheme.validate()?;
        return Ok(u0.clone());
    }
    gen.propagator(t, scheme)?.apply(u0)
}

/// The control operator `B`: keep the entries inside ω, zero everything else.
pub fn apply_control_operator(mask: &ControlMask, u: &Field) -> Result<Field> {
    if mask.indicator.len() != u.values.len() || mask.layout != u.layout {
        return Err(HumError::LayoutMismatch {
            expected: mask.indicator.len(),
            actual: u.values.len(),
        });
    }
    Ok(u.with_values(restrict(mask, &u.values)))
}

pub(crate) fn restrict(mask: &ControlMask, u: &DVector<f64>) -> DVector<f64> {
    DVector::from_iterator(
        u.len(),
        u.iter()
            .zip(&mask.indicator)
            .map(|(v, m)| if *m { *v } else { 0.0 }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, build_mask, inner_product};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn generator(n_x: usize, bc: BcKind) -> Generator {
        assemble_generator(&build_grid(0.0, 1.0, n_x).unwrap(), bc).unwrap()
    }

    #[test]
    fn dirichlet_stencil_n4() {
        let g = generator(4, BcKind::Dirichlet);
        let expected = DMatrix::from_row_slice(3, 3, &[-32.0, 16.0, 0.0, 16.0, -32.0, 16.0, 0.0, 16.0, -32.0]);
        assert_eq!(g.matrix, expected);
    }

    #[test]
    fn neumann_single_dof_is_zero() {
        let g = generator(2, BcKind::Neumann);
        assert_eq!(g.matrix, DMatrix::from_element(1, 1, 0.0));
    }

    #[test]
    fn dynamic_stencil_n2() {
        let g = generator(2, BcKind::Dynamic);
        let expected = DMatrix::from_row_slice(3, 3, &[-2.0, 2.0, 0.0, 4.0, -8.0, 4.0, 0.0, 2.0, -2.0]);
        assert_eq!(g.matrix, expected);
    }

    #[test]
    fn grid_too_small() {
        let grid = build_grid(0.0, 1.0, 1).unwrap();
        for bc in BcKind::ALL {
            assert!(matches!(assemble_generator(&grid, bc), Err(HumError::GridTooSmall { .. })));
        }
    }

    #[test]
    fn weighted_symmetry_and_kernel() {
        for bc in BcKind::ALL {
            let g = generator(25, bc);
            assert!(g.weighted_symmetry_defect() <= 1e-13, "{bc}");
            assert!(g.eigenvalues().iter().all(|l| *l <= 1e-9), "{bc}");
            if bc != BcKind::Dirichlet {
                let ones = DVector::from_element(g.n_dof(), 1.0);
                assert!((&g.matrix * ones).iter().all(|v| *v == 0.0), "{bc}");
            }
        }
    }

    #[test]
    fn zero_time_is_identity() {
        let g = generator(25, BcKind::Dynamic);
        let u = Field::from_fn(g.layout, |i| (i as f64).sin());
        for scheme in [PropagatorScheme::MatrixExponential, PropagatorScheme::CrankNicolson { dt: 1e-3 }] {
            assert_eq!(propagate(&g, &u, 0.0, scheme).unwrap(), u);
        }
    }

    #[test]
    fn first_sine_mode_decay() {
        let grid = build_grid(0.0, 1.0, 25).unwrap();
        let g = assemble_generator(&grid, BcKind::Dirichlet).unwrap();
        let u0 = Field::from_fn(g.layout, |i| 2f64.sqrt() * (PI * grid.node(g.layout.node_of(i))).sin());
        let lam = 4.0 / (grid.dx * grid.dx) * (PI * grid.dx / 2.0).sin().powi(2);
        assert_relative_eq!(lam, 9.85670, max_relative = 1e-5);
        let factor = (-lam * 0.02).exp();
        assert_relative_eq!(factor, 0.82106, max_relative = 5e-5);
        let u = propagate(&g, &u0, 0.02, PropagatorScheme::MatrixExponential).unwrap();
        for i in 0..g.n_dof() {
            assert_relative_eq!(u.values[i], factor * u0.values[i], max_relative = 1e-12);
        }
    }

    #[test]
    fn constants_are_stationary() {
        for bc in [BcKind::Neumann, BcKind::Dynamic] {
            let g = generator(25, bc);
            let ones = Field::from_fn(g.layout, |_| 1.0);
            for scheme in [PropagatorScheme::MatrixExponential, PropagatorScheme::CrankNicolson { dt: 1e-4 }] {
                let u = propagate(&g, &ones, 0.37, scheme).unwrap();
                assert!(u.values.iter().all(|v| (v - 1.0).abs() < 1e-12), "{bc} {scheme:?}");
            }
        }
    }

    #[test]
    fn crank_nicolson_step_count() {
        assert_eq!(crank_nicolson_steps(0.01, 1e-4), 100);
        assert_eq!(crank_nicolson_steps(0.02, 1e-4), 200);
        assert_eq!(crank_nicolson_steps(0.015, 0.01), 2);
        assert_eq!(crank_nicolson_steps(1e-6, 1e-4), 1);
    }

    #[test]
    fn control_operator_projection() {
        let grid = build_grid(0.0, 1.0, 25).unwrap();
        let g = assemble_generator(&grid, BcKind::Dynamic).unwrap();
        let mask = build_mask(&grid, &g.layout, 0.3, 0.7).unwrap();
        let u = Field::from_fn(g.layout, |i| 1.0 + i as f64);
        let bu = apply_control_operator(&mask, &u).unwrap();
        assert_eq!(bu.values[0], 0.0);
        assert_eq!(bu.values[25], 0.0);
        assert_eq!(bu.values[10], u.values[10]);
        assert_eq!(apply_control_operator(&mask, &bu).unwrap(), bu);

        let v = Field::from_fn(g.layout, |i| (i as f64 * 0.7).cos());
        let w = &g.weights;
        let lhs = inner_product(w, &bu, &v).unwrap();
        let rhs = inner_product(w, &u, &apply_control_operator(&mask, &v).unwrap()).unwrap();
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn control_operator_layout_mismatch() {
        let grid = build_grid(0.0, 1.0, 25).unwrap();
        let gd = assemble_generator(&grid, BcKind::Dirichlet).unwrap();
        let gy = assemble_generator(&grid, BcKind::Dynamic).unwrap();
        let mask = build_mask(&grid, &gd.layout, 0.3, 0.7).unwrap();
        assert!(apply_control_operator(&mask, &Field::zeros(gy.layout)).is_err());
    }

    #[test]
    fn invalid_scheme_and_time() {
        let g = generator(8, BcKind::Dirichlet);
        let u = Field::zeros(g.layout);
        assert!(propagate(&g, &u, -1.0, PropagatorScheme::MatrixExponential).is_err());
        assert!(propagate(&g, &u, 0.1, PropagatorScheme::CrankNicolson { dt: 0.0 }).is_err());
    }
}
