//! Uniform 1-D grids, degree-of-freedom layouts and the weighted discrete
//! L² products that the rest of the crate measures everything with.
//!
//! Dirichlet and Neumann layouts carry only the interior nodes
//! `x_1 .. x_{n_x-1}`; their boundary values are eliminated (zero for
//! Dirichlet, copied from the neighbour for Neumann). The dynamic layout
//! carries every node, and the two end nodes hold the boundary trace
//! `ψ_Γ` as independent unknowns.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use nalgebra::DVector;

use crate::error::{HumError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub a: f64,
    pub b: f64,
    pub n_x: usize,
    pub dx: f64,
    pub nodes: Vec<f64>,
}

impl GridSpec {
    pub fn node(&self, j: usize) -> f64 {
        self.nodes[j]
    }
}

pub fn build_grid(a: f64, b: f64, n_x: usize) -> Result<GridSpec> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(HumError::InvalidDomain(format!(
            "endpoints must be finite (a = {a}, b = {b})"
        )));
    }
    if b <= a {
        return Err(HumError::InvalidDomain(format!(
            "right endpoint {b} must exceed left endpoint {a}"
        )));
    }
    if n_x < 1 {
        return Err(HumError::InvalidDomain("n_x must be at least 1".into()));
    }
    let dx = (b - a) / n_x as f64;
    let mut nodes: Vec<f64> = (0..=n_x).map(|j| a + j as f64 * dx).collect();
    nodes[n_x] = b;
    Ok(GridSpec { a, b, n_x, dx, nodes })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BcKind {
    Dirichlet,
    Neumann,
    Dynamic,
}

impl BcKind {
    pub const ALL: [BcKind; 3] = [BcKind::Dirichlet, BcKind::Neumann, BcKind::Dynamic];

    pub fn name(self) -> &'static str {
        match self {
            BcKind::Dirichlet => "dirichlet",
            BcKind::Neumann => "neumann",
            BcKind::Dynamic => "dynamic",
        }
    }
}

impl fmt::Display for BcKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BcKind {
    type Err = HumError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dirichlet" | "d" => Ok(BcKind::Dirichlet),
            "neumann" | "n" => Ok(BcKind::Neumann),
            "dynamic" | "dyn" | "wentzell" => Ok(BcKind::Dynamic),
            other => Err(HumError::Usage(format!("unknown boundary condition '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DofLayout {
    pub bc: BcKind,
    pub n_x: usize,
    /// Grid nodes carrying interior unknowns.
    pub interior_indices: (usize, usize),
    pub boundary_dof_count: usize,
    pub n_dof: usize,
}

impl DofLayout {
    pub fn new(n_x: usize, bc: BcKind) -> Self {
        let interior = (1, n_x.saturating_sub(1).max(1));
        match bc {
            BcKind::Dirichlet | BcKind::Neumann => DofLayout {
                bc,
                n_x,
                interior_indices: interior,
                boundary_dof_count: 0,
                n_dof: n_x.saturating_sub(1),
            },
            BcKind::Dynamic => DofLayout {
                bc,
                n_x,
                interior_indices: interior,
                boundary_dof_count: 2,
                n_dof: n_x + 1,
            },
        }
    }

    pub fn interior_range(&self) -> Range<usize> {
        self.interior_indices.0..self.interior_indices.1
    }

    /// Grid node index that DOF `i` lives on.
    pub fn node_of(&self, i: usize) -> usize {
        match self.bc {
            BcKind::Dirichlet | BcKind::Neumann => i + 1,
            BcKind::Dynamic => i,
        }
    }

    pub fn is_boundary_dof(&self, i: usize) -> bool {
        self.bc == BcKind::Dynamic && (i == 0 || i + 1 == self.n_dof)
    }
}

/// Per-DOF weights of the discrete L²(Ω) (× L²(Γ)) inner product.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureWeights {
    pub weights: DVector<f64>,
}

impl QuadratureWeights {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.weights.sum()
    }

    pub(crate) fn dot(&self, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
        self.weights
            .iter()
            .zip(u.iter().zip(v.iter()))
            .map(|(w, (a, b))| w * (a * b))
            .sum()
    }

    pub(crate) fn norm(&self, u: &DVector<f64>) -> f64 {
        self.dot(u, u).sqrt()
    }

    pub fn inner(&self, u: &Field, v: &Field) -> Result<f64> {
        inner_product(self, u, v)
    }

    pub fn norm_of(&self, u: &Field) -> Result<f64> {
        Ok(inner_product(self, u, u)?.sqrt())
    }
}

pub fn build_layout(grid: &GridSpec, bc: BcKind) -> (DofLayout, QuadratureWeights) {
    let layout = DofLayout::new(grid.n_x, bc);
    let weights = DVector::from_fn(layout.n_dof, |i, _| {
        if layout.is_boundary_dof(i) {
            1.0
        } else {
            grid.dx
        }
    });
    (layout, QuadratureWeights { weights })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub layout: DofLayout,
    pub values: DVector<f64>,
}

impl Field {
    pub fn zeros(layout: DofLayout) -> Self {
        Field {
            layout,
            values: DVector::zeros(layout.n_dof),
        }
    }

    pub fn from_fn(layout: DofLayout, f: impl FnMut(usize) -> f64) -> Self {
        let mut f = f;
        Field {
            layout,
            values: DVector::from_fn(layout.n_dof, |i, _| f(i)),
        }
    }

    pub fn from_values(layout: DofLayout, values: Vec<f64>) -> Result<Self> {
        if values.len() != layout.n_dof {
            return Err(HumError::LayoutMismatch {
                expected: layout.n_dof,
                actual: values.len(),
            });
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(HumError::InvalidProblem(format!(
                "field entries must be finite, found {bad}"
            )));
        }
        Ok(Field {
            layout,
            values: DVector::from_vec(values),
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| *v == 0.0)
    }

    pub fn scaled(&self, c: f64) -> Field {
        Field {
            layout: self.layout,
            values: &self.values * c,
        }
    }

    pub(crate) fn with_values(&self, values: DVector<f64>) -> Field {
        Field {
            layout: self.layout,
            values,
        }
    }

    pub(crate) fn check_layout(&self, expected: &DofLayout) -> Result<()> {
        if self.layout != *expected || self.values.len() != expected.n_dof {
            return Err(HumError::LayoutMismatch {
                expected: expected.n_dof,
                actual: self.values.len(),
            });
        }
        Ok(())
    }
}

fn check_weights(w: &QuadratureWeights, u: &Field) -> Result<()> {
    if u.values.len() != w.len() || u.layout.n_dof != w.len() {
        return Err(HumError::LayoutMismatch {
            expected: w.len(),
            actual: u.values.len(),
        });
    }
    Ok(())
}

/// Weighted product `Σ w_i u_i v_i`.
pub fn inner_product(w: &QuadratureWeights, u: &Field, v: &Field) -> Result<f64> {
    check_weights(w, u)?;
    check_weights(w, v)?;
    if u.layout != v.layout {
        return Err(HumError::LayoutMismatch {
            expected: u.layout.n_dof,
            actual: v.layout.n_dof,
        });
    }
    Ok(w.dot(&u.values, &v.values))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlMask {
    pub indicator: Vec<bool>,
    pub omega: (f64, f64),
    pub layout: DofLayout,
}

impl ControlMask {
    pub fn count(&self) -> usize {
        self.indicator.iter().filter(|b| **b).count()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indicator[i]
    }
}

/// Marks interior DOFs whose node lies in the closed interval `[start, end]`.
pub fn build_mask(grid: &GridSpec, layout: &DofLayout, start: f64, end: f64) -> Result<ControlMask> {
    if start.is_nan() || end.is_nan() || start >= end {
        return Err(HumError::InvalidInterval { start, end });
    }
    // absorbs the rounding in a + j·dx so that nodes sitting on an endpoint are kept
    let slack = 1e-12 * (grid.b - grid.a);
    let indicator: Vec<bool> = (0..layout.n_dof)
        .map(|i| {
            if layout.is_boundary_dof(i) {
                return false;
            }
            let x = grid.node(layout.node_of(i));
            x >= start - slack && x <= end + slack
        })
        .collect();
    if !indicator.iter().any(|b| *b) {
        return Err(HumError::EmptyControlRegion { start, end });
    }
    Ok(ControlMask {
        indicator,
        omega: (start, end),
        layout: *layout,
    })
}

/// `√(Σ_{i∈ω} w_i u_i²)`, i.e. `‖B u‖`.
pub fn masked_norm(w: &QuadratureWeights, mask: &ControlMask, u: &Field) -> Result<f64> {
    check_weights(w, u)?;
    if mask.indicator.len() != u.values.len() {
        return Err(HumError::LayoutMismatch {
            expected: mask.indicator.len(),
            actual: u.values.len(),
        });
    }
    let sum: f64 = mask
        .indicator
        .iter()
        .zip(w.weights.iter().zip(u.values.iter()))
        .filter(|(m, _)| **m)
        .map(|(_, (wi, ui))| wi * ui * ui)
        .sum();
    Ok(sum.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn ones(layout: DofLayout) -> Field {
        Field::from_fn(layout, |_| 1.0)
    }

    #[test]
    fn reference_grid_spacing() {
        let g = build_grid(0.0, 1.0, 25).unwrap();
        assert_relative_eq!(g.dx, 0.04, max_relative = 1e-15);
        assert_eq!(g.nodes.len(), 26);
        assert_eq!(g.nodes[0], 0.0);
        assert_eq!(g.nodes[25], 1.0);
        assert!(g.nodes.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn minimal_and_small_grids() {
        let g = build_grid(0.0, 1.0, 1).unwrap();
        assert_eq!(g.nodes, vec![0.0, 1.0]);
        assert_eq!(g.dx, 1.0);
        let g = build_grid(0.0, 2.0, 4).unwrap();
        assert_eq!(g.nodes, vec![0.0, 0.5, 1.0, 1.5, 2.0]);
    }

    #[test]
    fn invalid_domains() {
        assert!(matches!(build_grid(1.0, 1.0, 4), Err(HumError::InvalidDomain(_))));
        assert!(matches!(build_grid(1.0, 0.0, 4), Err(HumError::InvalidDomain(_))));
        assert!(matches!(build_grid(0.0, 1.0, 0), Err(HumError::InvalidDomain(_))));
    }

    #[test]
    fn layouts_and_weight_sums() {
        let g = build_grid(0.0, 1.0, 25).unwrap();
        let (l, w) = build_layout(&g, BcKind::Dirichlet);
        assert_eq!(l.n_dof, 24);
        assert!(w.weights.iter().all(|x| (*x - 0.04).abs() < 1e-15));
        assert_relative_eq!(w.sum(), 0.96, max_relative = 1e-13);

        let (l, w) = build_layout(&g, BcKind::Dynamic);
        assert_eq!(l.n_dof, 26);
        assert_eq!(l.boundary_dof_count, 2);
        assert_eq!(w.weights[0], 1.0);
        assert_eq!(w.weights[25], 1.0);
        assert_relative_eq!(w.sum(), 2.96, max_relative = 1e-13);

        let g2 = build_grid(0.0, 1.0, 2).unwrap();
        let (l, _) = build_layout(&g2, BcKind::Neumann);
        assert_eq!(l.n_dof, 1);
    }

    #[test]
    fn inner_product_of_ones_is_weight_sum() {
        let g = build_grid(0.0, 1.0, 25).unwrap();
        for (bc, expected) in [(BcKind::Dirichlet, 0.96), (BcKind::Dynamic, 2.96)] {
            let (l, w) = build_layout(&g, bc);
            let u = ones(l);
            assert_relative_eq!(inner_product(&w, &u, &u).unwrap(), expected, max_relative = 1e-13);
            assert_eq!(inner_product(&w, &u, &Field::zeros(l)).unwrap(), 0.0);
        }
    }

    #[test]
    fn inner_product_layout_mismatch() {
        let g = build_grid(0.0, 1.0, 25).unwrap();
        let (ld, w) = build_layout(&g, BcKind::Dirichlet);
        let (ly, _) = build_layout(&g, BcKind::Dynamic);
        let err = inner_product(&w, &ones(ld), &ones(ly)).unwrap_err();
        assert!(matches!(err, HumError::LayoutMismatch { .. }));
    }

    #[test]
    fn reference_control_region_nodes() {
        let g = build_grid(0.0, 1.0, 25).unwrap();
        let (l, _) = build_layout(&g, BcKind::Dirichlet);
        let m = build_mask(&g, &l, 0.3, 0.7).unwrap();
        assert_eq!(m.count(), 10);
        let nodes: Vec<usize> = (0..l.n_dof).filter(|&i| m.contains(i)).map(|i| l.node_of(i)).collect();
        assert_eq!(nodes, (8..=17).collect::<Vec<_>>());

        let full = build_mask(&g, &l, 0.0, 1.0).unwrap();
        assert_eq!(full.count(), 24);

        assert!(matches!(
            build_mask(&g, &l, 0.41, 0.43),
            Err(HumError::EmptyControlRegion { .. })
        ));
        assert!(matches!(
            build_mask(&g, &l, 0.5, 0.5),
            Err(HumError::InvalidInterval { .. })
        ));
    }

    #[test]
    fn dynamic_mask_excludes_boundary() {
        let g = build_grid(0.0, 1.0, 25).unwrap();
        let (l, _) = build_layout(&g, BcKind::Dynamic);
        let m = build_mask(&g, &l, 0.0, 1.0).unwrap();
        assert!(!m.contains(0));
        assert!(!m.contains(25));
        assert_eq!(m.count(), 24);
    }

    #[test]
    fn masked_norm_values() {
        let g = build_grid(0.0, 1.0, 25).unwrap();
        let (l, w) = build_layout(&g, BcKind::Dirichlet);
        let m = build_mask(&g, &l, 0.3, 0.7).unwrap();
        assert_relative_eq!(masked_norm(&w, &m, &ones(l)).unwrap(), 0.4f64.sqrt(), max_relative = 1e-13);
        assert_eq!(masked_norm(&w, &m, &Field::zeros(l)).unwrap(), 0.0);
        let outside = Field::from_fn(l, |i| if m.contains(i) { 0.0 } else { 3.0 });
        assert_eq!(masked_norm(&w, &m, &outside).unwrap(), 0.0);
    }

    #[test]
    fn field_from_values_checks_length() {
        let l = DofLayout::new(4, BcKind::Dirichlet);
        assert!(matches!(
            Field::from_values(l, vec![1.0, 2.0]),
            Err(HumError::LayoutMismatch { expected: 3, actual: 2 })
        ));
        assert!(Field::from_values(l, vec![1.0, f64::NAN, 0.0]).is_err());
    }

    #[test]
    fn bc_parsing() {
        assert_eq!("Dirichlet".parse::<BcKind>().unwrap(), BcKind::Dirichlet);
        assert_eq!("dynamic".parse::<BcKind>().unwrap(), BcKind::Dynamic);
        assert!("robin".parse::<BcKind>().is_err());
    }
}
