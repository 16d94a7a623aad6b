//! Tensors along a geodesic of a spray: parallel frames, the dynamical
//! covariant derivative `∇`, Jacobi tensors, their relation to geodesic
//! variations, Riccati and shape operators, and pre-semigeodesic charts.
//!
//! Tensors are stored by their chart components on the sample grid of the
//! base geodesic. Residuals of `(1,1)`-tensor equations are measured in the
//! parallel frame `{c', e_1, …, e_{n−1}}`.

mod chart;
mod frame;
mod riccati;
mod tensor;

use nalgebra::DMatrix;

pub use chart::{build_chart, Chart, ChartOptions};
pub use frame::{connection_map, covariant_derivative, parallel_transport, ParallelFrame};
pub use riccati::{check_j1_j2, riccati_residual, shape_operator, RiccatiOperator, ShapeOperator};
pub use tensor::{
    check_transversality, conjugate_points, integrate_jacobi_tensor, invert_transversal,
    jacobi_field_equivalence, jacobi_residual, tensor_from_variation, transversality_from_initial_data,
    variation_from_tensor, JacobiTensor, PropagationReport, TransversalityReport,
};

/// Tolerance used when deciding transversality.
pub const TRANSVERSAL_TOLERANCE: f64 = 1e-6;
/// `|det|` of the transverse frame matrix below which a tensor counts as
/// singular.
pub const SINGULAR_DET: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Valence {
    /// `(1,0)`: `n × 1` components.
    Vector,
    /// `(0,1)`: `1 × n` components.
    Covector,
    /// `(1,1)`: `n × n` components.
    Endomorphism,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TensorAlongCurve {
    pub valence: Valence,
    pub t_grid: Vec<f64>,
    pub comps: Vec<DMatrix<f64>>,
}

impl TensorAlongCurve {
    pub fn new(valence: Valence, t_grid: Vec<f64>, comps: Vec<DMatrix<f64>>) -> Self {
        debug_assert_eq!(t_grid.len(), comps.len());
        Self {
            valence,
            t_grid,
            comps,
        }
    }

    pub fn len(&self) -> usize {
        self.t_grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t_grid.is_empty()
    }

    /// Samples whose time lies in `[a, b]`.
    pub fn restrict(&self, window: (f64, f64)) -> Self {
        let keep: Vec<usize> = window_indices(&self.t_grid, window);
        Self {
            valence: self.valence,
            t_grid: keep.iter().map(|&i| self.t_grid[i]).collect(),
            comps: keep.iter().map(|&i| self.comps[i].clone()).collect(),
        }
    }

    /// Apply to a vector field sampled on the same grid.
    pub fn apply(&self, v: &TensorAlongCurve) -> TensorAlongCurve {
        TensorAlongCurve {
            valence: v.valence,
            t_grid: self.t_grid.clone(),
            comps: self.comps.iter().zip(&v.comps).map(|(a, b)| a * b).collect(),
        }
    }

    pub fn max_abs_diff(&self, other: &TensorAlongCurve) -> f64 {
        self.comps
            .iter()
            .zip(&other.comps)
            .map(|(a, b)| (a - b).abs().max())
            .fold(0.0, f64::max)
    }
}

pub(crate) fn window_indices(t_grid: &[f64], (a, b): (f64, f64)) -> Vec<usize> {
    let slack = 1e-9 * (1.0 + a.abs().max(b.abs()));
    (0..t_grid.len())
        .filter(|&i| t_grid[i] >= a - slack && t_grid[i] <= b + slack)
        .collect()
}
