//! Iterative LQR for Runge-Kutta discretized nonlinear quadratic problems.
//!
//! Each iteration linearizes the discrete stage equations around the current
//! feasible point, minimizes the cost over that tangent plane with an affine
//! Riccati sweep, and backtracks along the resulting direction on the
//! feasible manifold. After convergence the costates are recovered by the
//! symplectic partner of the tableau and the node controls solve the
//! stationarity condition `Ju' p + R u + S' x = 0` at every node.

mod backward;
mod costate;
mod linearize;
mod rollout;
mod solver;

use nalgebra::{DVector, DVectorView};

use crate::linalg::flatten;

pub use backward::{backward, direction, AffineBackwardPass};
pub(crate) use backward::reduced_gradient;
pub use costate::{costates, node_controls, CostateTrajectory};
pub use linearize::{linearize, Linearization, LinearizedStep};
pub use rollout::{rollout, rollout_flat};
pub use solver::{line_search, refine, solve, write_log_csv, IlqrSolution, IterationRecord, SolveOptions, ARMIJO_C1, MIN_STEP};

/// A point `(U, X, x_d)` on the manifold cut out by the discrete state equations.
#[derive(Debug, Clone, PartialEq)]
pub struct IterateState {
    pub h: f64,
    /// Internal-stage controls `U_k`, each of length `s m`.
    pub controls: Vec<DVector<f64>>,
    /// Internal-stage states `X_k`, each of length `s n`.
    pub stages: Vec<DVector<f64>>,
    /// Node states `x_0..x_N`.
    pub nodes: Vec<DVector<f64>>,
    /// Discrete cost `J_d`.
    pub cost: f64,
}

impl IterateState {
    pub fn steps(&self) -> usize {
        self.controls.len()
    }

    pub fn flat_controls(&self) -> DVector<f64> {
        flatten(&self.controls)
    }

    pub fn flat_stages(&self) -> DVector<f64> {
        flatten(&self.stages)
    }

    pub fn stage_state(&self, k: usize, i: usize) -> DVectorView<'_, f64> {
        let n = self.nodes[0].len();
        self.stages[k].rows(i * n, n)
    }

    pub fn stage_control(&self, k: usize, i: usize) -> DVectorView<'_, f64> {
        let m = self.controls[k].len() / (self.stages[k].len() / self.nodes[0].len());
        self.controls[k].rows(i * m, m)
    }
}
