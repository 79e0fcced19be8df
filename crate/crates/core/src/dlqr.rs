//! Discrete LQR for Runge-Kutta discretized linear-quadratic problems.
//!
//! The pipeline has four steps: eliminate the stage states
//! (`X_k = E x_k + F U_k`, `x_{k+1} = G x_k + H U_k`), run the Riccati
//! recursion backwards for the gains `U_k = L_k x_k`, roll the feedback
//! forward, and recover node controls from the costates `p_k = M_k x_k`.
//!
//! The cross term `S` enters through the block `S_h = h diag(b_i S)`; every
//! formula below reduces to the plain LQ recursion when `S = 0`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{
    chol_solve, chol_solve_vec, coupled_blocks, lu_solve, stacked_identity, symmetrized,
    weighted_block_diag, weighted_row,
};
use crate::problem::LQProblem;
use crate::tableau::ButcherTableau;
use crate::trajectory::DiscreteTrajectory;

#[derive(Debug, Clone)]
pub struct DiscreteLQSystem {
    pub steps: usize,
    pub h: f64,
    pub problem: LQProblem,
    /// `(I - A_cal)^-1 Z`, sn x n.
    pub e: DMatrix<f64>,
    /// `(I - A_cal)^-1 B_cal`, sn x sm.
    pub f: DMatrix<f64>,
    pub g: DMatrix<f64>,
    pub hmat: DMatrix<f64>,
    pub qh: DMatrix<f64>,
    pub rh: DMatrix<f64>,
    pub sh: DMatrix<f64>,
}

pub fn assemble(prob: &LQProblem, tab: &ButcherTableau, steps: usize) -> Result<DiscreteLQSystem> {
    if steps == 0 {
        return Err(Error::InvalidArgument("step count must be at least 1".into()));
    }
    let s = tab.stages();
    let n = prob.state_dim();
    let h = prob.tf / steps as f64;
    let a_blocks = vec![prob.a.clone(); s];
    let b_blocks = vec![prob.b.clone(); s];

    let a_cal = coupled_blocks(tab.a(), &a_blocks, h);
    let b_cal = coupled_blocks(tab.a(), &b_blocks, h);
    let lhs = DMatrix::identity(s * n, s * n) - a_cal;
    let e = lu_solve(&lhs, &stacked_identity(s, n)).ok_or(Error::StepTooLarge { h })?;
    let f = lu_solve(&lhs, &b_cal).ok_or(Error::StepTooLarge { h })?;

    let weights = tab.b().as_slice();
    let ba = weighted_row(weights, &a_blocks, h);
    let bb = weighted_row(weights, &b_blocks, h);
    let g = DMatrix::identity(n, n) + &ba * &e;
    let hmat = &ba * &f + bb;

    Ok(DiscreteLQSystem {
        steps,
        h,
        problem: prob.clone(),
        qh: weighted_block_diag(weights, &prob.cost.q, h),
        rh: weighted_block_diag(weights, &prob.cost.r, h),
        sh: weighted_block_diag(weights, &prob.cost.s, h),
        e,
        f,
        g,
        hmat,
    })
}

/// Value matrices `M_0..M_N` and gains `L_0..L_{N-1}`.
#[derive(Debug, Clone)]
pub struct RiccatiPass {
    pub value: Vec<DMatrix<f64>>,
    pub gains: Vec<DMatrix<f64>>,
}

pub fn riccati_backward(sys: &DiscreteLQSystem) -> Result<RiccatiPass> {
    let (e, f, g, hm) = (&sys.e, &sys.f, &sys.g, &sys.hmat);
    let (qh, rh, sh) = (&sys.qh, &sys.rh, &sys.sh);
    let ft_qh = f.transpose() * qh;
    let ft_sh = f.transpose() * sh;
    // Parts of the inner and coupling matrices that do not depend on M_{k+1}.
    let inner_fixed = &ft_qh * f + &ft_sh + ft_sh.transpose() + rh;
    let cross_fixed = &ft_qh * e + sh.transpose() * e;

    let mut value = vec![DMatrix::zeros(0, 0); sys.steps + 1];
    let mut gains = vec![DMatrix::zeros(0, 0); sys.steps];
    value[sys.steps] = sys.problem.cost.m.clone();
    for k in (0..sys.steps).rev() {
        let next = &value[k + 1];
        let ht_m = hm.transpose() * next;
        let inner = &inner_fixed + &ht_m * hm;
        let cross = &cross_fixed + &ht_m * g;
        let gain = -chol_solve(&inner, &cross).ok_or(Error::RiccatiFailure { step: k })?;

        let closed_stage = e + f * &gain;
        let closed_node = g + hm * &gain;
        let stage_cross = closed_stage.transpose() * sh * &gain;
        let m_k = closed_stage.transpose() * qh * &closed_stage
            + &stage_cross
            + stage_cross.transpose()
            + gain.transpose() * rh * &gain
            + closed_node.transpose() * next * &closed_node;
        value[k] = symmetrized(&m_k);
        gains[k] = gain;
    }
    Ok(RiccatiPass { value, gains })
}

/// Forward feedback sweep from `x0`, with costates `p_k = M_k x_k` and node
/// controls `u_k = -R^-1 (B' p_k + S' x_k)` for `k = 0..=N`.
pub fn rollout(sys: &DiscreteLQSystem, pass: &RiccatiPass, x0: &DVector<f64>) -> DiscreteTrajectory {
    let prob = &sys.problem;
    let mut nodes = Vec::with_capacity(sys.steps + 1);
    let mut stages = Vec::with_capacity(sys.steps);
    let mut stage_controls = Vec::with_capacity(sys.steps);
    nodes.push(x0.clone());
    for k in 0..sys.steps {
        let x = &nodes[k];
        let u = &pass.gains[k] * x;
        stages.push(&sys.e * x + &sys.f * &u);
        let next = &sys.g * x + &sys.hmat * &u;
        stage_controls.push(u);
        nodes.push(next);
    }
    let costates: Vec<_> = nodes.iter().zip(&pass.value).map(|(x, m)| m * x).collect();
    let node_controls = nodes
        .iter()
        .zip(&costates)
        .map(|(x, p)| node_control(prob, x, p))
        .collect();
    DiscreteTrajectory {
        h: sys.h,
        nodes,
        stages,
        stage_controls,
        costates,
        node_controls,
    }
}

/// Stationarity of the Hamiltonian in `u`: `R u + B' p + S' x = 0`.
pub fn node_control(prob: &LQProblem, x: &DVector<f64>, p: &DVector<f64>) -> DVector<f64> {
    let rhs = -(prob.b.transpose() * p + prob.cost.s.transpose() * x);
    chol_solve_vec(&prob.cost.r, &rhs).expect("R is positive definite by construction")
}

#[derive(Debug, Clone)]
pub struct DlqrSolution {
    pub system: DiscreteLQSystem,
    pub pass: RiccatiPass,
    pub trajectory: DiscreteTrajectory,
}

impl DlqrSolution {
    /// Optimal discrete cost from the value function, `1/2 x0' M_0 x0`.
    pub fn value(&self) -> f64 {
        let x0 = &self.trajectory.nodes[0];
        0.5 * x0.dot(&(&self.pass.value[0] * x0))
    }
}

pub fn solve(prob: &LQProblem, tab: &ButcherTableau, steps: usize) -> Result<DlqrSolution> {
    let system = assemble(prob, tab, steps)?;
    let pass = riccati_backward(&system)?;
    let trajectory = rollout(&system, &pass, &prob.x0);
    Ok(DlqrSolution {
        system,
        pass,
        trajectory,
    })
}
