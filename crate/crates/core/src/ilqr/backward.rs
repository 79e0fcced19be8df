use nalgebra::{DMatrix, DVector};

use super::{IterateState, Linearization};
use crate::error::{Error, Result};
use crate::linalg::{chol_solve, chol_solve_vec, symmetrized, weighted_block_diag};
use crate::problem::NonlinearProblem;
use crate::tableau::ButcherTableau;

/// Stage-weighted cost blocks `h diag(b_i Q)`, `h diag(b_i R)`, `h diag(b_i S)`.
#[derive(Debug, Clone)]
pub(crate) struct StageCost {
    pub qh: DMatrix<f64>,
    pub rh: DMatrix<f64>,
    pub sh: DMatrix<f64>,
}

impl StageCost {
    pub fn new(prob: &NonlinearProblem, tab: &ButcherTableau, h: f64) -> Self {
        let w = tab.b().as_slice();
        Self {
            qh: weighted_block_diag(w, &prob.cost.q, h),
            rh: weighted_block_diag(w, &prob.cost.r, h),
            sh: weighted_block_diag(w, &prob.cost.s, h),
        }
    }
}

/// Affine feedback law `U_k = feedback[k] x_k + feedforward[k]` with the
/// cost-to-go `1/2 x' value[k] x + linear[k]' x + const`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineBackwardPass {
    pub value: Vec<DMatrix<f64>>,
    pub linear: Vec<DVector<f64>>,
    pub feedback: Vec<DMatrix<f64>>,
    pub feedforward: Vec<DVector<f64>>,
}

/// Minimizes the discrete cost over the tangent plane by a backward Riccati
/// sweep with affine terms.
pub fn backward(
    prob: &NonlinearProblem,
    tab: &ButcherTableau,
    lin: &Linearization,
) -> Result<AffineBackwardPass> {
    let StageCost { qh, rh, sh } = StageCost::new(prob, tab, lin.step_size);
    let steps = lin.steps.len();
    let n = prob.state_dim();
    let mut value = vec![DMatrix::zeros(n, n); steps + 1];
    let mut linear = vec![DVector::zeros(n); steps + 1];
    let mut feedback = Vec::with_capacity(steps);
    let mut feedforward = Vec::with_capacity(steps);
    value[steps] = prob.cost.m.clone();

    for k in (0..steps).rev() {
        let st = &lin.steps[k];
        let (mk, yk) = (&value[k + 1], &linear[k + 1]);
        let ft = st.f.transpose();
        let ht = st.h.transpose();
        let sht = sh.transpose();
        let hm = &ht * mk;

        let inner = &ft * &qh * &st.f + &ft * &sh + &sht * &st.f + &rh + &hm * &st.h;
        let cross = &ft * &qh * &st.e + &sht * &st.e + &hm * &st.g;
        let offset = &ft * &qh * &st.d1 + &sht * &st.d1 + &hm * &st.d2 + &ht * yk;
        let fb = -chol_solve(&inner, &cross).ok_or(Error::BackwardFailure { step: k })?;
        let ff = -chol_solve_vec(&inner, &offset).ok_or(Error::BackwardFailure { step: k })?;

        let ex = &st.e + &st.f * &fb;
        let dx = &st.f * &ff + &st.d1;
        let gx = &st.g + &st.h * &fb;
        let gd = &st.h * &ff + &st.d2;
        let ext = ex.transpose();
        let fbt = fb.transpose();
        let gxt = gx.transpose();

        let m_new = &ext * &qh * &ex
            + &ext * &sh * &fb
            + &fbt * &sht * &ex
            + &fbt * &rh * &fb
            + &gxt * mk * &gx;
        let y_new = &ext * &qh * &dx
            + &ext * &sh * &ff
            + &fbt * &sht * &dx
            + &fbt * &rh * &ff
            + &gxt * mk * &gd
            + &gxt * yk;
        value[k] = symmetrized(&m_new);
        linear[k] = y_new;
        feedback.push(fb);
        feedforward.push(ff);
    }
    feedback.reverse();
    feedforward.reverse();
    Ok(AffineBackwardPass {
        value,
        linear,
        feedback,
        feedforward,
    })
}

/// Forward sweep of the affine law from `x_0`; returns `U_new - U` per step.
pub fn direction(
    state: &IterateState,
    lin: &Linearization,
    pass: &AffineBackwardPass,
) -> Vec<DVector<f64>> {
    let mut x = state.nodes[0].clone();
    let mut delta = Vec::with_capacity(lin.steps.len());
    for (k, st) in lin.steps.iter().enumerate() {
        let u = &pass.feedback[k] * &x + &pass.feedforward[k];
        x = &st.g * &x + &st.h * &u + &st.d2;
        delta.push(u - &state.controls[k]);
    }
    delta
}

/// Gradient of the reduced cost `U -> J_d(U)` by a reverse (adjoint) sweep
/// through the step Jacobians, stacked per step.
pub(crate) fn reduced_gradient(
    prob: &NonlinearProblem,
    tab: &ButcherTableau,
    state: &IterateState,
    lin: &Linearization,
) -> Vec<DVector<f64>> {
    let StageCost { qh, rh, sh } = StageCost::new(prob, tab, lin.step_size);
    let steps = lin.steps.len();
    let mut adj = &prob.cost.m * &state.nodes[steps];
    let mut grad = vec![DVector::zeros(0); steps];
    for k in (0..steps).rev() {
        let st = &lin.steps[k];
        let (xs, us) = (&state.stages[k], &state.controls[k]);
        let wx = &qh * xs + &sh * us;
        let wu = sh.tr_mul(xs) + &rh * us;
        grad[k] = wu + st.f.tr_mul(&wx) + st.h.tr_mul(&adj);
        adj = st.e.tr_mul(&wx) + st.g.tr_mul(&adj);
    }
    grad
}
