use nalgebra::{DMatrix, DVector};

use super::IterateState;
use crate::error::{Error, Result};
use crate::linalg::{coupled_blocks, lu_solve, stacked_identity, weighted_row};
use crate::problem::NonlinearProblem;
use crate::tableau::ButcherTableau;

/// Tangent-plane data of one step around the linearization point
/// `(x0_k, X0_k, U0_k)`:
///
/// ```text
/// X_k     = E x_k + F U_k + d1
/// x_{k+1} = G x_k + H U_k + d2
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct LinearizedStep {
    /// `h [a_ij Df_x(x_kj, u_kj)]`, sn x sn.
    pub a1: DMatrix<f64>,
    /// `h [a_ij Df_u(x_kj, u_kj)]`, sn x sm.
    pub a2: DMatrix<f64>,
    /// `h [b_j Df_x(x_kj, u_kj)]`, n x sn.
    pub bx: DMatrix<f64>,
    /// `h [b_j Df_u(x_kj, u_kj)]`, n x sm.
    pub cu: DMatrix<f64>,
    pub e: DMatrix<f64>,
    pub f: DMatrix<f64>,
    pub g: DMatrix<f64>,
    pub h: DMatrix<f64>,
    pub d1: DVector<f64>,
    pub d2: DVector<f64>,
}

#[derive(Debug, Clone)]
pub struct Linearization {
    pub step_size: f64,
    pub steps: Vec<LinearizedStep>,
}

pub fn linearize(
    prob: &NonlinearProblem,
    tab: &ButcherTableau,
    state: &IterateState,
) -> Result<Linearization> {
    let s = tab.stages();
    let n = prob.state_dim();
    let h = state.h;
    let z = stacked_identity(s, n);
    let eye_sn = DMatrix::<f64>::identity(s * n, s * n);
    let weights = tab.b().as_slice();

    let mut steps = Vec::with_capacity(state.steps());
    for k in 0..state.steps() {
        let mut jx = Vec::with_capacity(s);
        let mut ju = Vec::with_capacity(s);
        for i in 0..s {
            let x = state.stage_state(k, i).into_owned();
            let u = state.stage_control(k, i).into_owned();
            jx.push(prob.dynamics.jac_x(&x, &u));
            ju.push(prob.dynamics.jac_u(&x, &u));
        }
        let a1 = coupled_blocks(tab.a(), &jx, h);
        let a2 = coupled_blocks(tab.a(), &ju, h);
        let bx = weighted_row(weights, &jx, h);
        let cu = weighted_row(weights, &ju, h);

        let lhs = &eye_sn - &a1;
        let e = lu_solve(&lhs, &z).ok_or(Error::StepTooLarge { h })?;
        let f = lu_solve(&lhs, &a2).ok_or(Error::StepTooLarge { h })?;
        let g = DMatrix::identity(n, n) + &bx * &e;
        let hm = &bx * &f + &cu;

        let (x0, u0) = (&state.nodes[k], &state.controls[k]);
        let d1 = &state.stages[k] - &e * x0 - &f * u0;
        let d2 = &state.nodes[k + 1] - &g * x0 - &hm * u0;
        steps.push(LinearizedStep {
            a1,
            a2,
            bx,
            cu,
            e,
            f,
            g,
            h: hm,
            d1,
            d2,
        });
    }
    Ok(Linearization { step_size: h, steps })
}
