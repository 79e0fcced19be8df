use nalgebra::{DMatrix, DVector};

use super::IterateState;
use crate::error::{Error, Result};
use crate::linalg::{lu_solve_vec, stacked_identity};
use crate::problem::NonlinearProblem;
use crate::tableau::ButcherTableau;

const NEWTON_TOL: f64 = 1e-12;
const NEWTON_MAX_ITER: usize = 50;

/// Node costates `p_0..p_N` and stacked internal-stage costates per step.
#[derive(Debug, Clone, PartialEq)]
pub struct CostateTrajectory {
    pub nodes: Vec<DVector<f64>>,
    pub stages: Vec<DVector<f64>>,
}

/// Integrates the adjoint equation backward from `p_N = M x_N` with the
/// symplectic partner of `tab`, evaluated along the converged stage data.
pub fn costates(
    prob: &NonlinearProblem,
    tab: &ButcherTableau,
    state: &IterateState,
) -> Result<CostateTrajectory> {
    let partner = tab.adjoint()?;
    let s = tab.stages();
    let n = prob.state_dim();
    let h = state.h;
    let steps = state.steps();
    let b = tab.b();
    let mut nodes = vec![DVector::zeros(n); steps + 1];
    let mut stages = vec![DVector::zeros(s * n); steps];
    nodes[steps] = &prob.cost.m * &state.nodes[steps];

    let dim = (s + 1) * n;
    for k in (0..steps).rev() {
        let mut jxt = Vec::with_capacity(s);
        let mut grads = Vec::with_capacity(s);
        for i in 0..s {
            let x = state.stage_state(k, i).into_owned();
            let u = state.stage_control(k, i).into_owned();
            jxt.push(prob.dynamics.jac_x(&x, &u).transpose());
            grads.push(prob.cost.grad_x(&x, &u));
        }

        let mut lhs = DMatrix::zeros(dim, dim);
        let mut rhs = DVector::zeros(dim);
        lhs.view_mut((0, 0), (n, n)).fill_with_identity();
        let mut top = nodes[k + 1].clone();
        for i in 0..s {
            lhs.view_mut((0, (i + 1) * n), (n, n)).copy_from(&(&jxt[i] * (-h * b[i])));
            top.axpy(h * b[i], &grads[i], 1.0);
        }
        rhs.rows_mut(0, n).copy_from(&top);

        lhs.view_mut((n, 0), (s * n, n)).copy_from(&(-stacked_identity(s, n)));
        for i in 0..s {
            let row = (i + 1) * n;
            let mut r = DVector::zeros(n);
            for j in 0..s {
                let coeff = h * partner.abar[(i, j)];
                let mut block = &jxt[j] * coeff;
                if i == j {
                    block += DMatrix::<f64>::identity(n, n);
                }
                lhs.view_mut((row, (j + 1) * n), (n, n)).copy_from(&block);
                r.axpy(-coeff, &grads[j], 1.0);
            }
            rhs.rows_mut(row, n).copy_from(&r);
        }

        let sol = lu_solve_vec(&lhs, &rhs).ok_or(Error::CostateFailure { step: k })?;
        nodes[k] = sol.rows(0, n).into_owned();
        stages[k] = sol.rows(n, s * n).into_owned();
    }
    Ok(CostateTrajectory { nodes, stages })
}

/// Controls at the nodes from `Df_u(x, u)' p + R u + S' x = 0`.
///
/// Control-affine dynamics are solved in closed form; otherwise Newton's
/// method is started from the neighbouring internal-stage control.
pub fn node_controls(
    prob: &NonlinearProblem,
    state: &IterateState,
    costates: &CostateTrajectory,
) -> Result<Vec<DVector<f64>>> {
    let m = prob.control_dim();
    let steps = state.steps();
    let r = &prob.cost.r;
    let r_chol = r.clone().cholesky().ok_or_else(|| {
        Error::InvalidProblem("control weight is not positive definite".into())
    })?;
    (0..=steps)
        .map(|k| {
            let x = &state.nodes[k];
            let p = &costates.nodes[k];
            let bias = prob.cost.s.tr_mul(x);
            if let Some(input) = prob.dynamics.input_matrix(x) {
                return Ok(-r_chol.solve(&(input.tr_mul(p) + bias)));
            }
            let guess = if k < steps {
                state.stage_control(k, 0).into_owned()
            } else {
                let s = state.controls[k - 1].len() / m;
                state.stage_control(k - 1, s - 1).into_owned()
            };
            newton_node_control(prob, x, p, &bias, guess).ok_or(Error::NodeControlFailure { node: k })
        })
        .collect()
}

fn newton_node_control(
    prob: &NonlinearProblem,
    x: &DVector<f64>,
    p: &DVector<f64>,
    bias: &DVector<f64>,
    mut u: DVector<f64>,
) -> Option<DVector<f64>> {
    let m = u.len();
    let r = &prob.cost.r;
    let residual = |u: &DVector<f64>| prob.dynamics.jac_u(x, u).tr_mul(p) + r * u + bias;
    for _ in 0..NEWTON_MAX_ITER {
        let res = residual(&u);
        let scale = 1.0 + (r * &u).amax() + bias.amax();
        if res.amax() <= NEWTON_TOL * scale {
            return Some(u);
        }
        let mut jac = r.clone();
        for j in 0..m {
            let delta = 1e-6 * (1.0 + u[j].abs());
            let mut up = u.clone();
            let mut down = u.clone();
            up[j] += delta;
            down[j] -= delta;
            let col = (prob.dynamics.jac_u(x, &up) - prob.dynamics.jac_u(x, &down)).tr_mul(p)
                / (2.0 * delta);
            let mut target = jac.column_mut(j);
            target += col.column(0);
        }
        let step = lu_solve_vec(&jac, &res)?;
        u -= step;
        if u.iter().any(|v| !v.is_finite()) {
            return None;
        }
    }
    let res = residual(&u);
    (res.amax() <= NEWTON_TOL * (1.0 + (r * &u).amax() + bias.amax())).then_some(u)
}
