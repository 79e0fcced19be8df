use nalgebra::DVector;

use super::IterateState;
use crate::error::{Error, Result};
use crate::linalg::unflatten;
use crate::problem::NonlinearProblem;
use crate::tableau::ButcherTableau;

const FIXED_POINT_TOL: f64 = 1e-12;
const FIXED_POINT_MAX_ITER: usize = 100;

/// Stage states and stage derivatives of one step.
type StageSolution = (Vec<DVector<f64>>, Vec<DVector<f64>>);

/// Internal-stage states and derivatives of one step, `x_i = x + h sum_j a_ij f(x_j, u_j)`.
pub(crate) fn solve_stages(
    prob: &NonlinearProblem,
    tab: &ButcherTableau,
    h: f64,
    x: &DVector<f64>,
    controls: &DVector<f64>,
    step: usize,
) -> Result<StageSolution> {
    let s = tab.stages();
    let m = prob.control_dim();
    let a = tab.a();
    let f = |xi: &DVector<f64>, i: usize| {
        prob.dynamics
            .eval(xi, &controls.rows(i * m, m).into_owned())
    };

    if tab.is_explicit() {
        let mut states: Vec<DVector<f64>> = Vec::with_capacity(s);
        let mut rates: Vec<DVector<f64>> = Vec::with_capacity(s);
        for i in 0..s {
            let mut xi = x.clone();
            for j in 0..i {
                if a[(i, j)] != 0.0 {
                    xi.axpy(h * a[(i, j)], &rates[j], 1.0);
                }
            }
            rates.push(f(&xi, i));
            states.push(xi);
        }
        return Ok((states, rates));
    }

    let mut states = vec![x.clone(); s];
    for _ in 0..FIXED_POINT_MAX_ITER {
        let rates: Vec<_> = states.iter().enumerate().map(|(i, xi)| f(xi, i)).collect();
        let mut change = 0.0f64;
        let mut scale = 1.0f64;
        let next: Vec<DVector<f64>> = (0..s)
            .map(|i| {
                let mut xi = x.clone();
                for j in 0..s {
                    if a[(i, j)] != 0.0 {
                        xi.axpy(h * a[(i, j)], &rates[j], 1.0);
                    }
                }
                change = change.max((&xi - &states[i]).amax());
                scale = scale.max(xi.amax());
                xi
            })
            .collect();
        states = next;
        if !change.is_finite() {
            break;
        }
        if change <= FIXED_POINT_TOL * scale {
            let rates = states.iter().enumerate().map(|(i, xi)| f(xi, i)).collect();
            return Ok((states, rates));
        }
    }
    Err(Error::RolloutDiverged { step })
}

/// Integrates the discrete state equations for the given stage controls and
/// evaluates the discrete cost.
pub fn rollout(
    prob: &NonlinearProblem,
    tab: &ButcherTableau,
    steps: usize,
    controls: &[DVector<f64>],
) -> Result<IterateState> {
    let s = tab.stages();
    let m = prob.control_dim();
    if steps == 0 || controls.len() != steps || controls.iter().any(|u| u.len() != s * m) {
        return Err(Error::InvalidArgument(format!(
            "expected {steps} stage-control blocks of length {}",
            s * m
        )));
    }
    let h = prob.tf / steps as f64;
    let b = tab.b();
    let mut nodes = Vec::with_capacity(steps + 1);
    let mut stages = Vec::with_capacity(steps);
    let mut cost = 0.0;
    nodes.push(prob.x0.clone());
    for (k, u) in controls.iter().enumerate() {
        let x = &nodes[k];
        let (states, rates) = solve_stages(prob, tab, h, x, u, k)?;
        let mut next = x.clone();
        for i in 0..s {
            next.axpy(h * b[i], &rates[i], 1.0);
            let ui = u.rows(i * m, m).into_owned();
            cost += h * b[i] * prob.cost.running(&states[i], &ui);
        }
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::RolloutDiverged { step: k });
        }
        stages.push(crate::linalg::flatten(&states));
        nodes.push(next);
    }
    cost += prob.cost.terminal(nodes.last().unwrap());
    Ok(IterateState {
        h,
        controls: controls.to_vec(),
        stages,
        nodes,
        cost,
    })
}

/// [`rollout`] with all stage controls stacked in one vector.
pub fn rollout_flat(
    prob: &NonlinearProblem,
    tab: &ButcherTableau,
    steps: usize,
    controls: &DVector<f64>,
) -> Result<IterateState> {
    let block = tab.stages() * prob.control_dim();
    if controls.len() != steps * block {
        return Err(Error::InvalidArgument(format!(
            "control vector has length {}, expected {}",
            controls.len(),
            steps * block
        )));
    }
    rollout(prob, tab, steps, &unflatten(controls, block))
}
