//! Independent checks for the solvers.
//!
//! [`qp_solve`] writes the discretized linear-quadratic problem as one
//! equality-constrained QP over every stage control, stage state and node
//! state and solves its KKT system densely. [`grad_fd`] and [`grad_exact`]
//! compute the gradient of the reduced cost `U -> J_d(U)` two ways, and
//! [`quasi_newton`] materializes the metric `W` whose inverse the iterative
//! LQR step applies implicitly. [`scalar_curve_demo`] runs the same iteration
//! on a one-dimensional problem where it provably converges only linearly.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::ilqr::{self, linearize, rollout_flat, ARMIJO_C1, MIN_STEP};
use crate::linalg::{
    chol_solve_vec, coupled_blocks, flatten, lu_solve_vec, stacked_identity, symmetrized,
    weighted_block_diag, weighted_row,
};
use crate::problem::{LQProblem, NonlinearProblem};
use crate::tableau::ButcherTableau;

/// Solution of the dense KKT system of the discretized LQ problem.
#[derive(Debug, Clone)]
pub struct QPSolution {
    pub controls: Vec<DVector<f64>>,
    pub stages: Vec<DVector<f64>>,
    /// `x_0..x_N`, with `x_0` the fixed initial state.
    pub nodes: Vec<DVector<f64>>,
    /// Multipliers of the stage equations, one block per step.
    pub stage_multipliers: Vec<DVector<f64>>,
    /// Multipliers of the step equations `x_{k+1} = x_k + h sum b_i f_i`.
    pub node_multipliers: Vec<DVector<f64>>,
    pub kkt_residual: f64,
}

impl QPSolution {
    /// Costates `p_1..p_N`; the step-equation multipliers with the sign of
    /// the cost gradient.
    pub fn costates(&self) -> Vec<DVector<f64>> {
        self.node_multipliers.iter().map(|mu| -mu).collect()
    }
}

pub fn qp_solve(prob: &LQProblem, tab: &ButcherTableau, steps: usize) -> Result<QPSolution> {
    if steps == 0 {
        return Err(Error::InvalidArgument("number of steps must be positive".into()));
    }
    let s = tab.stages();
    let (n, m) = (prob.state_dim(), prob.control_dim());
    let h = prob.tf / steps as f64;
    let w = tab.b().as_slice();
    let (su, sx) = (s * m, s * n);
    let block = su + sx + n;
    let rows_per_step = sx + n;
    let nvar = steps * block;
    let ncon = steps * rows_per_step;

    let qh = weighted_block_diag(w, &prob.cost.q, h);
    let rh = weighted_block_diag(w, &prob.cost.r, h);
    let sh = weighted_block_diag(w, &prob.cost.s, h);
    let a_stage = coupled_blocks(tab.a(), &vec![prob.a.clone(); s], h);
    let b_stage = coupled_blocks(tab.a(), &vec![prob.b.clone(); s], h);
    let a_node = weighted_row(w, &vec![prob.a.clone(); s], h);
    let b_node = weighted_row(w, &vec![prob.b.clone(); s], h);
    let z = stacked_identity(s, n);
    let eye_n = DMatrix::<f64>::identity(n, n);

    let dim = nvar + ncon;
    let mut kkt = DMatrix::zeros(dim, dim);
    let mut rhs = DVector::zeros(dim);
    for k in 0..steps {
        let (u0, x0, y0) = (k * block, k * block + su, k * block + su + sx);
        kkt.view_mut((u0, u0), (su, su)).copy_from(&rh);
        kkt.view_mut((x0, x0), (sx, sx)).copy_from(&qh);
        kkt.view_mut((x0, u0), (sx, su)).copy_from(&sh);
        kkt.view_mut((u0, x0), (su, sx)).copy_from(&sh.transpose());
        if k + 1 == steps {
            kkt.view_mut((y0, y0), (n, n)).copy_from(&prob.cost.m);
        }

        let c0 = nvar + k * rows_per_step;
        let mut con = DMatrix::zeros(rows_per_step, nvar);
        // (I - A) X_k - B U_k - Z x_k = 0
        con.view_mut((0, u0), (sx, su)).copy_from(&(-&b_stage));
        con.view_mut((0, x0), (sx, sx))
            .copy_from(&(DMatrix::identity(sx, sx) - &a_stage));
        // x_{k+1} - x_k - A_b X_k - B_b U_k = 0
        con.view_mut((sx, u0), (n, su)).copy_from(&(-&b_node));
        con.view_mut((sx, x0), (n, sx)).copy_from(&(-&a_node));
        con.view_mut((sx, y0), (n, n)).copy_from(&eye_n);
        if k == 0 {
            rhs.rows_mut(c0, sx).copy_from(&(&z * &prob.x0));
            rhs.rows_mut(c0 + sx, n).copy_from(&prob.x0);
        } else {
            let prev = (k - 1) * block + su + sx;
            con.view_mut((0, prev), (sx, n)).copy_from(&(-&z));
            con.view_mut((sx, prev), (n, n)).copy_from(&(-&eye_n));
        }
        kkt.view_mut((c0, 0), (rows_per_step, nvar)).copy_from(&con);
        kkt.view_mut((0, c0), (nvar, rows_per_step)).copy_from(&con.transpose());
    }

    let sol = lu_solve_vec(&kkt, &rhs).ok_or_else(|| Error::OracleFailure("singular KKT matrix".into()))?;
    let residual = (&kkt * &sol - &rhs).amax();
    let scale = 1.0 + kkt.amax().max(rhs.amax()) * sol.amax();
    if !(residual < 1e-10 * scale) {
        return Err(Error::OracleFailure(format!("KKT residual {residual:e} too large")));
    }

    let mut out = QPSolution {
        controls: Vec::with_capacity(steps),
        stages: Vec::with_capacity(steps),
        nodes: vec![prob.x0.clone()],
        stage_multipliers: Vec::with_capacity(steps),
        node_multipliers: Vec::with_capacity(steps),
        kkt_residual: residual,
    };
    for k in 0..steps {
        let base = k * block;
        out.controls.push(sol.rows(base, su).into_owned());
        out.stages.push(sol.rows(base + su, sx).into_owned());
        out.nodes.push(sol.rows(base + su + sx, n).into_owned());
        let c0 = nvar + k * rows_per_step;
        out.stage_multipliers.push(sol.rows(c0, sx).into_owned());
        out.node_multipliers.push(sol.rows(c0 + sx, n).into_owned());
    }
    Ok(out)
}

/// Reproducible probe point with entries uniform in `[-1, 1)`.
pub fn seeded_controls(seed: u64, len: usize) -> DVector<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DVector::from_fn(len, |_, _| rng.random_range(-1.0..1.0))
}

/// Default finite-difference step for controls `u`.
pub fn default_fd_step(u: &DVector<f64>) -> f64 {
    1e-6 * (1.0 + u.amax())
}

/// Central-difference gradient of `J_d` with respect to the stacked stage controls.
pub fn grad_fd(
    prob: &NonlinearProblem,
    tab: &ButcherTableau,
    steps: usize,
    u: &DVector<f64>,
    eps: Option<f64>,
) -> Result<DVector<f64>> {
    let eps = eps.unwrap_or_else(|| default_fd_step(u));
    let mut grad = DVector::zeros(u.len());
    let mut probe = u.clone();
    for i in 0..u.len() {
        probe[i] = u[i] + eps;
        let up = rollout_flat(prob, tab, steps, &probe)?.cost;
        probe[i] = u[i] - eps;
        let down = rollout_flat(prob, tab, steps, &probe)?.cost;
        probe[i] = u[i];
        grad[i] = (up - down) / (2.0 * eps);
    }
    Ok(grad)
}

/// Exact gradient of `J_d` by an adjoint sweep through the step sensitivities.
pub fn grad_exact(
    prob: &NonlinearProblem,
    tab: &ButcherTableau,
    steps: usize,
    u: &DVector<f64>,
) -> Result<DVector<f64>> {
    let state = rollout_flat(prob, tab, steps, u)?;
    let lin = linearize(prob, tab, &state)?;
    Ok(flatten(&ilqr::reduced_gradient(prob, tab, &state, &lin)))
}

/// Dense quasi-Newton model of `J_d` at `U`: metric `W`, gradient `Y`, value `C`,
/// and the step `-W^{-1} Y`.
#[derive(Debug, Clone)]
pub struct QuasiNewtonData {
    pub w: DMatrix<f64>,
    pub y: DVector<f64>,
    pub c: f64,
    pub step: DVector<f64>,
}

pub fn quasi_newton(
    prob: &NonlinearProblem,
    tab: &ButcherTableau,
    steps: usize,
    u: &DVector<f64>,
) -> Result<QuasiNewtonData> {
    let state = rollout_flat(prob, tab, steps, u)?;
    let lin = linearize(prob, tab, &state)?;
    let w8 = tab.b().as_slice();
    let h = state.h;
    let qh = weighted_block_diag(w8, &prob.cost.q, h);
    let rh = weighted_block_diag(w8, &prob.cost.r, h);
    let sh = weighted_block_diag(w8, &prob.cost.s, h);
    let n = prob.state_dim();
    let block = tab.stages() * prob.control_dim();
    let total = steps * block;

    let mut w = DMatrix::zeros(total, total);
    let mut y = DVector::zeros(total);
    // d x_k / dU, accumulated forward
    let mut node_sens = DMatrix::zeros(n, total);
    for (k, st) in lin.steps.iter().enumerate() {
        let mut unit = DMatrix::zeros(block, total);
        unit.view_mut((0, k * block), (block, block)).fill_with_identity();
        let stage_sens = &st.e * &node_sens + &st.f * &unit;
        let (xs, us) = (&state.stages[k], &state.controls[k]);

        let cross = stage_sens.transpose() * &sh * &unit;
        w += stage_sens.transpose() * &qh * &stage_sens + &cross + cross.transpose()
            + unit.transpose() * &rh * &unit;
        y += stage_sens.tr_mul(&(&qh * xs + &sh * us)) + unit.tr_mul(&(sh.tr_mul(xs) + &rh * us));
        node_sens = &st.g * &node_sens + &st.h * &unit;
    }
    let xn = &state.nodes[steps];
    w += node_sens.transpose() * &prob.cost.m * &node_sens;
    y += node_sens.tr_mul(&(&prob.cost.m * xn));
    let w = symmetrized(&w);
    let step = -chol_solve_vec(&w, &y)
        .ok_or_else(|| Error::OracleFailure("quasi-Newton metric is not positive definite".into()))?;
    Ok(QuasiNewtonData {
        w,
        y,
        c: state.cost,
        step,
    })
}

/// Componentwise comparison of the exact and finite-difference gradients.
#[derive(Debug, Clone)]
pub struct GradientCheck {
    pub exact: DVector<f64>,
    pub fd: DVector<f64>,
    /// `max_i |exact_i - fd_i| / ||exact||_inf`.
    pub max_rel_error: f64,
    pub worst_index: usize,
}

pub fn check_gradient(
    prob: &NonlinearProblem,
    tab: &ButcherTableau,
    steps: usize,
    u: &DVector<f64>,
) -> Result<GradientCheck> {
    let exact = grad_exact(prob, tab, steps, u)?;
    let fd = grad_fd(prob, tab, steps, u, None)?;
    let scale = exact.amax().max(f64::MIN_POSITIVE);
    let (worst_index, worst) = (&exact - &fd)
        .iter()
        .map(|d| d.abs())
        .enumerate()
        .fold((0, 0.0), |acc, (i, d)| if d > acc.1 { (i, d) } else { acc });
    Ok(GradientCheck {
        exact,
        fd,
        max_rel_error: worst / scale,
        worst_index,
    })
}

impl fmt::Display for GradientCheck {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let i = self.worst_index;
        writeln!(f, "components:         {}", self.exact.len())?;
        writeln!(f, "max relative error: {:.6e}", self.max_rel_error)?;
        writeln!(f, "worst component:    {i}")?;
        writeln!(f, "  exact:            {:.6e}", self.exact[i])?;
        write!(f, "  finite difference: {:.6e}", self.fd[i])
    }
}

/// One iterate of the scalar-curve demonstration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarIterate {
    pub u: f64,
    pub cost: f64,
    /// Step length used to leave this iterate; zero on the last one.
    pub alpha: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarCurveOptions {
    pub full_steps: bool,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for ScalarCurveOptions {
    fn default() -> Self {
        Self {
            full_steps: false,
            tol: 1e-12,
            max_iter: 200,
        }
    }
}

/// Closest point to the origin on the curve `x = u^2 + 1`:
/// `j(u) = 1/2 x^2 + 1/2 u^2` with the state eliminated.
pub mod scalar_curve {
    pub fn state(u: f64) -> f64 {
        u * u + 1.0
    }

    pub fn slope(u: f64) -> f64 {
        2.0 * u
    }

    pub fn cost(u: f64) -> f64 {
        0.5 * state(u).powi(2) + 0.5 * u * u
    }

    /// `j(u) - j(0)`, free of cancellation near the minimizer.
    pub fn cost_excess(u: f64) -> f64 {
        let u2 = u * u;
        1.5 * u2 + 0.5 * u2 * u2
    }

    /// The quasi-Newton metric `1 + x'(u)^2`.
    pub fn metric(u: f64) -> f64 {
        1.0 + slope(u).powi(2)
    }

    pub fn gradient(u: f64) -> f64 {
        u + state(u) * slope(u)
    }

    /// Exact second derivative `j''(u) = 1 + x'^2 + x x''`.
    pub fn hessian(u: f64) -> f64 {
        metric(u) + state(u) * 2.0
    }
}

/// Runs the iterative LQR update `u <- u - alpha W^{-1} Y` on the scalar curve.
pub fn scalar_curve_demo(u0: f64, opts: &ScalarCurveOptions) -> Result<Vec<ScalarIterate>> {
    use scalar_curve::{cost, cost_excess, gradient, metric};
    let mut u = u0;
    let mut trace = Vec::new();
    for _ in 0..opts.max_iter {
        let g = gradient(u);
        if g.abs() < opts.tol {
            break;
        }
        let d = -g / metric(u);
        let alpha = if opts.full_steps {
            1.0
        } else {
            let mut alpha = 1.0;
            while cost_excess(u + alpha * d) > cost_excess(u) + ARMIJO_C1 * alpha * g * d {
                alpha *= 0.5;
                if alpha < MIN_STEP {
                    return Err(Error::LineSearchFailed { min_alpha: MIN_STEP });
                }
            }
            alpha
        };
        trace.push(ScalarIterate { u, cost: cost(u), alpha });
        u += alpha * d;
    }
    trace.push(ScalarIterate { u, cost: cost(u), alpha: 0.0 });
    Ok(trace)
}
