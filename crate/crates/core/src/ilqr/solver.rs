use std::io::{self, Write};

use log::{debug, info};
use nalgebra::DVector;

use super::backward::reduced_gradient;
use super::{backward, costates, direction, linearize, node_controls, rollout, IterateState};
use crate::error::{Error, Result};
use crate::linalg::flatten;
use crate::problem::NonlinearProblem;
use crate::tableau::ButcherTableau;
use crate::trajectory::DiscreteTrajectory;

/// Sufficient-decrease constant of the Armijo test.
pub const ARMIJO_C1: f64 = 1e-4;
/// Step lengths below this are rejected.
pub const MIN_STEP: f64 = 1.0 / (1u64 << 30) as f64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    /// Stop when the infinity norm of the reduced gradient drops below this.
    pub tol: f64,
    pub max_iter: usize,
    /// Take the full step without the Armijo test.
    pub full_steps: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 200,
            full_steps: false,
        }
    }
}

/// One row of the iteration log. `step_norm` and `alpha` describe the step
/// taken from this iterate; they are zero on the final row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    pub cost: f64,
    pub grad_inf_norm: f64,
    pub step_norm: f64,
    pub alpha: f64,
    pub slope: f64,
}

#[derive(Debug, Clone)]
pub struct IlqrSolution {
    pub steps: usize,
    pub state: IterateState,
    pub log: Vec<IterationRecord>,
}

impl IlqrSolution {
    pub fn iterations(&self) -> usize {
        self.log.len() - 1
    }

    /// Adds costates and node controls to the converged iterate.
    pub fn trajectory(&self, prob: &NonlinearProblem, tab: &ButcherTableau) -> Result<DiscreteTrajectory> {
        let co = costates(prob, tab, &self.state)?;
        let node_controls = node_controls(prob, &self.state, &co)?;
        Ok(DiscreteTrajectory {
            h: self.state.h,
            nodes: self.state.nodes.clone(),
            stages: self.state.stages.clone(),
            stage_controls: self.state.controls.clone(),
            costates: co.nodes,
            node_controls,
        })
    }

    pub fn write_log_csv<W: Write>(&self, out: W) -> io::Result<()> {
        write_log_csv(&self.log, out)
    }
}

/// CSV with header `iter,Jd,grad_inf_norm,step_norm,alpha`.
pub fn write_log_csv<W: Write>(log: &[IterationRecord], mut out: W) -> io::Result<()> {
    writeln!(out, "iter,Jd,grad_inf_norm,step_norm,alpha")?;
    for r in log {
        writeln!(
            out,
            "{},{:.5e},{:.5e},{:.5e},{:.5e}",
            r.iter, r.cost, r.grad_inf_norm, r.step_norm, r.alpha
        )?;
    }
    Ok(())
}

/// Backtracking from `alpha = 1` until `J(U + alpha d) <= J(U) + c1 alpha slope`.
/// Trial points whose rollout fails count as rejections.
pub fn line_search(
    prob: &NonlinearProblem,
    tab: &ButcherTableau,
    state: &IterateState,
    delta: &[DVector<f64>],
    slope: f64,
) -> Result<(f64, IterateState)> {
    let steps = state.steps();
    let mut alpha = 1.0;
    while alpha >= MIN_STEP {
        let trial: Vec<_> = state
            .controls
            .iter()
            .zip(delta)
            .map(|(u, d)| u + d * alpha)
            .collect();
        match rollout(prob, tab, steps, &trial) {
            Ok(next) if next.cost <= state.cost + ARMIJO_C1 * alpha * slope => {
                return Ok((alpha, next));
            }
            Ok(_) | Err(Error::RolloutDiverged { .. }) => alpha *= 0.5,
            Err(e) => return Err(e),
        }
    }
    Err(Error::LineSearchFailed { min_alpha: MIN_STEP })
}

/// Takes `sweeps` full quasi-Newton steps from an already converged iterate.
///
/// Near the optimum the predicted decrease falls below the rounding level of
/// `J_d`, where the Armijo test can no longer discriminate; full steps keep
/// contracting the gradient there.
pub fn refine(
    prob: &NonlinearProblem,
    tab: &ButcherTableau,
    mut state: IterateState,
    sweeps: usize,
) -> Result<IterateState> {
    for _ in 0..sweeps {
        let lin = linearize(prob, tab, &state)?;
        let pass = backward(prob, tab, &lin)?;
        let delta = direction(&state, &lin, &pass);
        let trial: Vec<_> = state.controls.iter().zip(&delta).map(|(u, d)| u + d).collect();
        state = rollout(prob, tab, state.steps(), &trial)?;
    }
    Ok(state)
}

/// Iterative LQR from the stage controls `initial` (zero when `None`).
///
/// On hitting `max_iter` the error carries the last iterate.
pub fn solve(
    prob: &NonlinearProblem,
    tab: &ButcherTableau,
    steps: usize,
    initial: Option<&[DVector<f64>]>,
    opts: &SolveOptions,
) -> Result<IlqrSolution> {
    if steps == 0 {
        return Err(Error::InvalidArgument("number of steps must be positive".into()));
    }
    let block = tab.stages() * prob.control_dim();
    let start = match initial {
        Some(u) => u.to_vec(),
        None => vec![DVector::zeros(block); steps],
    };
    let mut state = rollout(prob, tab, steps, &start)?;
    let mut log = Vec::new();

    for iter in 0..=opts.max_iter {
        let lin = linearize(prob, tab, &state)?;
        let grad = flatten(&reduced_gradient(prob, tab, &state, &lin));
        let grad_norm = grad.amax();
        let mut record = IterationRecord {
            iter,
            cost: state.cost,
            grad_inf_norm: grad_norm,
            step_norm: 0.0,
            alpha: 0.0,
            slope: 0.0,
        };
        if grad_norm < opts.tol {
            log.push(record);
            info!("converged after {iter} iterations, Jd = {:.6e}", state.cost);
            return Ok(IlqrSolution { steps, state, log });
        }
        if iter == opts.max_iter {
            log.push(record);
            return Err(Error::NotConverged {
                iterations: iter,
                grad_norm,
                state: Box::new(state),
            });
        }

        let pass = backward(prob, tab, &lin)?;
        let delta = direction(&state, &lin, &pass);
        let slope = grad.dot(&flatten(&delta));
        let (alpha, next) = if opts.full_steps {
            let trial: Vec<_> = state.controls.iter().zip(&delta).map(|(u, d)| u + d).collect();
            (1.0, rollout(prob, tab, steps, &trial)?)
        } else {
            line_search(prob, tab, &state, &delta, slope)?
        };
        record.step_norm = alpha * flatten(&delta).amax();
        record.alpha = alpha;
        record.slope = slope;
        debug!(
            "iter {iter}: Jd = {:.6e}, |grad| = {grad_norm:.3e}, alpha = {alpha}",
            state.cost
        );
        log.push(record);
        state = next;
    }
    unreachable!("loop returns on its last iteration")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dlqr;
    use crate::problem::{pendulum, spring_oscillator};

    fn tab(name: &str) -> ButcherTableau {
        ButcherTableau::builtin(name).unwrap()
    }

    #[test]
    fn linear_problem_converges_in_one_step() {
        let lq = spring_oscillator();
        let prob = lq.to_nonlinear();
        let t = tab("methodB");
        let sol = solve(&prob, &t, 100, None, &SolveOptions::default()).unwrap();
        assert_eq!(sol.iterations(), 1);
        assert_eq!(sol.log[0].alpha, 1.0);
        let reference = dlqr::solve(&lq, &t, 100).unwrap();
        assert!((sol.state.cost - reference.value()).abs() < 1e-9 * reference.value());
    }

    #[test]
    fn pendulum_descends_monotonically() {
        let prob = pendulum();
        let t = tab("methodB");
        let sol = solve(&prob, &t, 40, None, &SolveOptions::default()).unwrap();
        assert!(sol.log.windows(2).all(|w| w[1].cost <= w[0].cost));
        assert!(sol.log.iter().take(sol.iterations()).all(|r| r.slope < 0.0));
        assert!(sol.log.last().unwrap().grad_inf_norm < 1e-8);
    }

    #[test]
    fn iteration_cap_returns_last_state() {
        let prob = pendulum();
        let opts = SolveOptions {
            max_iter: 1,
            ..SolveOptions::default()
        };
        match solve(&prob, &tab("methodA"), 20, None, &opts) {
            Err(Error::NotConverged { iterations, state, .. }) => {
                assert_eq!(iterations, 1);
                assert_eq!(state.steps(), 20);
            }
            other => panic!("expected NotConverged, got {other:?}"),
        }
    }

    #[test]
    fn log_csv_has_one_row_per_iterate() {
        let prob = pendulum();
        let sol = solve(&prob, &tab("methodA"), 20, None, &SolveOptions::default()).unwrap();
        let mut buf = Vec::new();
        sol.write_log_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "iter,Jd,grad_inf_norm,step_norm,alpha");
        assert_eq!(lines.len(), sol.log.len() + 1);
        assert!(lines[1].starts_with("0,"));
    }

    #[test]
    fn zero_direction_is_accepted_at_full_step() {
        let prob = pendulum();
        let t = tab("euler");
        let state = rollout(&prob, &t, 4, &vec![DVector::zeros(1); 4]).unwrap();
        let (alpha, next) = line_search(&prob, &t, &state, &vec![DVector::zeros(1); 4], 0.0).unwrap();
        assert_eq!(alpha, 1.0);
        assert_eq!(next.cost, state.cost);
    }

    #[test]
    fn ascent_direction_fails() {
        let prob = pendulum();
        let t = tab("euler");
        let state = rollout(&prob, &t, 4, &vec![DVector::zeros(1); 4]).unwrap();
        let err = line_search(&prob, &t, &state, &vec![DVector::from_element(1, 1.0); 4], -1e6);
        assert!(matches!(err, Err(Error::LineSearchFailed { .. })));
    }
}
