//! Convergence-order studies and plain-text reports.

use std::fmt::{self, Write as _};
use std::io::{self, Write};
use std::str::FromStr;

use log::warn;
use nalgebra::DVector;
use rayon::prelude::*;

use crate::dlqr;
use crate::error::{Error, Result};
use crate::ilqr::{self, IterationRecord, SolveOptions};
use crate::problem::{AnalyticReference, NamedProblem, Problem};
use crate::tableau::{stage_orders, ButcherTableau};
use crate::trajectory::DiscreteTrajectory;

/// Ratio between the finest study step and the numerical reference step.
pub const REFERENCE_REFINEMENT: usize = 40;

/// Which control sequence an order study measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    Node,
    /// 1-based internal stage.
    Stage(usize),
}

impl FromStr for Target {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "node" {
            return Ok(Target::Node);
        }
        s.strip_prefix("stage:")
            .and_then(|i| i.parse::<usize>().ok())
            .filter(|&i| i >= 1)
            .map(Target::Stage)
            .ok_or_else(|| Error::InvalidArgument(format!("target must be `node` or `stage:<i>`, got `{s}`")))
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Target::Node => f.write_str("node"),
            Target::Stage(i) => write!(f, "stage:{i}"),
        }
    }
}

/// Result of a discrete solve, independent of the solver used.
#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub trajectory: DiscreteTrajectory,
    pub cost: f64,
    /// Iteration log when the iterative solver ran.
    pub log: Option<Vec<IterationRecord>>,
}

impl SolveOutcome {
    pub fn iterations(&self) -> usize {
        self.log.as_ref().map_or(0, |log| log.len().saturating_sub(1))
    }
}

/// Riccati sweep for linear problems, iterative LQR otherwise.
pub fn solve_problem(problem: &Problem, tab: &ButcherTableau, steps: usize) -> Result<SolveOutcome> {
    match problem {
        Problem::Linear(lq) => {
            let sol = dlqr::solve(lq, tab, steps)?;
            Ok(SolveOutcome {
                cost: sol.value(),
                trajectory: sol.trajectory,
                log: None,
            })
        }
        Problem::Nonlinear(prob) => {
            let sol = ilqr::solve(prob, tab, steps, None, &SolveOptions::default())?;
            Ok(SolveOutcome {
                trajectory: sol.trajectory(prob, tab)?,
                cost: sol.state.cost,
                log: Some(sol.log),
            })
        }
    }
}

/// Number of steps for step size `h` on `[0, tf]`; `h` must divide `tf`.
pub fn steps_for(tf: f64, h: f64) -> Result<usize> {
    let steps = (tf / h).round();
    if !(h > 0.0) || steps < 1.0 || (steps * h - tf).abs() > 1e-9 * tf {
        return Err(Error::InvalidArgument(format!("step size {h} does not divide the horizon {tf}")));
    }
    Ok(steps as usize)
}

/// Ground truth for measuring control errors.
pub enum Reference {
    Analytic(AnalyticReference),
    /// A fine-grid discrete solution; sample times must fall on its nodes.
    Discrete(DiscreteTrajectory),
}

impl Reference {
    pub fn control(&self, t: f64) -> Result<DVector<f64>> {
        match self {
            Reference::Analytic(r) => Ok(r.u_star(t)),
            Reference::Discrete(traj) => {
                let pos = t / traj.h;
                let k = pos.round();
                if (pos - k).abs() > 1e-6 || k < 0.0 || k as usize >= traj.nodes.len() {
                    return Err(Error::InvalidArgument(format!(
                        "time {t} is not a node of the reference grid (h = {})",
                        traj.h
                    )));
                }
                Ok(traj.node_controls[k as usize].clone())
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            Reference::Analytic(r) => r.label.clone(),
            Reference::Discrete(traj) => format!("discrete reference, h = {:e}", traj.h),
        }
    }
}

/// Builds the numerical reference: `methodC` at the finest step divided by
/// [`REFERENCE_REFINEMENT`].
pub fn discrete_reference(problem: &Problem, h_grid: &[f64]) -> Result<Reference> {
    let finest = h_grid.iter().copied().fold(f64::INFINITY, f64::min);
    let steps = steps_for(problem.tf(), finest)? * REFERENCE_REFINEMENT;
    let tab = ButcherTableau::builtin("methodC")?;
    Ok(Reference::Discrete(solve_problem(problem, &tab, steps)?.trajectory))
}

/// `max_k |u_k - u*(t_k)|` over nodes `0..=N`, or
/// `max_k |u_ki - u*(t_k + c_i h)|` over steps `0..N` for a stage target.
pub fn max_control_error(
    traj: &DiscreteTrajectory,
    tab: &ButcherTableau,
    target: Target,
    reference: &Reference,
) -> Result<f64> {
    let mut worst = 0.0f64;
    match target {
        Target::Node => {
            for (k, u) in traj.node_controls.iter().enumerate() {
                worst = worst.max((u - reference.control(traj.time(k))?).norm());
            }
        }
        Target::Stage(i) => {
            if i > tab.stages() {
                return Err(Error::InvalidArgument(format!(
                    "stage {i} out of range for {} ({} stages)",
                    tab.name(),
                    tab.stages()
                )));
            }
            let c = tab.c()[i - 1];
            for k in 0..traj.steps() {
                let t = traj.time(k) + c * traj.h;
                let u = traj.stage_control(k, i - 1);
                worst = worst.max((u - reference.control(t)?).norm());
            }
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderStudy {
    pub method: String,
    pub target: Target,
    /// `(h, max error)`, sorted by `h` descending.
    pub samples: Vec<(f64, f64)>,
    pub fitted_slope: Option<f64>,
}

impl OrderStudy {
    /// CSV with header `h,max_error`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "h,max_error")?;
        for (h, e) in &self.samples {
            writeln!(out, "{h:.5e},{e:.5e}")?;
        }
        Ok(())
    }
}

impl fmt::Display for OrderStudy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "method {} target {}", self.method, self.target)?;
        writeln!(f, "{:>12}  {:>12}", "h", "max error")?;
        for (h, e) in &self.samples {
            writeln!(f, "{h:>12.5e}  {e:>12.5e}")?;
        }
        match self.fitted_slope {
            Some(slope) => write!(f, "fitted order: {slope:.5e}"),
            None => write!(f, "fitted order: n/a"),
        }
    }
}

/// Least-squares slope of `log(error)` against `log(h)`. Non-positive errors
/// are dropped with a warning.
pub fn fit_order(samples: &[(f64, f64)]) -> Result<f64> {
    let usable: Vec<(f64, f64)> = samples
        .iter()
        .filter(|(h, e)| {
            let ok = *e > 0.0 && *h > 0.0 && e.is_finite();
            if !ok {
                warn!("excluding sample h = {h:e}, error = {e:e} from the order fit");
            }
            ok
        })
        .map(|(h, e)| (h.ln(), e.ln()))
        .collect();
    if usable.len() < 3 {
        return Err(Error::NoFit { usable: usable.len() });
    }
    let n = usable.len() as f64;
    let mx = usable.iter().map(|p| p.0).sum::<f64>() / n;
    let my = usable.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = usable.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = usable.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::NoFit { usable: 1 });
    }
    Ok(sxy / sxx)
}

/// Solves on every step size in `h_grid` (in parallel) and records the
/// maximal control error for `target`. Uses the problem's closed form when it
/// has one and `reference` otherwise.
pub fn order_study(
    problem: &NamedProblem,
    tab: &ButcherTableau,
    h_grid: &[f64],
    target: Target,
    reference: Option<&Reference>,
) -> Result<OrderStudy> {
    let analytic = problem.reference.clone().map(Reference::Analytic);
    let reference = analytic.as_ref().or(reference).ok_or_else(|| {
        Error::NeedsReference(format!("problem `{}` has no closed-form solution", problem.name))
    })?;
    let mut samples = h_grid
        .par_iter()
        .map(|&h| {
            let steps = steps_for(problem.problem.tf(), h)?;
            let out = solve_problem(&problem.problem, tab, steps)?;
            Ok((h, max_control_error(&out.trajectory, tab, target, reference)?))
        })
        .collect::<Result<Vec<_>>>()?;
    samples.sort_by(|a, b| b.0.total_cmp(&a.0));
    let fitted_slope = fit_order(&samples).ok();
    Ok(OrderStudy {
        method: tab.name().to_string(),
        target,
        samples,
        fitted_slope,
    })
}

/// Tableau, symplectic partner and per-stage order predictions as text.
pub fn tableau_report(tab: &ButcherTableau) -> String {
    let mut out = String::new();
    let s = tab.stages();
    let _ = writeln!(out, "method {} ({} stages)", tab.name(), s);
    let _ = writeln!(out, "c | a");
    for i in 0..s {
        let row: Vec<_> = (0..s).map(|j| fmt_num(tab.a()[(i, j)])).collect();
        let _ = writeln!(out, "{} | {}", fmt_num(tab.c()[i]), row.join(" "));
    }
    let b: Vec<_> = tab.b().iter().map(|v| fmt_num(*v)).collect();
    let _ = writeln!(out, "b = {}", b.join(" "));

    match tab.adjoint() {
        Ok(adj) => {
            let _ = writeln!(out, "\nadjoint: cbar | abar");
            for i in 0..s {
                let row: Vec<_> = (0..s).map(|j| fmt_num(adj.abar[(i, j)])).collect();
                let _ = writeln!(out, "{} | {}", fmt_num(adj.cbar[i]), row.join(" "));
            }
            let r = tab.ocp_order().unwrap_or(s);
            let _ = writeln!(out, "\norder in optimal control r = {r}");
            let _ = writeln!(out, "stage  q1  q2  c=cbar  predicted");
            for i in 1..=s {
                let rep = stage_orders(tab, &adj, i, r);
                let _ = writeln!(
                    out,
                    "{:>5}  {:>2}  {:>2}  {:>6}  {:>9}",
                    rep.stage, rep.q1, rep.q2, rep.c_match, rep.predicted_order
                );
            }
        }
        Err(e) => {
            let _ = writeln!(out, "\nadjoint unavailable: {e}");
        }
    }
    out
}

fn fmt_num(v: f64) -> String {
    let v = if v.abs() < 1e-14 { 0.0 } else { v };
    format!("{v:>12.5e}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::builtin_problem;

    #[test]
    fn exact_power_law_fits_exactly() {
        let samples: Vec<_> = [0.1, 0.05, 0.025].iter().map(|&h: &f64| (h, h * h)).collect();
        assert!((fit_order(&samples).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn fit_drops_zero_errors() {
        let samples = [(0.1, 1e-2), (0.05, 0.0), (0.025, 6.25e-4)];
        assert!(matches!(fit_order(&samples), Err(Error::NoFit { usable: 2 })));
    }

    #[test]
    fn target_parsing() {
        assert_eq!("node".parse::<Target>().unwrap(), Target::Node);
        assert_eq!("stage:3".parse::<Target>().unwrap(), Target::Stage(3));
        assert!("stage:0".parse::<Target>().is_err());
        assert!("stages".parse::<Target>().is_err());
        assert_eq!(Target::Stage(2).to_string(), "stage:2");
    }

    #[test]
    fn steps_must_divide_horizon() {
        assert_eq!(steps_for(1.0, 0.04).unwrap(), 25);
        assert!(steps_for(1.0, 0.3).is_err());
        assert!(steps_for(1.0, -0.1).is_err());
    }

    #[test]
    fn missing_reference_is_reported() {
        let spring = builtin_problem("spring").unwrap();
        let tab = ButcherTableau::builtin("euler").unwrap();
        let err = order_study(&spring, &tab, &[0.4, 0.2, 0.1], Target::Node, None);
        assert!(matches!(err, Err(Error::NeedsReference(_))));
    }

    #[test]
    fn samples_sorted_by_decreasing_step() {
        let ex = builtin_problem("example31").unwrap();
        let tab = ButcherTableau::builtin("methodA").unwrap();
        let study = order_study(&ex, &tab, &[0.01, 0.1, 0.05], Target::Stage(1), None).unwrap();
        let hs: Vec<_> = study.samples.iter().map(|s| s.0).collect();
        assert_eq!(hs, vec![0.1, 0.05, 0.01]);
        assert!((study.samples[0].1 - 2.400e-3).abs() < 0.05 * 2.400e-3);
        let mut buf = Vec::new();
        study.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("h,max_error\n1.00000e-1,"));
    }

    #[test]
    fn report_lists_stage_predictions() {
        let report = tableau_report(&ButcherTableau::builtin("methodC").unwrap());
        assert!(report.contains("predicted"));
        let report = tableau_report(&ButcherTableau::explicit3_family(1.0 / 3.0).unwrap());
        assert!(report.contains("adjoint unavailable"));
    }
}
