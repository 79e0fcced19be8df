//! Solves the discretized spring problem twice, once by the Riccati sweep and
//! once as a dense equality-constrained QP, and compares the results.

use rk_ocp::oracle::qp_solve;
use rk_ocp::problem::spring_oscillator;
use rk_ocp::{dlqr, ButcherTableau};

fn max_diff(a: &[nalgebra::DVector<f64>], b: &[nalgebra::DVector<f64>]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).amax()).fold(0.0, f64::max)
}

fn main() -> rk_ocp::Result<()> {
    let lq = spring_oscillator();
    let tab = ButcherTableau::builtin("methodB")?;
    let steps = 16;

    let riccati = dlqr::solve(&lq, &tab, steps)?;
    let qp = qp_solve(&lq, &tab, steps)?;
    let tr = &riccati.trajectory;

    println!("KKT residual        {:.3e}", qp.kkt_residual);
    println!("optimal cost        {:.10e}", riccati.value());
    println!("stage controls diff {:.3e}", max_diff(&tr.stage_controls, &qp.controls));
    println!("nodes diff          {:.3e}", max_diff(&tr.nodes, &qp.nodes));
    println!("costates diff       {:.3e}", max_diff(&tr.costates[1..], &qp.costates()));
    Ok(())
}
