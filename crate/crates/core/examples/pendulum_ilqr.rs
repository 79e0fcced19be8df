//! Swing-up of a damped pendulum with iterative LQR.

use rk_ocp::ilqr::{solve, SolveOptions};
use rk_ocp::problem::pendulum;
use rk_ocp::ButcherTableau;

fn main() -> rk_ocp::Result<()> {
    let prob = pendulum();
    let tab = ButcherTableau::builtin("methodB")?;
    let sol = solve(&prob, &tab, 100, None, &SolveOptions::default())?;

    println!("{:>4} {:>14} {:>12} {:>8}", "iter", "Jd", "|grad|", "alpha");
    for r in &sol.log {
        println!("{:>4} {:>14.8e} {:>12.3e} {:>8}", r.iter, r.cost, r.grad_inf_norm, r.alpha);
    }

    let traj = sol.trajectory(&prob, &tab)?;
    let last = traj.nodes.last().unwrap();
    println!("final state: [{:.6}, {:.6}]", last[0], last[1]);
    println!("u(0) = {:.6}", traj.node_controls[0][0]);
    Ok(())
}
