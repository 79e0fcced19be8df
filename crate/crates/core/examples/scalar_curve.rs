//! The scalar curve: a one-dimensional problem where the quasi-Newton step of
//! iterative LQR converges only linearly, halving the control at every iteration
//! once the line search is active. Full steps overshoot instead.

use rk_ocp::oracle::{scalar_curve_demo, ScalarCurveOptions};

fn main() -> rk_ocp::Result<()> {
    let u0 = 0.1;
    let iterates = scalar_curve_demo(u0, &ScalarCurveOptions::default())?;
    for (k, pair) in iterates.windows(2).enumerate() {
        let (it, next) = (pair[0], pair[1]);
        println!(
            "{k:>3}  u = {:+.6e}  alpha = {:<8}  ratio = {:.4}",
            it.u,
            it.alpha,
            next.u / it.u
        );
    }

    let full = scalar_curve_demo(
        u0,
        &ScalarCurveOptions {
            full_steps: true,
            max_iter: 4,
            ..Default::default()
        },
    )?;
    let path: Vec<_> = full.iter().map(|it| format!("{:+.4}", it.u)).collect();
    println!("full steps: {}", path.join(" -> "));
    Ok(())
}
