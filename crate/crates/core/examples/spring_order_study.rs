//! Order study on the spring oscillator, which has no closed-form optimal
//! control. The reference is a fine discrete solution with a higher-order method.
//!
//! ```bash
//! cargo run --release --example spring_order_study
//! ```

use rk_ocp::problem::builtin_problem;
use rk_ocp::study::{discrete_reference, order_study, Target};
use rk_ocp::ButcherTableau;

fn main() -> rk_ocp::Result<()> {
    let problem = builtin_problem("spring")?;
    let h_grid = [0.4, 0.2, 0.1, 0.05];
    let reference = discrete_reference(&problem.problem, &h_grid)?;
    println!("reference: {}", reference.label());

    for name in ["euler", "trapezoidal", "methodB"] {
        let tab = ButcherTableau::builtin(name)?;
        let study = order_study(&problem, &tab, &h_grid, Target::Node, Some(&reference))?;
        println!("{study}");
    }
    Ok(())
}
