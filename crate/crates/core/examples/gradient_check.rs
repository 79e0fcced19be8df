//! Exact reduced gradient of the discrete cost against central differences,
//! at random controls for the pendulum.
//!
//! ```bash
//! cargo run --example gradient_check -- 7
//! ```

use rk_ocp::oracle::{check_gradient, seeded_controls};
use rk_ocp::problem::pendulum;
use rk_ocp::ButcherTableau;

fn main() -> rk_ocp::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(42);
    let prob = pendulum();
    let steps = 20;
    for name in ["euler", "methodA", "methodB", "trapezoidal"] {
        let tab = ButcherTableau::builtin(name)?;
        let u = seeded_controls(seed, steps * tab.stages() * prob.control_dim());
        let check = check_gradient(&prob, &tab, steps, &u)?;
        println!("{name:<12} max relative error {:.3e}", check.max_rel_error);
    }
    Ok(())
}
