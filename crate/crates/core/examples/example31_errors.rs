//! Maximum stage-control and node-control errors against the closed-form
//! solution of the scalar test problem, for several step counts and methods.

use rk_ocp::problem::builtin_problem;
use rk_ocp::study::{order_study, Target};
use rk_ocp::ButcherTableau;

const H_GRID: [f64; 5] = [0.1, 0.05, 0.025, 0.0125, 0.00625];

fn main() -> rk_ocp::Result<()> {
    let problem = builtin_problem("example31")?;
    for name in ["methodA", "methodB", "methodC"] {
        let tab = ButcherTableau::builtin(name)?;
        let mut targets = vec![Target::Node];
        targets.extend((1..=tab.stages()).map(Target::Stage));
        for target in targets {
            let study = order_study(&problem, &tab, &H_GRID, target, None)?;
            println!("{study}");
        }
    }
    Ok(())
}
