//! Loads a tableau and an LQ problem from TOML files and solves it.
//!
//! ```bash
//! cargo run --example custom_files -- data/heun.toml data/double_integrator.toml
//! ```

use std::path::PathBuf;

use rk_ocp::problem::load_problem;
use rk_ocp::study::{solve_problem, tableau_report};
use rk_ocp::ButcherTableau;

fn main() -> rk_ocp::Result<()> {
    let data = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data");
    let mut args = std::env::args().skip(1);
    let tableau_path = args.next().unwrap_or_else(|| data.join("heun.toml").display().to_string());
    let problem_path = args
        .next()
        .unwrap_or_else(|| data.join("double_integrator.toml").display().to_string());

    let tab = ButcherTableau::resolve(&tableau_path)?;
    print!("{}", tableau_report(&tab));

    let named = load_problem(&problem_path)?;
    let out = solve_problem(&named.problem, &tab, 50)?;
    println!("{}: Jd = {:.8e}", named.name, out.cost);
    out.trajectory.write_csv(std::io::stdout().lock())?;
    Ok(())
}
