//! Prints each builtin tableau with its symplectic partner and the predicted
//! orders of the internal controls.
//!
//! ```bash
//! cargo run --example tableau_report
//! ```

use rk_ocp::study::tableau_report;
use rk_ocp::ButcherTableau;

fn main() -> rk_ocp::Result<()> {
    for name in ["euler", "methodA", "methodB", "methodC", "trapezoidal"] {
        let tab = ButcherTableau::builtin(name)?;
        println!("{}", tableau_report(&tab));
    }

    // One member of the explicit three-stage family, built from its free abscissa.
    let member = ButcherTableau::explicit3_family(0.4)?;
    println!("{}", tableau_report(&member));
    Ok(())
}
