//! Runge-Kutta discretizations of optimal control problems.
//!
//! The crate discretizes `min 1/2 int (x'Qx + 2x'Su + u'Ru) dt + 1/2 x(T)'Mx(T)`
//! subject to `x' = f(x, u)` with an arbitrary Butcher tableau, where every
//! internal stage carries its own control. It provides
//!
//! * [`tableau`]: tableaus, their symplectic partners and predicted stage orders,
//! * [`problem`]: problem data and the built-in test problems,
//! * [`dlqr`]: the exact discrete LQR solution by a Riccati sweep,
//! * [`ilqr`]: an iterative LQR solver for nonlinear dynamics,
//! * [`oracle`]: independent checks (dense KKT solve, gradients, Newton systems),
//! * [`study`]: convergence-order studies and text reports.

pub mod dlqr;
pub mod error;
pub mod ilqr;
pub mod linalg;
pub mod oracle;
pub mod problem;
pub mod study;
pub mod tableau;
pub mod trajectory;

pub use error::{Error, Result};
pub use problem::{LQProblem, NonlinearProblem, Problem, QuadraticCost};
pub use tableau::{AdjointTableau, ButcherTableau};
pub use trajectory::DiscreteTrajectory;
