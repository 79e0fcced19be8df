//! Continuous-time quadratic optimal control problems.
//!
//! Running cost is `1/2 x'Qx + x'Su + 1/2 u'Ru`, terminal cost `1/2 x'Mx`.
//! With `S = 0` this is the usual LQ form; the cross term exists so that
//! costs like `1/2 x^2 + 1/2 xu + 1/2 u^2` can be represented exactly.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::linalg::{is_symmetric, min_eigenvalue};

/// Right-hand side `f(x, u)` with its Jacobians. Implementations must be pure.
pub trait Dynamics: Send + Sync {
    fn state_dim(&self) -> usize;
    fn control_dim(&self) -> usize;
    fn eval(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64>;
    /// `df/dx`, n x n.
    fn jac_x(&self, x: &DVector<f64>, u: &DVector<f64>) -> DMatrix<f64>;
    /// `df/du`, n x m.
    fn jac_u(&self, x: &DVector<f64>, u: &DVector<f64>) -> DMatrix<f64>;
    /// For control-affine dynamics `f = g(x) + B(x) u`, the input matrix `B(x)`.
    fn input_matrix(&self, _x: &DVector<f64>) -> Option<DMatrix<f64>> {
        None
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticCost {
    pub q: DMatrix<f64>,
    pub s: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub m: DMatrix<f64>,
}

impl QuadraticCost {
    pub fn new(q: DMatrix<f64>, s: DMatrix<f64>, r: DMatrix<f64>, m: DMatrix<f64>) -> Result<Self> {
        let n = q.nrows();
        let nu = r.nrows();
        if q.shape() != (n, n) || m.shape() != (n, n) || r.shape() != (nu, nu) || s.shape() != (n, nu) {
            return Err(Error::InvalidProblem(format!(
                "cost shapes Q {:?}, S {:?}, R {:?}, M {:?} are inconsistent",
                q.shape(),
                s.shape(),
                r.shape(),
                m.shape()
            )));
        }
        for (name, mat) in [("Q", &q), ("M", &m), ("R", &r)] {
            if !is_symmetric(mat, 1e-12) {
                return Err(Error::InvalidProblem(format!("{name} is not symmetric")));
            }
        }
        for (name, mat) in [("Q", &q), ("M", &m)] {
            if min_eigenvalue(mat) < -1e-12 * (1.0 + mat.amax()) {
                return Err(Error::InvalidProblem(format!("{name} is not positive semidefinite")));
            }
        }
        if r.clone().cholesky().is_none() {
            return Err(Error::InvalidProblem("R is not positive definite".into()));
        }
        Ok(Self { q, s, r, m })
    }

    /// Cost without cross term.
    pub fn standard(q: DMatrix<f64>, r: DMatrix<f64>, m: DMatrix<f64>) -> Result<Self> {
        let s = DMatrix::zeros(q.nrows(), r.nrows());
        Self::new(q, s, r, m)
    }

    pub fn state_dim(&self) -> usize {
        self.q.nrows()
    }

    pub fn control_dim(&self) -> usize {
        self.r.nrows()
    }

    pub fn has_cross_term(&self) -> bool {
        self.s.iter().any(|v| *v != 0.0)
    }

    pub fn running(&self, x: &DVector<f64>, u: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.q * x)) + x.dot(&(&self.s * u)) + 0.5 * u.dot(&(&self.r * u))
    }

    pub fn terminal(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.m * x))
    }

    /// Gradient of the running cost in `x`: `Qx + Su`.
    pub fn grad_x(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        &self.q * x + &self.s * u
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LQProblem {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub cost: QuadraticCost,
    pub x0: DVector<f64>,
    pub tf: f64,
}

impl LQProblem {
    pub fn new(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        cost: QuadraticCost,
        x0: DVector<f64>,
        tf: f64,
    ) -> Result<Self> {
        let n = cost.state_dim();
        let m = cost.control_dim();
        if a.shape() != (n, n) || b.shape() != (n, m) || x0.len() != n {
            return Err(Error::InvalidProblem(format!(
                "dynamics shapes A {:?}, B {:?}, x0 {} do not match n = {n}, m = {m}",
                a.shape(),
                b.shape(),
                x0.len()
            )));
        }
        check_horizon(tf)?;
        Ok(Self { a, b, cost, x0, tf })
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn control_dim(&self) -> usize {
        self.b.ncols()
    }

    /// The same problem seen through the general dynamics interface.
    pub fn to_nonlinear(&self) -> NonlinearProblem {
        NonlinearProblem {
            dynamics: Arc::new(LinearDynamics {
                a: self.a.clone(),
                b: self.b.clone(),
            }),
            cost: self.cost.clone(),
            x0: self.x0.clone(),
            tf: self.tf,
        }
    }
}

fn check_horizon(tf: f64) -> Result<()> {
    if tf.is_finite() && tf > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidProblem(format!("horizon must be positive, got {tf}")))
    }
}

#[derive(Debug, Clone)]
pub struct LinearDynamics {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
}

impl Dynamics for LinearDynamics {
    fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    fn control_dim(&self) -> usize {
        self.b.ncols()
    }

    fn eval(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        &self.a * x + &self.b * u
    }

    fn jac_x(&self, _x: &DVector<f64>, _u: &DVector<f64>) -> DMatrix<f64> {
        self.a.clone()
    }

    fn jac_u(&self, _x: &DVector<f64>, _u: &DVector<f64>) -> DMatrix<f64> {
        self.b.clone()
    }

    fn input_matrix(&self, _x: &DVector<f64>) -> Option<DMatrix<f64>> {
        Some(self.b.clone())
    }
}

#[derive(Clone)]
pub struct NonlinearProblem {
    pub dynamics: Arc<dyn Dynamics>,
    pub cost: QuadraticCost,
    pub x0: DVector<f64>,
    pub tf: f64,
}

impl fmt::Debug for NonlinearProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NonlinearProblem")
            .field("n", &self.state_dim())
            .field("m", &self.control_dim())
            .field("cost", &self.cost)
            .field("x0", &self.x0)
            .field("tf", &self.tf)
            .finish()
    }
}

impl NonlinearProblem {
    pub fn new(
        dynamics: Arc<dyn Dynamics>,
        cost: QuadraticCost,
        x0: DVector<f64>,
        tf: f64,
    ) -> Result<Self> {
        if dynamics.state_dim() != cost.state_dim()
            || dynamics.control_dim() != cost.control_dim()
            || x0.len() != cost.state_dim()
        {
            return Err(Error::InvalidProblem(
                "dynamics, cost and initial state dimensions disagree".into(),
            ));
        }
        check_horizon(tf)?;
        Ok(Self {
            dynamics,
            cost,
            x0,
            tf,
        })
    }

    pub fn state_dim(&self) -> usize {
        self.dynamics.state_dim()
    }

    pub fn control_dim(&self) -> usize {
        self.dynamics.control_dim()
    }
}

type TimeFn = Arc<dyn Fn(f64) -> DVector<f64> + Send + Sync>;

/// Closed-form optimal solution used as ground truth in order studies.
#[derive(Clone)]
pub struct AnalyticReference {
    pub label: String,
    pub control: TimeFn,
    pub state: Option<TimeFn>,
    pub costate: Option<TimeFn>,
}

impl AnalyticReference {
    pub fn u_star(&self, t: f64) -> DVector<f64> {
        (self.control)(t)
    }
}

impl fmt::Debug for AnalyticReference {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AnalyticReference")
            .field("label", &self.label)
            .finish_non_exhaustive()
    }
}

/// Scalar problem `min int_0^1 1/2 x^2 + 1/2 xu + 1/2 u^2`, `x' = u`, `x(0) = 1`,
/// together with its closed-form optimum.
pub fn example31() -> (LQProblem, AnalyticReference) {
    let one = || DMatrix::from_element(1, 1, 1.0);
    let cost = QuadraticCost::new(
        one(),
        DMatrix::from_element(1, 1, 0.5),
        one(),
        DMatrix::zeros(1, 1),
    )
    .expect("valid cost");
    let prob = LQProblem::new(
        DMatrix::zeros(1, 1),
        one(),
        cost,
        DVector::from_element(1, 1.0),
        1.0,
    )
    .expect("valid problem");

    let e2 = std::f64::consts::E.powi(2);
    let denom = 0.5 + 1.5 * e2;
    let u = move |t: f64| (0.5 * t.exp() - 1.5 * (2.0 - t).exp()) / denom;
    let x = move |t: f64| (0.5 * t.exp() + 1.5 * (2.0 - t).exp()) / denom;
    // stationarity: p + x/2 + u = 0
    let p = move |t: f64| -u(t) - 0.5 * x(t);
    let reference = AnalyticReference {
        label: "closed form: u*(t) = (0.5e^t - 1.5e^(2-t)) / (0.5 + 1.5e^2)".into(),
        control: Arc::new(move |t| DVector::from_element(1, u(t))),
        state: Some(Arc::new(move |t| DVector::from_element(1, x(t)))),
        costate: Some(Arc::new(move |t| DVector::from_element(1, p(t)))),
    };
    (prob, reference)
}

/// Controlled linear oscillator on `[0, 40]` with cost `int 1/2 x'x + 1.5 u^2 + 5 x(tf)'x(tf)`.
pub fn spring_oscillator() -> LQProblem {
    let cost = QuadraticCost::standard(
        DMatrix::identity(2, 2),
        DMatrix::from_element(1, 1, 3.0),
        DMatrix::identity(2, 2) * 10.0,
    )
    .expect("valid cost");
    LQProblem::new(
        DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]),
        DMatrix::from_column_slice(2, 1, &[1.0, 0.0]),
        cost,
        DVector::from_vec(vec![1.0, 1.0]),
        40.0,
    )
    .expect("valid problem")
}

/// `theta' = omega`, `omega' = sin(theta) + u`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Pendulum;

impl Dynamics for Pendulum {
    fn state_dim(&self) -> usize {
        2
    }

    fn control_dim(&self) -> usize {
        1
    }

    fn eval(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        DVector::from_vec(vec![x[1], x[0].sin() + u[0]])
    }

    fn jac_x(&self, x: &DVector<f64>, _u: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[0.0, 1.0, x[0].cos(), 0.0])
    }

    fn jac_u(&self, _x: &DVector<f64>, _u: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_column_slice(2, 1, &[0.0, 1.0])
    }

    fn input_matrix(&self, _x: &DVector<f64>) -> Option<DMatrix<f64>> {
        Some(DMatrix::from_column_slice(2, 1, &[0.0, 1.0]))
    }
}

/// Inverted pendulum from 60 degrees, cost `int 0.025 u^2 + 2.5 x(4)'x(4)`.
pub fn pendulum() -> NonlinearProblem {
    let cost = QuadraticCost::standard(
        DMatrix::zeros(2, 2),
        DMatrix::from_element(1, 1, 0.05),
        DMatrix::identity(2, 2) * 5.0,
    )
    .expect("valid cost");
    NonlinearProblem::new(
        Arc::new(Pendulum),
        cost,
        DVector::from_vec(vec![std::f64::consts::FRAC_PI_3, 0.0]),
        4.0,
    )
    .expect("valid problem")
}

/// Names accepted by [`load_problem`] besides file paths.
pub const BUILTIN_PROBLEMS: [&str; 3] = ["example31", "spring", "pendulum"];

#[derive(Debug, Clone)]
pub enum Problem {
    Linear(LQProblem),
    Nonlinear(NonlinearProblem),
}

impl Problem {
    pub fn tf(&self) -> f64 {
        match self {
            Problem::Linear(p) => p.tf,
            Problem::Nonlinear(p) => p.tf,
        }
    }

    pub fn state_dim(&self) -> usize {
        match self {
            Problem::Linear(p) => p.state_dim(),
            Problem::Nonlinear(p) => p.state_dim(),
        }
    }

    pub fn control_dim(&self) -> usize {
        match self {
            Problem::Linear(p) => p.control_dim(),
            Problem::Nonlinear(p) => p.control_dim(),
        }
    }

    pub fn as_nonlinear(&self) -> NonlinearProblem {
        match self {
            Problem::Linear(p) => p.to_nonlinear(),
            Problem::Nonlinear(p) => p.clone(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct NamedProblem {
    pub name: String,
    pub problem: Problem,
    pub reference: Option<AnalyticReference>,
}

pub fn builtin_problem(name: &str) -> Result<NamedProblem> {
    let named = match name {
        "example31" => {
            let (prob, reference) = example31();
            NamedProblem {
                name: name.into(),
                problem: Problem::Linear(prob),
                reference: Some(reference),
            }
        }
        "spring" => NamedProblem {
            name: name.into(),
            problem: Problem::Linear(spring_oscillator()),
            reference: None,
        },
        "pendulum" => NamedProblem {
            name: name.into(),
            problem: Problem::Nonlinear(pendulum()),
            reference: None,
        },
        _ => {
            return Err(Error::NotFound {
                kind: "problem",
                name: name.into(),
            })
        }
    };
    Ok(named)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
struct ProblemFile {
    kind: String,
    name: Option<String>,
    n: Option<usize>,
    m: Option<usize>,
    A: Option<Vec<f64>>,
    B: Option<Vec<f64>>,
    Q: Option<Vec<f64>>,
    S: Option<Vec<f64>>,
    R: Option<Vec<f64>>,
    M: Option<Vec<f64>>,
    x0: Option<Vec<f64>>,
    tf: Option<f64>,
}

fn field<T>(value: Option<T>, key: &str) -> Result<T> {
    value.ok_or_else(|| Error::InvalidProblem(format!("missing key `{key}`")))
}

fn matrix(data: Vec<f64>, rows: usize, cols: usize, key: &str) -> Result<DMatrix<f64>> {
    if data.len() != rows * cols {
        return Err(Error::InvalidProblem(format!(
            "`{key}` has {} entries, expected {rows}x{cols} = {}",
            data.len(),
            rows * cols
        )));
    }
    Ok(DMatrix::from_row_slice(rows, cols, &data))
}

/// Parses the problem file format (TOML). `kind = "builtin"` with `name`, or
/// `kind = "lq"` with `n`, `m`, row-major `A`, `B`, `Q`, `S` (optional), `R`, `M`,
/// `x0`, `tf`.
pub fn parse_problem(text: &str) -> Result<NamedProblem> {
    let file: ProblemFile = toml::from_str(text).map_err(|e| Error::Parse {
        path: "<problem>".into(),
        message: e.to_string(),
    })?;
    match file.kind.as_str() {
        "builtin" => builtin_problem(&field(file.name, "name")?),
        "lq" => {
            let n = field(file.n, "n")?;
            let m = field(file.m, "m")?;
            let s = match file.S {
                Some(s) => matrix(s, n, m, "S")?,
                None => DMatrix::zeros(n, m),
            };
            let cost = QuadraticCost::new(
                matrix(field(file.Q, "Q")?, n, n, "Q")?,
                s,
                matrix(field(file.R, "R")?, m, m, "R")?,
                matrix(field(file.M, "M")?, n, n, "M")?,
            )?;
            let x0 = field(file.x0, "x0")?;
            if x0.len() != n {
                return Err(Error::InvalidProblem(format!("`x0` has {} entries, expected {n}", x0.len())));
            }
            let prob = LQProblem::new(
                matrix(field(file.A, "A")?, n, n, "A")?,
                matrix(field(file.B, "B")?, n, m, "B")?,
                cost,
                DVector::from_vec(x0),
                field(file.tf, "tf")?,
            )?;
            Ok(NamedProblem {
                name: file.name.unwrap_or_else(|| "lq".into()),
                problem: Problem::Linear(prob),
                reference: None,
            })
        }
        other => Err(Error::InvalidProblem(format!(
            "unknown kind `{other}` (expected \"lq\" or \"builtin\")"
        ))),
    }
}

/// Builtin name or path to a problem file.
pub fn load_problem(name_or_path: &str) -> Result<NamedProblem> {
    let path = Path::new(name_or_path);
    if !path.is_file() {
        return builtin_problem(name_or_path);
    }
    let text = std::fs::read_to_string(path)?;
    parse_problem(&text).map_err(|e| match e {
        Error::Parse { message, .. } => Error::Parse {
            path: path.display().to_string(),
            message,
        },
        other => other,
    })
}
