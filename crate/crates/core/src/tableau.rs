//! Runge-Kutta tableaus, their symplectic adjoint partner, and the
//! internal-stage order conditions.
//!
//! A tableau `(a, b, c)` used to discretize an optimal control problem
//! implicitly integrates the costate with the partner coefficients
//! `abar_ij = b_j - b_j a_ji / b_i`. The pair is a symplectic partitioned
//! Runge-Kutta method, and the agreement of `c` with `cbar` decides whether
//! internal-stage controls can converge faster than first order.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::Deserialize;

use crate::error::{Error, Result};

/// Tolerance for `c_i = sum_j a_ij` when abscissae are supplied explicitly.
const ABSCISSA_TOL: f64 = 1e-14;
/// Tolerance for `sum_i b_i = 1`.
const CONSISTENCY_TOL: f64 = 1e-13;
/// Equality tolerance for the order conditions and `c_i = cbar_i`.
pub const CONDITION_TOL: f64 = 1e-12;

/// Names accepted by [`ButcherTableau::builtin`].
pub const BUILTIN_NAMES: [&str; 5] = ["euler", "methodA", "methodB", "methodC", "trapezoidal"];

#[derive(Debug, Clone, PartialEq)]
pub struct ButcherTableau {
    name: String,
    a: DMatrix<f64>,
    b: DVector<f64>,
    c: DVector<f64>,
    explicit: bool,
    ocp_order: Option<usize>,
}

impl ButcherTableau {
    /// Builds a tableau from `a` and `b`; the abscissae are `c_i = sum_j a_ij`.
    pub fn new(name: impl Into<String>, a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        let s = b.len();
        if s == 0 {
            return Err(Error::InvalidTableau("stage count must be positive".into()));
        }
        if a.shape() != (s, s) {
            return Err(Error::InvalidTableau(format!(
                "coefficient matrix is {}x{}, expected {s}x{s}",
                a.nrows(),
                a.ncols()
            )));
        }
        if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidTableau("non-finite coefficient".into()));
        }
        let sum: f64 = b.iter().sum();
        if (sum - 1.0).abs() > CONSISTENCY_TOL {
            return Err(Error::InvalidTableau(format!("weights sum to {sum}, not 1")));
        }
        let c = DVector::from_iterator(s, a.row_iter().map(|row| row.sum()));
        let explicit = (0..s).all(|i| (i..s).all(|j| a[(i, j)] == 0.0));
        Ok(Self {
            name: name.into(),
            a,
            b,
            c,
            explicit,
            ocp_order: None,
        })
    }

    /// Like [`new`](Self::new) but also checks user-supplied abscissae against the row sums.
    pub fn with_abscissae(
        name: impl Into<String>,
        a: DMatrix<f64>,
        b: DVector<f64>,
        c: &DVector<f64>,
    ) -> Result<Self> {
        let tab = Self::new(name, a, b)?;
        if c.len() != tab.stages() {
            return Err(Error::InvalidTableau("abscissa vector has wrong length".into()));
        }
        for (i, (given, derived)) in c.iter().zip(tab.c.iter()).enumerate() {
            if (given - derived).abs() > ABSCISSA_TOL {
                return Err(Error::InvalidTableau(format!(
                    "c_{} = {given} does not match row sum {derived}",
                    i + 1
                )));
            }
        }
        Ok(tab)
    }

    /// Records the method's order in optimal control (order of the partitioned pair).
    pub fn with_ocp_order(mut self, order: usize) -> Self {
        self.ocp_order = Some(order);
        self
    }

    pub fn builtin(name: &str) -> Result<Self> {
        let rows = |s: usize, v: &[f64]| DMatrix::from_row_slice(s, s, v);
        let tab = match name.to_ascii_lowercase().as_str() {
            "euler" => Self::new("euler", rows(1, &[0.0]), DVector::from_vec(vec![1.0]))?
                .with_ocp_order(1),
            "methoda" => Self::new(
                "methodA",
                rows(2, &[0.0, 0.0, 1.0, 0.0]),
                DVector::from_vec(vec![0.5, 0.5]),
            )?
            .with_ocp_order(2),
            "methodb" => Self::new(
                "methodB",
                rows(3, &[0.0, 0.0, 0.0, 0.5, 0.0, 0.0, -1.0, 2.0, 0.0]),
                DVector::from_vec(vec![1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0]),
            )?
            .with_ocp_order(3),
            "methodc" => Self::new(
                "methodC",
                rows(
                    4,
                    &[
                        0.0, 0.0, 0.0, 0.0, //
                        0.5, 0.0, 0.0, 0.0, //
                        0.0, 0.5, 0.0, 0.0, //
                        0.0, 0.0, 1.0, 0.0,
                    ],
                ),
                DVector::from_vec(vec![1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0]),
            )?
            .with_ocp_order(4),
            "trapezoidal" => Self::new(
                "trapezoidal",
                rows(2, &[0.0, 0.0, 0.5, 0.5]),
                DVector::from_vec(vec![0.5, 0.5]),
            )?
            .with_ocp_order(2),
            _ => {
                return Err(Error::NotFound {
                    kind: "method",
                    name: name.to_string(),
                })
            }
        };
        Ok(tab)
    }

    /// The one-parameter family of 3-stage explicit methods of order 3 in optimal control.
    pub fn explicit3_family(c2: f64) -> Result<Self> {
        let degenerate = [0.0, 2.0 / 3.0, 1.0];
        if !c2.is_finite() || degenerate.iter().any(|d| (c2 - d).abs() < CONDITION_TOL) {
            return Err(Error::DegenerateFamily(c2));
        }
        let denom = c2 * (2.0 - 3.0 * c2);
        let a31 = (3.0 * c2 - 1.0 - 3.0 * c2 * c2) / denom;
        let a32 = (1.0 - c2) / denom;
        let a = DMatrix::from_row_slice(3, 3, &[0.0, 0.0, 0.0, c2, 0.0, 0.0, a31, a32, 0.0]);
        let b = DVector::from_vec(vec![
            (c2 - 1.0 / 3.0) / (2.0 * c2),
            1.0 / (6.0 * c2 * (1.0 - c2)),
            (2.0 - 3.0 * c2) / (6.0 * (1.0 - c2)),
        ]);
        Ok(Self::new(format!("explicit3(c2={c2})"), a, b)?.with_ocp_order(3))
    }

    /// Parses the tableau text format: TOML with keys `s`, `a` (row-major), `b`,
    /// `name`, and optionally `order`.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: TableauFile = toml::from_str(text).map_err(|e| Error::Parse {
            path: "<tableau>".into(),
            message: e.to_string(),
        })?;
        file.into_tableau()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Parse { message, .. } => Error::Parse {
                path: path.display().to_string(),
                message,
            },
            other => other,
        })
    }

    /// Builtin name or path to a tableau file.
    pub fn resolve(name_or_path: &str) -> Result<Self> {
        let path = Path::new(name_or_path);
        if path.is_file() {
            Self::load(path)
        } else {
            Self::builtin(name_or_path)
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn stages(&self) -> usize {
        self.b.len()
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn c(&self) -> &DVector<f64> {
        &self.c
    }

    /// `a` strictly lower triangular.
    pub fn is_explicit(&self) -> bool {
        self.explicit
    }

    pub fn ocp_order(&self) -> Option<usize> {
        self.ocp_order
    }

    pub fn adjoint(&self) -> Result<AdjointTableau> {
        adjoint(self)
    }

    /// Relabels stages: stage `i` of the result is stage `perm[i]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let s = self.stages();
        let mut seen = vec![false; s];
        if perm.len() != s || perm.iter().any(|&p| p >= s || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::InvalidArgument("not a permutation of the stages".into()));
        }
        let a = DMatrix::from_fn(s, s, |i, j| self.a[(perm[i], perm[j])]);
        let b = DVector::from_fn(s, |i, _| self.b[perm[i]]);
        let mut tab = Self::new(self.name.clone(), a, b)?;
        tab.ocp_order = self.ocp_order;
        Ok(tab)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TableauFile {
    name: Option<String>,
    s: usize,
    a: Vec<f64>,
    b: Vec<f64>,
    order: Option<usize>,
}

impl TableauFile {
    fn into_tableau(self) -> Result<ButcherTableau> {
        if self.a.len() != self.s * self.s {
            return Err(Error::InvalidTableau(format!(
                "`a` has {} entries, expected s*s = {}",
                self.a.len(),
                self.s * self.s
            )));
        }
        if self.b.len() != self.s {
            return Err(Error::InvalidTableau(format!(
                "`b` has {} entries, expected s = {}",
                self.b.len(),
                self.s
            )));
        }
        let a = DMatrix::from_row_slice(self.s, self.s, &self.a);
        let tab = ButcherTableau::new(
            self.name.unwrap_or_else(|| "custom".into()),
            a,
            DVector::from_vec(self.b),
        )?;
        Ok(match self.order {
            Some(r) => tab.with_ocp_order(r),
            None => tab,
        })
    }
}

/// Costate coefficients of the symplectic partner.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjointTableau {
    pub abar: DMatrix<f64>,
    pub bbar: DVector<f64>,
    pub cbar: DVector<f64>,
}

impl AdjointTableau {
    /// `max_ij |b_i abar_ij + b_j a_ji - b_i b_j|`.
    pub fn symplectic_defect(&self, tab: &ButcherTableau) -> f64 {
        let (a, b) = (tab.a(), tab.b());
        let s = tab.stages();
        let mut worst = 0.0f64;
        for i in 0..s {
            for j in 0..s {
                let r = b[i] * self.abar[(i, j)] + b[j] * a[(j, i)] - b[i] * b[j];
                worst = worst.max(r.abs());
            }
        }
        worst
    }
}

/// `abar_ij = b_j - b_j a_ji / b_i`, `bbar = b`, `cbar_i = sum_j abar_ij`.
pub fn adjoint(tab: &ButcherTableau) -> Result<AdjointTableau> {
    let (a, b) = (tab.a(), tab.b());
    if let Some((index, &weight)) = b.iter().enumerate().find(|(_, w)| **w <= 0.0) {
        return Err(Error::AdjointUndefined {
            index: index + 1,
            weight,
        });
    }
    let s = tab.stages();
    let abar = DMatrix::from_fn(s, s, |i, j| b[j] - b[j] * a[(j, i)] / b[i]);
    let cbar = DVector::from_iterator(s, abar.row_iter().map(|row| row.sum()));
    Ok(AdjointTableau {
        abar,
        bbar: b.clone(),
        cbar,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StageOrderReport {
    /// 1-based stage index.
    pub stage: usize,
    pub q1: usize,
    pub q2: usize,
    pub c_match: bool,
    pub predicted_order: usize,
}

/// Largest `q` such that `sum_j coeffs_ij c_j^(l-2) = c_i^(l-1)/(l-1)` for every
/// `l = 2..=q`; returns 1 when even `l = 2` fails. `0^0` is taken as 1.
fn largest_condition(coeffs: &DMatrix<f64>, c: &DVector<f64>, i: usize, lmax: usize) -> usize {
    let mut q = 1;
    for l in 2..=lmax {
        let lhs: f64 = (0..c.len())
            .map(|j| coeffs[(i, j)] * c[j].powi(l as i32 - 2))
            .sum();
        let rhs = c[i].powi(l as i32 - 1) / (l as f64 - 1.0);
        if (lhs - rhs).abs() > CONDITION_TOL {
            break;
        }
        q = l;
    }
    q
}

/// Internal-stage order report for 1-based `stage` of a method with order `r` in
/// optimal control. Conditions are checked for `l` up to `max(r, 2)`, and the
/// predicted order is capped at `r`.
pub fn stage_orders(
    tab: &ButcherTableau,
    adj: &AdjointTableau,
    stage: usize,
    r: usize,
) -> StageOrderReport {
    assert!(
        (1..=tab.stages()).contains(&stage),
        "stage {stage} out of range 1..={}",
        tab.stages()
    );
    assert!(r >= 1, "method order must be at least 1");
    let i = stage - 1;
    let lmax = r.max(2);
    let q1 = largest_condition(tab.a(), tab.c(), i, lmax);
    let q2 = largest_condition(&adj.abar, tab.c(), i, lmax);
    let c_match = (tab.c()[i] - adj.cbar[i]).abs() <= CONDITION_TOL;
    let predicted_order = if c_match { q1.min(q2).min(r) } else { 1 };
    StageOrderReport {
        stage,
        q1,
        q2,
        c_match,
        predicted_order,
    }
}

/// Stage-wise `c_i == cbar_i`.
pub fn check_cc(tab: &ButcherTableau, adj: &AdjointTableau) -> Vec<bool> {
    tab.c()
        .iter()
        .zip(adj.cbar.iter())
        .map(|(c, cbar)| (c - cbar).abs() <= CONDITION_TOL)
        .collect()
}

/// The same test written without the adjoint: `b_i - sum_j b_j a_ji = b_i c_i`.
/// Usable for tableaus with vanishing weights.
pub fn cc_identity(tab: &ButcherTableau) -> Vec<bool> {
    let (a, b, c) = (tab.a(), tab.b(), tab.c());
    (0..tab.stages())
        .map(|i| {
            let col: f64 = (0..tab.stages()).map(|j| b[j] * a[(j, i)]).sum();
            (b[i] - col - b[i] * c[i]).abs() <= CONDITION_TOL
        })
        .collect()
}
