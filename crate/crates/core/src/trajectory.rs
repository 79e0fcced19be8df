use std::io::{self, Write};

use nalgebra::{DVector, DVectorView};

use crate::problem::QuadraticCost;

/// Discrete solution on a uniform grid `t_k = k h`, `k = 0..=N`.
///
/// `stages[k]` stacks the `s` internal-stage states of step `k`,
/// `stage_controls[k]` the `s` internal-stage controls.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteTrajectory {
    pub h: f64,
    pub nodes: Vec<DVector<f64>>,
    pub stages: Vec<DVector<f64>>,
    pub stage_controls: Vec<DVector<f64>>,
    pub costates: Vec<DVector<f64>>,
    pub node_controls: Vec<DVector<f64>>,
}

impl DiscreteTrajectory {
    pub fn steps(&self) -> usize {
        self.stage_controls.len()
    }

    pub fn state_dim(&self) -> usize {
        self.nodes[0].len()
    }

    pub fn control_dim(&self) -> usize {
        self.node_controls[0].len()
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.h
    }

    /// Control of 0-based stage `i` in step `k`.
    pub fn stage_control(&self, k: usize, i: usize) -> DVectorView<'_, f64> {
        let m = self.control_dim();
        self.stage_controls[k].rows(i * m, m)
    }

    pub fn stage_state(&self, k: usize, i: usize) -> DVectorView<'_, f64> {
        let n = self.state_dim();
        self.stages[k].rows(i * n, n)
    }

    /// `h sum_k sum_i b_i C(x_ki, u_ki) + 1/2 x_N' M x_N`.
    pub fn discrete_cost(&self, cost: &QuadraticCost, weights: &DVector<f64>) -> f64 {
        let mut total = 0.0;
        for k in 0..self.steps() {
            for (i, b) in weights.iter().enumerate() {
                let x = self.stage_state(k, i).into_owned();
                let u = self.stage_control(k, i).into_owned();
                total += self.h * b * cost.running(&x, &u);
            }
        }
        total + cost.terminal(self.nodes.last().expect("at least one node"))
    }

    /// CSV with header `k,t,x_1..x_n,u_1..u_m,p_1..p_n`, one row per node.
    /// Values use shortest round-trip formatting, so output is byte-deterministic.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        let n = self.state_dim();
        let m = self.control_dim();
        let mut header = vec!["k".to_string(), "t".to_string()];
        header.extend((1..=n).map(|i| format!("x_{i}")));
        header.extend((1..=m).map(|i| format!("u_{i}")));
        header.extend((1..=n).map(|i| format!("p_{i}")));
        writeln!(out, "{}", header.join(","))?;
        for k in 0..self.nodes.len() {
            let mut row = vec![k.to_string(), format!("{:e}", self.time(k))];
            row.extend(self.nodes[k].iter().map(|v| format!("{v:e}")));
            row.extend(self.node_controls[k].iter().map(|v| format!("{v:e}")));
            row.extend(self.costates[k].iter().map(|v| format!("{v:e}")));
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}
