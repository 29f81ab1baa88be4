//! The local trajectory optimization (x-update).

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::plan::{Dynamics, State, StateLayout, TrajectoryPlan};
use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::optim::{minimize_box, BoxMinimizerOptions};
use crate::path::ReferencePath;

/// Quadratic reference-tracking weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackingCost {
    pub q_v: f64,
    pub q_lat: f64,
    pub r_a: f64,
    pub r_beta: f64,
    /// Weight on `1 − cos` of the heading error to the path (bicycle only).
    #[serde(default = "default_q_heading")]
    pub q_heading: f64,
    /// Extra weight on speed above the reference (bicycle only), so that
    /// yielding is done by the other vehicle slowing rather than this one
    /// racing ahead.
    #[serde(default = "default_q_overspeed")]
    pub q_overspeed: f64,
}

fn default_q_heading() -> f64 {
    4.0
}

fn default_q_overspeed() -> f64 {
    40.0
}

impl Default for TrackingCost {
    fn default() -> Self {
        Self { q_v: 1.0, q_lat: 4.0, r_a: 0.1, r_beta: 0.5, q_heading: default_q_heading(), q_overspeed: default_q_overspeed() }
    }
}

/// Everything an agent needs to plan on its own: cost, model and
/// reference.
#[derive(Debug, Clone)]
pub struct LocalProblem {
    pub dynamics: Dynamics,
    pub cost: TrackingCost,
    pub path: Arc<ReferencePath>,
    pub v_ref: f64,
    pub horizon: usize,
    pub dt: f64,
}

/// `Σ_c λ_cᵀ(x − z_c) + ‖R_c(x − z_c)‖²` collapsed into
/// `Σ_e quad_e x_e² + lin_e x_e + constant`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsensusPenalty {
    quad: Vec<f64>,
    lin: Vec<f64>,
    constant: f64,
}

impl ConsensusPenalty {
    pub fn new(len: usize) -> Self {
        Self { quad: vec![0.0; len], lin: vec![0.0; len], constant: 0.0 }
    }

    pub fn len(&self) -> usize {
        self.quad.len()
    }

    pub fn is_empty(&self) -> bool {
        self.quad.is_empty()
    }

    pub fn add_term(&mut self, z: &[f64], lambda: &[f64], rho: &[f64]) -> Result<()> {
        let n = self.len();
        if z.len() != n || lambda.len() != n || rho.len() != n {
            return Err(Error::Dimension(format!(
                "penalty term lengths z {}, lambda {}, rho {} vs plan {n}",
                z.len(),
                lambda.len(),
                rho.len()
            )));
        }
        for e in 0..n {
            self.quad[e] += rho[e];
            self.lin[e] += lambda[e] - 2.0 * rho[e] * z[e];
            self.constant += rho[e] * z[e] * z[e] - lambda[e] * z[e];
        }
        Ok(())
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let mut v = self.constant;
        for ((xe, q), l) in x.iter().zip(&self.quad).zip(&self.lin) {
            v += q * xe * xe + l * xe;
        }
        v
    }

    /// Adds the gradient to `grad` and returns the value.
    pub fn accumulate(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        for (e, g) in grad.iter_mut().enumerate() {
            *g += 2.0 * self.quad[e] * x[e] + self.lin[e];
        }
        self.value(x)
    }
}

impl LocalProblem {
    pub fn layout(&self) -> StateLayout {
        self.dynamics.layout()
    }

    pub fn plan_len(&self) -> usize {
        self.horizon * self.layout().step_dim()
    }

    /// Tracking cost of one plan row; adds its gradient into `grad`.
    fn row_cost(&self, row: &[f64], grad: &mut [f64]) -> f64 {
        let c = &self.cost;
        let p = Vec2::new(row[0], row[1]);
        let proj = self.path.project(&p);
        let normal = Vec2::new(-proj.tangent.y, proj.tangent.x);
        let mut value = c.q_lat * proj.lateral * proj.lateral;
        grad[0] += 2.0 * c.q_lat * proj.lateral * normal.x;
        grad[1] += 2.0 * c.q_lat * proj.lateral * normal.y;
        match self.layout() {
            StateLayout::Bicycle => {
                let dv = row[3] - self.v_ref;
                let q_v = if dv > 0.0 { c.q_v + c.q_overspeed } else { c.q_v };
                value += q_v * dv * dv + c.r_a * row[4] * row[4] + c.r_beta * row[5] * row[5];
                let err = row[2] - proj.tangent.y.atan2(proj.tangent.x);
                value += c.q_heading * (1.0 - err.cos());
                let dh = c.q_heading * err.sin();
                grad[0] -= dh * proj.heading_rate.x;
                grad[1] -= dh * proj.heading_rate.y;
                grad[2] += dh;
                grad[3] += 2.0 * q_v * dv;
                grad[4] += 2.0 * c.r_a * row[4];
                grad[5] += 2.0 * c.r_beta * row[5];
            }
            StateLayout::Holonomic => {
                // The tangent is held fixed; exact on straight references.
                let ex = row[2] - self.v_ref * proj.tangent.x;
                let ey = row[3] - self.v_ref * proj.tangent.y;
                value += c.q_v * (ex * ex + ey * ey);
                grad[2] += 2.0 * c.q_v * ex;
                grad[3] += 2.0 * c.q_v * ey;
            }
        }
        value
    }

    /// `J_i` of the plan generated by `inputs`.
    pub fn tracking_cost(&self, s0: &State, inputs: &[f64]) -> f64 {
        let mut grad = vec![0.0; inputs.len()];
        self.reduced_lagrangian(s0, inputs, &ConsensusPenalty::new(self.plan_len()), &mut grad)
    }

    /// Reduced Lagrangian of the x-update as a function of the decision
    /// inputs. Writes the gradient with respect to `inputs` into `grad`.
    pub fn reduced_lagrangian(
        &self,
        s0: &State,
        inputs: &[f64],
        penalty: &ConsensusPenalty,
        grad: &mut [f64],
    ) -> f64 {
        let mut rows = Vec::new();
        let mut row_grad = Vec::new();
        self.evaluate(s0, inputs, penalty, grad, &mut rows, &mut row_grad)
    }

    fn evaluate(
        &self,
        s0: &State,
        inputs: &[f64],
        penalty: &ConsensusPenalty,
        grad: &mut [f64],
        rows: &mut Vec<f64>,
        row_grad: &mut Vec<f64>,
    ) -> f64 {
        let sd = self.layout().step_dim();
        let states = self.dynamics.rollout_into(s0, inputs, self.dt, rows);
        row_grad.clear();
        row_grad.resize(rows.len(), 0.0);
        let mut value = 0.0;
        for (row, g) in rows.chunks(sd).zip(row_grad.chunks_mut(sd)) {
            value += self.row_cost(row, g);
        }
        value += penalty.accumulate(rows, row_grad);

        let n = inputs.len() / 2;
        let input_off = self.layout().input_offset();
        let mut adj: State = [0.0; 4];
        for k in (0..n).rev() {
            let g = &row_grad[k * sd..(k + 1) * sd];
            for c in 0..4 {
                adj[c] += g[c];
            }
            let u = [inputs[2 * k], inputs[2 * k + 1]];
            let (ds, du) = self.dynamics.step_vjp(&states[k], &u, self.dt, &adj);
            let (gu0, gu1) = match input_off {
                Some(off) => (g[off], g[off + 1]),
                None => {
                    let r = self.cost.r_a;
                    value += r * (u[0] * u[0] + u[1] * u[1]);
                    (2.0 * r * u[0], 2.0 * r * u[1])
                }
            };
            grad[2 * k] = du[0] + gu0;
            grad[2 * k + 1] = du[1] + gu1;
            adj = ds;
        }
        value
    }

    pub fn input_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let (lo, hi) = self.dynamics.input_bounds();
        let lower = (0..self.horizon).flat_map(|_| lo).collect();
        let upper = (0..self.horizon).flat_map(|_| hi).collect();
        (lower, upper)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct XUpdateOutcome {
    pub plan: TrajectoryPlan,
    pub inputs: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub projected_gradient_norm: f64,
    pub converged: bool,
}

/// Minimizes the reduced Lagrangian over the inputs by projected gradient,
/// starting from `warm_inputs`. Errors only on non-finite results.
pub fn x_update(
    problem: &LocalProblem,
    s0: &State,
    warm_inputs: &[f64],
    penalty: &ConsensusPenalty,
    opts: &BoxMinimizerOptions,
) -> Result<XUpdateOutcome> {
    if warm_inputs.len() != 2 * problem.horizon {
        return Err(Error::Dimension(format!(
            "{} warm-start inputs for horizon {}",
            warm_inputs.len(),
            problem.horizon
        )));
    }
    if penalty.len() != problem.plan_len() {
        return Err(Error::Dimension(format!("penalty length {} vs plan {}", penalty.len(), problem.plan_len())));
    }
    let (lower, upper) = problem.input_bounds();
    let mut rows = Vec::new();
    let mut row_grad = Vec::new();
    let result = minimize_box(
        |u, g| problem.evaluate(s0, u, penalty, g, &mut rows, &mut row_grad),
        warm_inputs,
        &lower,
        &upper,
        opts,
    );
    if !result.value.is_finite() || result.x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Subsolver { iteration: result.iterations, reason: "non-finite trajectory".into() });
    }
    let plan = problem.dynamics.rollout(s0, &result.x, problem.dt)?;
    Ok(XUpdateOutcome {
        plan,
        inputs: result.x,
        value: result.value,
        iterations: result.iterations,
        projected_gradient_norm: result.projected_gradient_norm,
        converged: result.converged,
    })
}
