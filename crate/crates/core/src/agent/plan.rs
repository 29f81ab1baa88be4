//! Trajectory plans and the discrete vehicle models that generate them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec2;

/// Physical state `[x, y, ψ, v]` (bicycle) or `[x, y, vx, vy]` (holonomic).
pub type State = [f64; 4];
pub type Input = [f64; 2];

/// Per-step layout of a flattened plan.
///
/// Bicycle rows are `[x, y, ψ, v, a, β]`: the state reached at the end of
/// the step followed by the input applied during it. Holonomic rows are
/// `[x, y, vx, vy]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateLayout {
    Bicycle,
    Holonomic,
}

impl StateLayout {
    pub fn step_dim(self) -> usize {
        match self {
            StateLayout::Bicycle => 6,
            StateLayout::Holonomic => 4,
        }
    }

    /// Offset of the input inside a row, if the row stores one.
    pub fn input_offset(self) -> Option<usize> {
        match self {
            StateLayout::Bicycle => Some(4),
            StateLayout::Holonomic => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryPlan {
    layout: StateLayout,
    data: Vec<f64>,
    dt: f64,
}

impl TrajectoryPlan {
    pub fn new(layout: StateLayout, data: Vec<f64>, dt: f64) -> Result<Self> {
        let sd = layout.step_dim();
        if !data.len().is_multiple_of(sd) || data.len() / sd < 2 {
            return Err(Error::Dimension(format!(
                "plan data of length {} is not at least two {sd}-wide steps",
                data.len()
            )));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidInput(format!("step duration must be positive, got {dt}")));
        }
        Ok(Self { layout, data, dt })
    }

    pub fn layout(&self) -> StateLayout {
        self.layout
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn horizon(&self) -> usize {
        self.data.len() / self.layout.step_dim()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn step(&self, k: usize) -> &[f64] {
        let sd = self.layout.step_dim();
        &self.data[k * sd..(k + 1) * sd]
    }

    pub fn position(&self, k: usize) -> Vec2 {
        let s = self.step(k);
        Vec2::new(s[0], s[1])
    }

    pub fn heading(&self, k: usize) -> f64 {
        let s = self.step(k);
        match self.layout {
            StateLayout::Bicycle => s[2],
            StateLayout::Holonomic => s[3].atan2(s[2]),
        }
    }

    pub fn speed(&self, k: usize) -> f64 {
        let s = self.step(k);
        match self.layout {
            StateLayout::Bicycle => s[3],
            StateLayout::Holonomic => s[2].hypot(s[3]),
        }
    }

    pub fn pose(&self, k: usize) -> (Vec2, f64) {
        (self.position(k), self.heading(k))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BicycleParams {
    pub wheelbase: f64,
    pub accel_min: f64,
    pub accel_max: f64,
    pub steer_max: f64,
}

impl Default for BicycleParams {
    fn default() -> Self {
        Self { wheelbase: 2.5, accel_min: -6.0, accel_max: 3.0, steer_max: 0.6 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HolonomicParams {
    pub accel_max: f64,
}

impl Default for HolonomicParams {
    fn default() -> Self {
        Self { accel_max: 2.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Dynamics {
    Bicycle(BicycleParams),
    Holonomic(HolonomicParams),
}

impl Dynamics {
    pub fn layout(&self) -> StateLayout {
        match self {
            Dynamics::Bicycle(_) => StateLayout::Bicycle,
            Dynamics::Holonomic(_) => StateLayout::Holonomic,
        }
    }

    pub fn input_bounds(&self) -> (Input, Input) {
        match self {
            Dynamics::Bicycle(p) => ([p.accel_min, -p.steer_max], [p.accel_max, p.steer_max]),
            Dynamics::Holonomic(p) => ([-p.accel_max, -p.accel_max], [p.accel_max, p.accel_max]),
        }
    }

    /// One forward-Euler step.
    pub fn step(&self, s: &State, u: &Input, dt: f64) -> State {
        match self {
            Dynamics::Bicycle(p) => {
                let (sin, cos) = s[2].sin_cos();
                [
                    s[0] + s[3] * cos * dt,
                    s[1] + s[3] * sin * dt,
                    s[2] + s[3] * u[1].tan() / p.wheelbase * dt,
                    s[3] + u[0] * dt,
                ]
            }
            Dynamics::Holonomic(_) => [s[0] + s[2] * dt, s[1] + s[3] * dt, s[2] + u[0] * dt, s[3] + u[1] * dt],
        }
    }

    /// Vector-Jacobian product of [`Self::step`]: returns `(Jsᵀ adj, Juᵀ adj)`.
    pub fn step_vjp(&self, s: &State, u: &Input, dt: f64, adj: &State) -> (State, Input) {
        match self {
            Dynamics::Bicycle(p) => {
                let (sin, cos) = s[2].sin_cos();
                let tan = u[1].tan();
                let l = p.wheelbase;
                let ds = [
                    adj[0],
                    adj[1],
                    adj[0] * (-s[3] * sin * dt) + adj[1] * (s[3] * cos * dt) + adj[2],
                    adj[0] * cos * dt + adj[1] * sin * dt + adj[2] * tan / l * dt + adj[3],
                ];
                let sec2 = 1.0 + tan * tan;
                let du = [adj[3] * dt, adj[2] * s[3] * sec2 / l * dt];
                (ds, du)
            }
            Dynamics::Holonomic(_) => {
                let ds = [adj[0], adj[1], adj[0] * dt + adj[2], adj[1] * dt + adj[3]];
                (ds, [adj[2] * dt, adj[3] * dt])
            }
        }
    }

    /// Writes the plan rows produced by applying `inputs` (two per step)
    /// from `s0` and returns the states visited, `s0` included.
    pub fn rollout_into(&self, s0: &State, inputs: &[f64], dt: f64, rows: &mut Vec<f64>) -> Vec<State> {
        let n = inputs.len() / 2;
        let sd = self.layout().step_dim();
        rows.clear();
        rows.reserve(n * sd);
        let mut states = Vec::with_capacity(n + 1);
        states.push(*s0);
        let mut s = *s0;
        for k in 0..n {
            let u = [inputs[2 * k], inputs[2 * k + 1]];
            s = self.step(&s, &u, dt);
            rows.extend_from_slice(&s);
            if self.layout().input_offset().is_some() {
                rows.extend_from_slice(&u);
            }
            states.push(s);
        }
        states
    }

    pub fn rollout(&self, s0: &State, inputs: &[f64], dt: f64) -> Result<TrajectoryPlan> {
        let mut rows = Vec::new();
        self.rollout_into(s0, inputs, dt, &mut rows);
        TrajectoryPlan::new(self.layout(), rows, dt)
    }
}
