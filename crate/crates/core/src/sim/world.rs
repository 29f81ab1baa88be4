//! The time-stepped world: vehicle bodies, physics substeps, finish-line
//! detection and trace recording.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::agent::{Dynamics, Input, IterationDiagnostics, State};
use crate::error::{Error, Result};
use crate::geometry::{capsule_clearance, Capsule, CapsuleShape, Vec2};
use crate::path::ReferencePath;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClockConfig {
    pub control_hz: f64,
    pub physics_hz: f64,
    pub timeout_s: f64,
}

impl Default for ClockConfig {
    fn default() -> Self {
        Self { control_hz: 20.0, physics_hz: 160.0, timeout_s: 30.0 }
    }
}

impl ClockConfig {
    pub fn validate(&self) -> Result<()> {
        let ratio = self.physics_hz / self.control_hz;
        if !(self.control_hz > 0.0) || !(self.timeout_s > 0.0) || ratio < 1.0 || (ratio - ratio.round()).abs() > 1e-9 {
            return Err(Error::InvalidInput(format!(
                "physics rate {} must be a positive integer multiple of control rate {}",
                self.physics_hz, self.control_hz
            )));
        }
        Ok(())
    }

    pub fn control_dt(&self) -> f64 {
        1.0 / self.control_hz
    }

    pub fn substeps(&self) -> usize {
        (self.physics_hz / self.control_hz).round() as usize
    }
}

/// How a vehicle moves.
#[derive(Debug, Clone, PartialEq)]
pub enum Body {
    /// Free planar motion under a vehicle model.
    Free { dynamics: Dynamics, state: State },
    /// Constrained to the reference path; only the speed is controlled.
    OnPath { s: f64, v: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Command {
    Input(Input),
    Accel(f64),
}

/// Acceleration limits of path-following bodies.
pub const ON_PATH_ACCEL: (f64, f64) = (-6.0, 3.0);

#[derive(Debug, Clone)]
pub struct Vehicle {
    pub id: usize,
    pub path: Arc<ReferencePath>,
    pub v_ref: f64,
    pub shape: CapsuleShape,
    pub body: Body,
    pub finished_at: Option<f64>,
}

impl Vehicle {
    pub fn pose(&self) -> (Vec2, f64) {
        match &self.body {
            Body::Free { dynamics, state } => {
                let heading = match dynamics {
                    Dynamics::Bicycle(_) => state[2],
                    Dynamics::Holonomic(_) => state[3].atan2(state[2]),
                };
                (Vec2::new(state[0], state[1]), heading)
            }
            Body::OnPath { s, .. } => (self.path.point_at(*s), self.path.heading_at(*s)),
        }
    }

    pub fn speed(&self) -> f64 {
        match &self.body {
            Body::Free { dynamics: Dynamics::Bicycle(_), state } => state[3],
            Body::Free { dynamics: Dynamics::Holonomic(_), state } => state[2].hypot(state[3]),
            Body::OnPath { v, .. } => *v,
        }
    }

    pub fn capsule(&self) -> Capsule {
        let (p, h) = self.pose();
        self.shape.posed(p, h)
    }

    /// Arc length reached along the reference path.
    pub fn progress(&self) -> f64 {
        match &self.body {
            Body::Free { state, .. } => self.path.project(&Vec2::new(state[0], state[1])).s,
            Body::OnPath { s, .. } => *s,
        }
    }

    pub fn state(&self) -> Option<State> {
        match &self.body {
            Body::Free { state, .. } => Some(*state),
            Body::OnPath { .. } => None,
        }
    }

    fn substep(&mut self, cmd: &Command, dt: f64) -> Result<()> {
        match (&mut self.body, cmd) {
            (Body::Free { dynamics, state }, Command::Input(u)) => {
                *state = dynamics.step(state, u, dt);
            }
            (Body::OnPath { s, v }, Command::Accel(a)) => {
                let a = a.clamp(ON_PATH_ACCEL.0, ON_PATH_ACCEL.1);
                let next_v = (*v + a * dt).max(0.0);
                *s += 0.5 * (*v + next_v) * dt;
                *v = next_v;
            }
            _ => return Err(Error::InvalidInput(format!("command {cmd:?} does not fit vehicle {}", self.id))),
        }
        Ok(())
    }
}

/// Computes commands for all active vehicles once per control tick.
pub trait FleetController {
    fn commands(&mut self, t: f64, vehicles: &[Vehicle]) -> Result<Vec<Command>>;

    /// Called once a vehicle has crossed its finish line.
    fn vehicle_finished(&mut self, _id: usize) {}

    /// Per-agent diagnostics of the iterations run in the last tick.
    fn last_diagnostics(&self) -> Vec<(usize, usize, IterationDiagnostics)> {
        Vec::new()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VehicleSample {
    pub id: usize,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub v: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairClearance {
    pub a: usize,
    pub b: usize,
    /// Minimum over the physics substeps of the tick.
    pub clearance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TickRecord {
    pub tick: usize,
    /// Time at the end of the tick (s).
    pub t: f64,
    pub vehicles: Vec<VehicleSample>,
    pub clearances: Vec<PairClearance>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AgentIterationRecord {
    pub tick: usize,
    pub agent: usize,
    pub iteration: usize,
    #[serde(flatten)]
    pub diagnostics: IterationDiagnostics,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VehicleSummary {
    pub id: usize,
    pub v_ref: f64,
    pub path_length: f64,
    pub completion_time: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WorldTrace {
    pub control_dt: f64,
    pub ticks: Vec<TickRecord>,
    pub diagnostics: Vec<AgentIterationRecord>,
    pub vehicles: Vec<VehicleSummary>,
    pub timed_out: bool,
}

impl WorldTrace {
    /// Smallest recorded pairwise clearance; infinite without pairs.
    pub fn min_clearance(&self) -> f64 {
        self.ticks
            .iter()
            .flat_map(|t| t.clearances.iter().map(|c| c.clearance))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn has_violation(&self) -> bool {
        self.min_clearance() < 0.0
    }

    pub fn clearance_samples(&self) -> impl Iterator<Item = f64> + '_ {
        self.ticks.iter().flat_map(|t| t.clearances.iter().map(|c| c.clearance))
    }

    pub fn degraded_iterations(&self) -> usize {
        self.diagnostics.iter().filter(|d| d.diagnostics.degraded).count()
    }

    /// CSV with columns `tick,vehicle,x,y,v,min_clearance`; the clearance is
    /// the smallest one involving that vehicle in the tick (empty if alone).
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["tick", "vehicle", "x", "y", "v", "min_clearance"])?;
        for t in &self.ticks {
            for s in &t.vehicles {
                let c = t
                    .clearances
                    .iter()
                    .filter(|c| c.a == s.id || c.b == s.id)
                    .map(|c| c.clearance)
                    .fold(f64::INFINITY, f64::min);
                let c = if c.is_finite() { format!("{c:.6}") } else { String::new() };
                w.write_record([
                    t.tick.to_string(),
                    s.id.to_string(),
                    format!("{:.6}", s.x),
                    format!("{:.6}", s.y),
                    format!("{:.6}", s.v),
                    c,
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

pub struct World<'a> {
    clock: ClockConfig,
    vehicles: Vec<Vehicle>,
    controller: Box<dyn FleetController + 'a>,
    t: f64,
    tick: usize,
    trace: WorldTrace,
}

impl<'a> World<'a> {
    pub fn new(clock: ClockConfig, vehicles: Vec<Vehicle>, controller: Box<dyn FleetController + 'a>) -> Result<Self> {
        clock.validate()?;
        let summaries = vehicles
            .iter()
            .map(|v| VehicleSummary { id: v.id, v_ref: v.v_ref, path_length: v.path.length(), completion_time: None })
            .collect();
        Ok(Self {
            clock,
            vehicles,
            controller,
            t: 0.0,
            tick: 0,
            trace: WorldTrace {
                control_dt: clock.control_dt(),
                ticks: Vec::new(),
                diagnostics: Vec::new(),
                vehicles: summaries,
                timed_out: false,
            },
        })
    }

    pub fn vehicles(&self) -> &[Vehicle] {
        &self.vehicles
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn is_done(&self) -> bool {
        self.vehicles.is_empty() || self.trace.timed_out
    }

    /// One control tick: commands, physics substeps, finish detection.
    pub fn step(&mut self) -> Result<()> {
        if self.is_done() {
            return Ok(());
        }
        let commands = self.controller.commands(self.t, &self.vehicles)?;
        if commands.len() != self.vehicles.len() {
            return Err(Error::InvalidInput("controller returned the wrong number of commands".into()));
        }
        for (agent, iteration, diagnostics) in self.controller.last_diagnostics() {
            self.trace.diagnostics.push(AgentIterationRecord { tick: self.tick, agent, iteration, diagnostics });
        }
        let n = self.vehicles.len();
        let mut pair_min = vec![f64::INFINITY; n * n];
        let mut finished = vec![false; n];
        let h = self.clock.control_dt() / self.clock.substeps() as f64;
        for sub in 0..self.clock.substeps() {
            let t0 = self.t + sub as f64 * h;
            for (i, v) in self.vehicles.iter_mut().enumerate() {
                if finished[i] {
                    continue;
                }
                let before = v.progress();
                v.substep(&commands[i], h)?;
                let after = v.progress();
                let len = v.path.length();
                if after >= len {
                    let frac = if after > before { ((len - before) / (after - before)).clamp(0.0, 1.0) } else { 1.0 };
                    v.finished_at = Some(t0 + frac * h);
                    finished[i] = true;
                }
            }
            let caps: Vec<Capsule> = self.vehicles.iter().map(Vehicle::capsule).collect();
            for i in 0..n {
                for j in i + 1..n {
                    let c = capsule_clearance(&caps[i], &caps[j]);
                    if c < pair_min[i * n + j] {
                        pair_min[i * n + j] = c;
                    }
                }
            }
        }
        self.t += self.clock.control_dt();
        let mut clearances = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                let (a, b) = (self.vehicles[i].id.min(self.vehicles[j].id), self.vehicles[i].id.max(self.vehicles[j].id));
                clearances.push(PairClearance { a, b, clearance: pair_min[i * n + j] });
            }
        }
        let samples = self
            .vehicles
            .iter()
            .map(|v| {
                let (p, heading) = v.pose();
                VehicleSample { id: v.id, x: p.x, y: p.y, heading, v: v.speed() }
            })
            .collect();
        self.trace.ticks.push(TickRecord { tick: self.tick, t: self.t, vehicles: samples, clearances });
        self.tick += 1;

        let mut keep = Vec::with_capacity(n);
        for (i, v) in std::mem::take(&mut self.vehicles).into_iter().enumerate() {
            if finished[i] {
                if let Some(s) = self.trace.vehicles.iter_mut().find(|s| s.id == v.id) {
                    s.completion_time = v.finished_at;
                }
                self.controller.vehicle_finished(v.id);
            } else {
                keep.push(v);
            }
        }
        self.vehicles = keep;
        if !self.vehicles.is_empty() && self.t >= self.clock.timeout_s - 1e-9 {
            self.trace.timed_out = true;
        }
        Ok(())
    }

    pub fn run(mut self) -> Result<WorldTrace> {
        while !self.is_done() {
            self.step()?;
        }
        Ok(self.trace)
    }
}
