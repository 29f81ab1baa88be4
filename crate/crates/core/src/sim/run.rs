//! Scenario runners: intersection cases under any protocol and the
//! four-robot crossing used by the tuning sweep.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::fleet::{FleetOptions, MpcFleet};
use super::scenario::{Protocol, ScenarioSpec};
use super::world::{Body, ClockConfig, FleetController, Vehicle, World, WorldTrace};
use crate::agent::{AgentConfig, Dynamics, PenaltyMode};
use crate::baselines::{BaselineKind, ReservationFleet};
use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::path::ReferencePath;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    pub clock: ClockConfig,
    pub agent: AgentConfig,
    pub fleet: FleetOptions,
    /// [`AgentConfig::priority`] of the vehicle expected to reach the
    /// intersection first; the others keep 1.
    pub priority_boost: f64,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            clock: ClockConfig::default(),
            agent: AgentConfig::vehicle(),
            fleet: FleetOptions::default(),
            priority_boost: 4.0,
        }
    }
}

/// Index of the vehicle expected at the intersection first: the smallest
/// time, at its reference speed, to the first crossing of its path with
/// another's. Without any crossing the fastest vehicle; ties go to the
/// lower id.
pub fn first_arrival(spec: &ScenarioSpec) -> Option<usize> {
    let paths = spec.paths();
    let speeds = spec.reference_speeds();
    let time = |i: usize| {
        let s = (0..paths.len())
            .filter(|&j| j != i)
            .filter_map(|j| paths[i].first_crossing(&paths[j]).map(|(s, _)| s))
            .fold(f64::INFINITY, f64::min);
        s / speeds[i]
    };
    let times: Vec<f64> = (0..paths.len()).map(time).collect();
    let key = |i: usize| if times.iter().all(|t| t.is_infinite()) { -speeds[i] } else { times[i] };
    (0..paths.len()).min_by(|&a, &b| key(a).total_cmp(&key(b)).then(a.cmp(&b)))
}

/// Spawns every vehicle of the scenario at the start of its path, moving
/// at its reference speed.
pub fn spawn_vehicles(spec: &ScenarioSpec, agent: &AgentConfig) -> Result<Vec<Vehicle>> {
    spec.validate()?;
    let free = matches!(spec.protocol, Protocol::OaAdmm | Protocol::None);
    let speeds = spec.reference_speeds();
    Ok(spec
        .paths()
        .into_iter()
        .zip(speeds)
        .enumerate()
        .map(|(id, (path, v_ref))| {
            let body = if free {
                let p = path.point_at(0.0);
                let h = path.heading_at(0.0);
                let state = match agent.dynamics {
                    Dynamics::Bicycle(_) => [p.x, p.y, h, v_ref],
                    Dynamics::Holonomic(_) => [p.x, p.y, v_ref * h.cos(), v_ref * h.sin()],
                };
                Body::Free { dynamics: agent.dynamics, state }
            } else {
                Body::OnPath { s: 0.0, v: v_ref }
            };
            Vehicle { id, path, v_ref, shape: agent.shape, body, finished_at: None }
        })
        .collect())
}

fn controller<'a>(spec: &ScenarioSpec, vehicles: &[Vehicle], opts: &RunOptions) -> Result<Box<dyn FleetController + 'a>> {
    let first = first_arrival(spec);
    let agent = |id: usize| {
        let mut cfg = opts.agent;
        if spec.protocol == Protocol::OaAdmm && vehicles.len() > 1 && Some(id) == first {
            cfg.priority = opts.priority_boost;
        }
        cfg
    };
    let fleet = opts.fleet;
    Ok(match spec.protocol {
        Protocol::OaAdmm => Box::new(MpcFleet::new(vehicles, agent, fleet)?),
        Protocol::None => Box::new(MpcFleet::new(vehicles, agent, FleetOptions { communicate: false, ..fleet })?),
        Protocol::Reactive { fidelity } => Box::new(ReservationFleet::new(BaselineKind::Reactive, fidelity, vehicles)?),
        Protocol::Timeslot { fidelity } => Box::new(ReservationFleet::new(BaselineKind::Timeslot, fidelity, vehicles)?),
    })
}

/// Runs the vehicles whose ids pass `keep` until they all finish or the
/// clock times out.
pub fn run_scenario_subset(spec: &ScenarioSpec, opts: &RunOptions, keep: impl Fn(usize) -> bool) -> Result<WorldTrace> {
    let vehicles: Vec<Vehicle> = spawn_vehicles(spec, &opts.agent)?.into_iter().filter(|v| keep(v.id)).collect();
    if vehicles.is_empty() {
        return Err(Error::InvalidInput("no vehicle selected".into()));
    }
    let ctrl = controller(spec, &vehicles, opts)?;
    World::new(opts.clock, vehicles, ctrl)?.run()
}

pub fn run_scenario(spec: &ScenarioSpec, opts: &RunOptions) -> Result<WorldTrace> {
    run_scenario_subset(spec, opts, |_| true)
}

/// Layout of the four-robot crossing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossingConfig {
    /// Distance from start to the crossing (m).
    pub approach: f64,
    /// Distance past the crossing to the finish (m).
    pub exit: f64,
    /// Lateral offset of each lane from the axis (m). Below the robot
    /// radius, robots on the same axis meet head-on and must sidestep.
    pub lane_offset: f64,
    pub speed: f64,
    pub iterations_per_step: usize,
}

impl Default for CrossingConfig {
    fn default() -> Self {
        Self { approach: 5.0, exit: 5.0, lane_offset: 0.25, speed: 1.0, iterations_per_step: 1 }
    }
}

impl CrossingConfig {
    /// Robots 0 and 1 travel north and south, 2 and 3 east and west; every
    /// robot keeps to the right of its axis.
    pub fn paths(&self) -> Vec<Arc<ReferencePath>> {
        [0.5, -0.5, 0.0, 1.0]
            .iter()
            .map(|turns: &f64| {
                let h = std::f64::consts::PI * (turns + 0.5);
                let dir = Vec2::new(h.cos(), h.sin());
                let right = Vec2::new(dir.y, -dir.x);
                let off = right * self.lane_offset;
                Arc::new(ReferencePath::line(off - dir * self.approach, off + dir * self.exit))
            })
            .collect()
    }

    /// Horizontal-lane robots.
    pub fn is_horizontal(id: usize) -> bool {
        id >= 2
    }
}

fn crossing_vehicles(cfg: &CrossingConfig, agent: &AgentConfig, keep: &dyn Fn(usize) -> bool) -> Vec<Vehicle> {
    cfg.paths()
        .into_iter()
        .enumerate()
        .filter(|(id, _)| keep(*id))
        .map(|(id, path)| {
            let p = path.point_at(0.0);
            let t = path.tangent_at(0.0) * cfg.speed;
            Vehicle {
                id,
                path,
                v_ref: cfg.speed,
                shape: agent.shape,
                body: Body::Free { dynamics: agent.dynamics, state: [p.x, p.y, t.x, t.y] },
                finished_at: None,
            }
        })
        .collect()
}

/// Robot agent configuration for a sweep point; horizontal robots get `2w`.
pub fn crossing_agent(base: &AgentConfig, d: f64, w: f64, mode: PenaltyMode, id: usize) -> AgentConfig {
    let mut cfg = *base;
    cfg.mode = mode;
    cfg.phi.d = d;
    cfg.phi.w = if CrossingConfig::is_horizontal(id) { 2.0 * w } else { w };
    cfg
}

/// Four holonomic robots meeting at a crossing, or the subset passing
/// `keep` (used for the solo references).
pub fn four_robot_crossing_subset(
    d: f64,
    w: f64,
    mode: PenaltyMode,
    cfg: &CrossingConfig,
    base: &AgentConfig,
    clock: &ClockConfig,
    keep: &dyn Fn(usize) -> bool,
) -> Result<WorldTrace> {
    crossing_world(d, w, mode, cfg, base, clock, keep, true)
}

/// The crossing with communication switched off: every robot plans as if
/// alone, which gives the no-conflict reference of all four in one run.
pub fn four_robot_crossing_solo(
    d: f64,
    w: f64,
    mode: PenaltyMode,
    cfg: &CrossingConfig,
    base: &AgentConfig,
    clock: &ClockConfig,
) -> Result<WorldTrace> {
    crossing_world(d, w, mode, cfg, base, clock, &|_| true, false)
}

#[allow(clippy::too_many_arguments)]
fn crossing_world(
    d: f64,
    w: f64,
    mode: PenaltyMode,
    cfg: &CrossingConfig,
    base: &AgentConfig,
    clock: &ClockConfig,
    keep: &dyn Fn(usize) -> bool,
    communicate: bool,
) -> Result<WorldTrace> {
    if !matches!(base.dynamics, Dynamics::Holonomic(_)) {
        return Err(Error::InvalidInput("the crossing uses holonomic robots".into()));
    }
    let vehicles = crossing_vehicles(cfg, base, keep);
    let opts = FleetOptions { iterations_per_step: cfg.iterations_per_step, communicate, neighbor_radius: f64::INFINITY };
    let fleet = MpcFleet::new(&vehicles, |id| crossing_agent(base, d, w, mode, id), opts)?;
    World::new(*clock, vehicles, Box::new(fleet))?.run()
}

pub fn four_robot_crossing(d: f64, w: f64, mode: PenaltyMode) -> Result<WorldTrace> {
    four_robot_crossing_subset(
        d,
        w,
        mode,
        &CrossingConfig::default(),
        &AgentConfig::robot(),
        &ClockConfig::default(),
        &|_| true,
    )
}
