//! An OA-ADMM MPC agent: local state, links to neighbours and the message
//! types exchanged at the two communication barriers of an iteration.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::adapt::{mu_filtered, phi_ii, phi_ij, MuConfig, PhiConfig};
use super::copies::{z_update, CopyTarget};
use super::local::{x_update, ConsensusPenalty, LocalProblem, TrackingCost};
use super::plan::{BicycleParams, Dynamics, HolonomicParams, Input, State, TrajectoryPlan};
use crate::error::{Error, Result};
use crate::geometry::CapsuleShape;
use crate::optim::BoxMinimizerOptions;
use crate::path::ReferencePath;

pub type AgentId = usize;

/// How `ρ` is produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyMode {
    /// `φ` from clearances and `μ` from the filter.
    Adaptive,
    /// Plain ADMM: constant `ρ = w·clamp(D^a, φmin, φmax)` and `μ ≡ 1`.
    Fixed,
}

/// Which plan components the clearance-driven penalty acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyLayout {
    /// One value per horizon step, shared by all components of that step.
    PerStep,
    /// Positions get the per-step value, other components stay at `w·φmin`.
    PositionsOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub dynamics: Dynamics,
    pub cost: TrackingCost,
    pub shape: CapsuleShape,
    pub horizon: usize,
    pub dt: f64,
    pub phi: PhiConfig,
    pub mu: MuConfig,
    pub mode: PenaltyMode,
    pub layout: PenaltyLayout,
    pub x_max_iterations: usize,
    pub x_tolerance: f64,
    /// Non-monotone window of the trajectory optimizer; see
    /// [`BoxMinimizerOptions::memory`].
    #[serde(default = "default_x_memory")]
    pub x_memory: usize,
    /// Clearance the copies keep beyond contact (m); absorbs the gap
    /// between a plan and its copy at finite iteration counts.
    #[serde(default)]
    pub safety_margin: f64,
    /// Factor on the penalty of every copy of this agent's plan, wherever it
    /// is held. Copies with larger penalty move less in the z-update, so the
    /// agent with the larger factor tends to keep its plan.
    #[serde(default = "default_priority")]
    pub priority: f64,
}

fn default_x_memory() -> usize {
    10
}

fn default_priority() -> f64 {
    1.0
}

impl AgentConfig {
    pub fn vehicle() -> Self {
        Self {
            dynamics: Dynamics::Bicycle(BicycleParams::default()),
            cost: TrackingCost { q_lat: 12.0, ..TrackingCost::default() },
            shape: CapsuleShape::VEHICLE,
            horizon: 50,
            dt: 0.05,
            phi: PhiConfig { d: 0.5, ..PhiConfig::default() },
            mu: MuConfig::default(),
            mode: PenaltyMode::Adaptive,
            layout: PenaltyLayout::PerStep,
            x_max_iterations: 200,
            x_tolerance: 1e-4,
            x_memory: default_x_memory(),
            safety_margin: 0.5,
            priority: default_priority(),
        }
    }

    pub fn robot() -> Self {
        Self {
            dynamics: Dynamics::Holonomic(HolonomicParams::default()),
            cost: TrackingCost::default(),
            shape: CapsuleShape::ROBOT,
            horizon: 30,
            phi: PhiConfig::default(),
            safety_margin: 0.2,
            ..Self::vehicle()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.phi.validate()?;
        self.mu.validate()?;
        if self.horizon < 2 || !(self.dt > 0.0) || self.x_max_iterations == 0 || !(self.safety_margin >= 0.0)
            || !(self.priority > 0.0 && self.priority.is_finite())
        {
            return Err(Error::InvalidInput(
                "horizon ≥ 2, dt > 0, a positive iteration budget, a non-negative margin and a positive priority required"
                    .into(),
            ));
        }
        Ok(())
    }

    fn minimizer(&self) -> BoxMinimizerOptions {
        BoxMinimizerOptions { max_iterations: self.x_max_iterations, tolerance: self.x_tolerance, max_backtracks: 40, memory: self.x_memory }
    }

    /// The constant penalty used in [`PenaltyMode::Fixed`].
    pub fn fixed_rho(&self) -> f64 {
        let p = &self.phi;
        p.w * p.d.powf(p.a).clamp(p.phi_min, p.phi_max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelfLink {
    pub z: Vec<f64>,
    pub lambda: Vec<f64>,
    pub rho: Vec<f64>,
    pub mu: Vec<f64>,
}

/// Agent i's view of the pair (i, j). `*_ij` fields are owned by i;
/// `*_ji` fields are the neighbour's values as last received.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborLink {
    pub id: AgentId,
    pub shape: CapsuleShape,
    /// The neighbour's [`AgentConfig::priority`].
    pub priority: f64,
    /// Latest trajectory received from the neighbour.
    pub plan: TrajectoryPlan,
    pub z_ij: Vec<f64>,
    pub lambda_ij: Vec<f64>,
    pub rho_ij: Vec<f64>,
    pub mu_ij: Vec<f64>,
    pub z_ji: Vec<f64>,
    pub lambda_ji: Vec<f64>,
    pub rho_ji: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanMessage {
    pub from: AgentId,
    pub plan: TrajectoryPlan,
    pub shape: CapsuleShape,
    pub priority: f64,
}

/// The sender's copy of the receiver's plan with its multiplier and
/// penalty.
#[derive(Debug, Clone, PartialEq)]
pub struct CopyMessage {
    pub from: AgentId,
    pub to: AgentId,
    pub z: Vec<f64>,
    pub lambda: Vec<f64>,
    pub rho: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct IterationDiagnostics {
    /// `max(‖x_i − z_ii‖∞, max_j ‖x_j − z_ij‖∞)` after the z-update.
    pub primal_residual_inf: f64,
    pub rho_max: f64,
    pub x_iterations: usize,
    pub x_converged: bool,
    pub degraded: bool,
    pub relaxed: bool,
    pub active_steps: usize,
}

/// `λ ← μ∘λ + ρ∘(x − z)`; `mu = None` means `μ = 1`.
pub fn lambda_update(lambda: &mut [f64], mu: Option<&[f64]>, rho: &[f64], x: &[f64], z: &[f64]) {
    for e in 0..lambda.len() {
        let m = mu.map_or(1.0, |m| m[e]);
        lambda[e] = m * lambda[e] + rho[e] * (x[e] - z[e]);
    }
}

fn shift_steps(v: &mut [f64], sd: usize) {
    let n = v.len();
    if n < 2 * sd {
        return;
    }
    v.copy_within(sd.., 0);
    let (head, tail) = v.split_at_mut(n - sd);
    tail.copy_from_slice(&head[n - 2 * sd..]);
}

fn inf_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[derive(Debug, Clone)]
pub struct Agent {
    id: AgentId,
    config: AgentConfig,
    problem: LocalProblem,
    state: State,
    inputs: Vec<f64>,
    plan: TrajectoryPlan,
    self_link: SelfLink,
    links: BTreeMap<AgentId, NeighborLink>,
    iteration_in_step: usize,
    started: bool,
    diagnostics: IterationDiagnostics,
}

impl Agent {
    /// Builds the agent and its first plan by pure reference tracking.
    pub fn new(id: AgentId, config: AgentConfig, path: Arc<ReferencePath>, v_ref: f64, state: State) -> Result<Self> {
        config.validate()?;
        let problem = LocalProblem {
            dynamics: config.dynamics,
            cost: config.cost,
            path,
            v_ref,
            horizon: config.horizon,
            dt: config.dt,
        };
        let len = problem.plan_len();
        let warm = vec![0.0; 2 * config.horizon];
        let out = x_update(&problem, &state, &warm, &ConsensusPenalty::new(len), &config.minimizer())?;
        let rho = match config.mode {
            PenaltyMode::Adaptive => phi_ii(&[], len, &config.phi),
            PenaltyMode::Fixed => vec![config.fixed_rho(); len],
        }
        .into_iter()
        .map(|r| r * config.priority)
        .collect();
        let self_link = SelfLink { z: out.plan.as_slice().to_vec(), lambda: vec![0.0; len], rho, mu: vec![1.0; len] };
        Ok(Self {
            id,
            config,
            problem,
            state,
            inputs: out.inputs,
            plan: out.plan,
            self_link,
            links: BTreeMap::new(),
            iteration_in_step: 0,
            started: false,
            diagnostics: IterationDiagnostics::default(),
        })
    }

    pub fn id(&self) -> AgentId {
        self.id
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn problem(&self) -> &LocalProblem {
        &self.problem
    }

    pub fn state(&self) -> &State {
        &self.state
    }

    pub fn plan(&self) -> &TrajectoryPlan {
        &self.plan
    }

    pub fn inputs(&self) -> &[f64] {
        &self.inputs
    }

    pub fn self_link(&self) -> &SelfLink {
        &self.self_link
    }

    pub fn links(&self) -> &BTreeMap<AgentId, NeighborLink> {
        &self.links
    }

    pub fn diagnostics(&self) -> &IterationDiagnostics {
        &self.diagnostics
    }

    /// First input of the current plan.
    pub fn control(&self) -> Input {
        [self.inputs[0], self.inputs[1]]
    }

    pub fn remove_neighbor(&mut self, id: AgentId) {
        self.links.remove(&id);
    }

    fn flat(&self, per_step: &[f64]) -> Vec<f64> {
        let sd = self.problem.layout().step_dim();
        let floor = self.config.phi.lower();
        let mut out = Vec::with_capacity(per_step.len() * sd);
        for v in per_step {
            for c in 0..sd {
                let keep = self.config.layout == PenaltyLayout::PerStep || c < 2;
                out.push(if keep { *v } else { floor });
            }
        }
        out
    }

    /// Starts a new control step from the measured state: shifts every
    /// horizon-indexed quantity by one step and refreshes `μ`. The first
    /// call only records the state.
    pub fn begin_step(&mut self, measured: State) {
        self.state = measured;
        self.iteration_in_step = 0;
        if !self.started {
            self.started = true;
            return;
        }
        let sd = self.problem.layout().step_dim();
        shift_steps(&mut self.inputs, 2);
        let sl = &mut self.self_link;
        for v in [&mut sl.z, &mut sl.lambda, &mut sl.rho] {
            shift_steps(v, sd);
        }
        for link in self.links.values_mut() {
            for v in [
                &mut link.z_ij,
                &mut link.lambda_ij,
                &mut link.rho_ij,
                &mut link.z_ji,
                &mut link.lambda_ji,
                &mut link.rho_ji,
            ] {
                shift_steps(v, sd);
            }
        }
        let w = self.config.phi.w * self.config.priority;
        match self.config.mode {
            PenaltyMode::Adaptive => {
                let sl = &mut self.self_link;
                sl.mu = mu_filtered(&sl.mu, &sl.rho, w, &self.config.mu);
                for link in self.links.values_mut() {
                    link.mu_ij = mu_filtered(&link.mu_ij, &link.rho_ji, w, &self.config.mu);
                }
            }
            PenaltyMode::Fixed => {}
        }
        if let Ok(plan) = self.problem.dynamics.rollout(&self.state, &self.inputs, self.problem.dt) {
            self.plan = plan;
        }
    }

    pub fn x_update(&mut self) -> Result<()> {
        let mut penalty = ConsensusPenalty::new(self.problem.plan_len());
        let sl = &self.self_link;
        penalty.add_term(&sl.z, &sl.lambda, &sl.rho)?;
        for link in self.links.values() {
            penalty.add_term(&link.z_ji, &link.lambda_ji, &link.rho_ji)?;
        }
        self.diagnostics = IterationDiagnostics::default();
        let opts = self.config.minimizer();
        let result = x_update(&self.problem, &self.state, &self.inputs, &penalty, &opts);
        match result {
            Ok(out) => {
                self.diagnostics.x_iterations = out.iterations;
                self.diagnostics.x_converged = out.converged;
                self.inputs = out.inputs;
                self.plan = out.plan;
            }
            Err(e) => {
                log::warn!("agent {}: x-update failed, keeping previous plan: {e}", self.id);
                self.diagnostics.degraded = true;
            }
        }
        Ok(())
    }

    pub fn plan_message(&self) -> PlanMessage {
        PlanMessage { from: self.id, plan: self.plan.clone(), shape: self.config.shape, priority: self.config.priority }
    }

    pub fn receive_plan(&mut self, msg: &PlanMessage) -> Result<()> {
        if msg.from == self.id {
            return Ok(());
        }
        if msg.plan.horizon() != self.plan.horizon() || msg.plan.layout() != self.plan.layout() {
            return Err(Error::Dimension(format!("agent {} sent an incompatible plan", msg.from)));
        }
        if let Some(link) = self.links.get_mut(&msg.from) {
            link.plan = msg.plan.clone();
            link.shape = msg.shape;
            link.priority = msg.priority;
            return Ok(());
        }
        let len = self.problem.plan_len();
        let rho: Vec<f64> = self.link_penalty(&msg.plan, &msg.shape)?.into_iter().map(|r| r * msg.priority).collect();
        let rho_ji = rho.iter().map(|r| r / msg.priority * self.config.priority).collect();
        self.links.insert(
            msg.from,
            NeighborLink {
                id: msg.from,
                shape: msg.shape,
                priority: msg.priority,
                plan: msg.plan.clone(),
                z_ij: msg.plan.as_slice().to_vec(),
                lambda_ij: vec![0.0; len],
                rho_ij: rho.clone(),
                mu_ij: vec![1.0; len],
                z_ji: self.plan.as_slice().to_vec(),
                lambda_ji: vec![0.0; len],
                rho_ji,
            },
        );
        Ok(())
    }

    /// Penalty on a copy of `other` before the priority factor.
    fn link_penalty(&self, other: &TrajectoryPlan, shape: &CapsuleShape) -> Result<Vec<f64>> {
        Ok(match self.config.mode {
            PenaltyMode::Adaptive => {
                self.flat(&phi_ij(&self.plan, other, &self.config.shape, shape, &self.config.phi)?)
            }
            PenaltyMode::Fixed => vec![self.config.fixed_rho(); self.problem.plan_len()],
        })
    }

    pub fn z_update(&mut self) -> Result<()> {
        let own = CopyTarget {
            plan: &self.plan,
            lambda: &self.self_link.lambda,
            rho: &self.self_link.rho,
            shape: self.config.shape,
        };
        let targets: Vec<CopyTarget> = self
            .links
            .values()
            .map(|l| CopyTarget { plan: &l.plan, lambda: &l.lambda_ij, rho: &l.rho_ij, shape: l.shape })
            .collect();
        let top = self.links.values().map(|l| l.priority).fold(self.config.priority, f64::max);
        let out = z_update(&own, &targets, self.config.safety_margin, 10.0 * top * self.config.phi.upper())?;
        self.diagnostics.relaxed = out.relaxed;
        self.diagnostics.active_steps = out.active_steps;
        self.self_link.z = out.z_self;
        for (link, z) in self.links.values_mut().zip(out.z_neighbors) {
            link.z_ij = z;
        }
        Ok(())
    }

    pub fn lambda_update(&mut self) {
        let first = self.iteration_in_step == 0;
        let x = self.plan.as_slice();
        let sl = &mut self.self_link;
        let mut residual = inf_diff(x, &sl.z);
        lambda_update(&mut sl.lambda, first.then_some(sl.mu.as_slice()), &sl.rho, x, &sl.z);
        for link in self.links.values_mut() {
            let xj = link.plan.as_slice();
            residual = residual.max(inf_diff(xj, &link.z_ij));
            lambda_update(&mut link.lambda_ij, first.then_some(link.mu_ij.as_slice()), &link.rho_ij, xj, &link.z_ij);
        }
        self.diagnostics.primal_residual_inf = residual;
    }

    pub fn rho_update(&mut self) -> Result<()> {
        let base: Vec<Vec<f64>> =
            self.links.values().map(|l| self.link_penalty(&l.plan, &l.shape)).collect::<Result<_>>()?;
        let len = self.problem.plan_len();
        let own = match self.config.mode {
            PenaltyMode::Adaptive => {
                let sets: Vec<&[f64]> = base.iter().map(Vec::as_slice).collect();
                phi_ii(&sets, len, &self.config.phi)
            }
            PenaltyMode::Fixed => vec![self.config.fixed_rho(); len],
        };
        self.self_link.rho = own.into_iter().map(|r| r * self.config.priority).collect();
        for (link, rho) in self.links.values_mut().zip(base) {
            link.rho_ij = rho.into_iter().map(|r| r * link.priority).collect();
        }
        let rho_max = std::iter::once(&self.self_link.rho)
            .chain(self.links.values().map(|l| &l.rho_ij))
            .flat_map(|v| v.iter())
            .fold(0.0f64, |a, b| a.max(*b));
        self.diagnostics.rho_max = rho_max;
        Ok(())
    }

    pub fn copy_messages(&self) -> Vec<CopyMessage> {
        self.links
            .values()
            .map(|l| CopyMessage {
                from: self.id,
                to: l.id,
                z: l.z_ij.clone(),
                lambda: l.lambda_ij.clone(),
                rho: l.rho_ij.clone(),
            })
            .collect()
    }

    pub fn receive_copy(&mut self, msg: &CopyMessage) -> Result<()> {
        if msg.to != self.id {
            return Err(Error::InvalidInput(format!("message for {} delivered to {}", msg.to, self.id)));
        }
        let link = self
            .links
            .get_mut(&msg.from)
            .ok_or_else(|| Error::InvalidInput(format!("agent {} has no link to {}", self.id, msg.from)))?;
        link.z_ji.clone_from(&msg.z);
        link.lambda_ji.clone_from(&msg.lambda);
        link.rho_ji.clone_from(&msg.rho);
        Ok(())
    }

    pub fn finish_iteration(&mut self) {
        self.iteration_in_step += 1;
    }
}
