//! OA-ADMM MPC agents driving free bodies, with the barrier-synchronous
//! message rounds of one control tick.

use std::collections::BTreeMap;

use super::world::{Command, FleetController, Vehicle};
use crate::agent::{Agent, AgentConfig, AgentId, CopyMessage, IterationDiagnostics, PlanMessage};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FleetOptions {
    pub iterations_per_step: usize,
    /// Agents exchange messages. Without it every agent plans alone.
    pub communicate: bool,
    /// Agents link when their current positions are at most this far apart.
    pub neighbor_radius: f64,
}

impl Default for FleetOptions {
    fn default() -> Self {
        Self { iterations_per_step: 1, communicate: true, neighbor_radius: 25.0 }
    }
}

#[derive(Debug)]
pub struct MpcFleet {
    agents: BTreeMap<AgentId, Agent>,
    opts: FleetOptions,
    last: Vec<(usize, usize, IterationDiagnostics)>,
}

impl MpcFleet {
    /// One agent per free-body vehicle; `config` picks each agent's
    /// configuration by vehicle id.
    pub fn new(vehicles: &[Vehicle], config: impl Fn(usize) -> AgentConfig, opts: FleetOptions) -> Result<Self> {
        if opts.iterations_per_step == 0 {
            return Err(Error::InvalidInput("at least one iteration per step".into()));
        }
        let mut agents = BTreeMap::new();
        for v in vehicles {
            let state = v.state().ok_or_else(|| Error::InvalidInput(format!("vehicle {} is not a free body", v.id)))?;
            agents.insert(v.id, Agent::new(v.id, config(v.id), v.path.clone(), v.v_ref, state)?);
        }
        Ok(Self { agents, opts, last: Vec::new() })
    }

    pub fn agents(&self) -> &BTreeMap<AgentId, Agent> {
        &self.agents
    }

    fn neighbor_pairs(&self, vehicles: &[Vehicle]) -> Vec<(AgentId, AgentId)> {
        let mut out = Vec::new();
        if !self.opts.communicate {
            return out;
        }
        for (i, a) in vehicles.iter().enumerate() {
            for b in &vehicles[i + 1..] {
                if (a.pose().0 - b.pose().0).norm() <= self.opts.neighbor_radius {
                    out.push((a.id, b.id));
                }
            }
        }
        out
    }

    /// Runs the iterations of one control step from the given states.
    pub fn step(&mut self, vehicles: &[Vehicle]) -> Result<()> {
        let pairs = self.neighbor_pairs(vehicles);
        let linked = |a: AgentId, b: AgentId| pairs.contains(&(a.min(b), a.max(b)));
        for v in vehicles {
            let agent = self.agents.get_mut(&v.id).ok_or_else(|| Error::InvalidInput(format!("no agent {}", v.id)))?;
            let stale: Vec<AgentId> = agent.links().keys().copied().filter(|&j| !linked(v.id, j)).collect();
            for j in stale {
                agent.remove_neighbor(j);
            }
            agent.begin_step(v.state().expect("checked at construction"));
        }
        self.last.clear();
        for iteration in 0..self.opts.iterations_per_step {
            for agent in self.agents.values_mut() {
                agent.x_update()?;
            }
            let plans: Vec<PlanMessage> = self.agents.values().map(Agent::plan_message).collect();
            for (&id, agent) in self.agents.iter_mut() {
                for msg in plans.iter().filter(|m| linked(id, m.from)) {
                    agent.receive_plan(msg)?;
                }
            }
            for agent in self.agents.values_mut() {
                agent.z_update()?;
                agent.lambda_update();
                agent.rho_update()?;
            }
            let copies: Vec<CopyMessage> = self.agents.values().flat_map(Agent::copy_messages).collect();
            for msg in &copies {
                self.agents
                    .get_mut(&msg.to)
                    .ok_or_else(|| Error::InvalidInput(format!("copy addressed to unknown agent {}", msg.to)))?
                    .receive_copy(msg)?;
            }
            for agent in self.agents.values_mut() {
                agent.finish_iteration();
                self.last.push((agent.id(), iteration, *agent.diagnostics()));
            }
        }
        Ok(())
    }
}

impl FleetController for MpcFleet {
    fn commands(&mut self, _t: f64, vehicles: &[Vehicle]) -> Result<Vec<Command>> {
        self.step(vehicles)?;
        Ok(vehicles.iter().map(|v| Command::Input(self.agents[&v.id].control())).collect())
    }

    fn vehicle_finished(&mut self, id: usize) {
        self.agents.remove(&id);
        for agent in self.agents.values_mut() {
            agent.remove_neighbor(id);
        }
    }

    fn last_diagnostics(&self) -> Vec<(usize, usize, IterationDiagnostics)> {
        self.last.clone()
    }
}
