//! Synchronous multi-agent simulation.

mod scenario;

pub use scenario::{
    enumerate_conflict_cases, Arm, ConflictCase, IntersectionGeometry, Maneuver, Protocol, RelativeArm, ScenarioSpec,
    VehicleSpec,
};

mod fleet;
mod run;
mod world;

pub use world::{
    AgentIterationRecord, Body, ClockConfig, Command, FleetController, PairClearance, TickRecord, Vehicle,
    VehicleSample, VehicleSummary, World, WorldTrace, ON_PATH_ACCEL,
};
pub use fleet::{FleetOptions, MpcFleet};
pub use run::{
    crossing_agent, first_arrival, four_robot_crossing, four_robot_crossing_solo, four_robot_crossing_subset, run_scenario, run_scenario_subset,
    spawn_vehicles, CrossingConfig, RunOptions,
};
