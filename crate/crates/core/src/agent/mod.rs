//! Per-agent OA-ADMM model predictive control.

mod adapt;
mod copies;
mod local;
mod node;
mod plan;

pub use adapt::{
    mu_filtered, mu_similarity_estimate, phi_ii, phi_ij, phi_value, FilteredSimilarity, MuConfig, PhiConfig,
    SimilarityEstimate, SimilarityWeights, StepSnapshot,
};
pub use copies::{copy_lagrangian, z_update, CopyTarget, ZUpdateOutcome};
pub use local::{x_update, ConsensusPenalty, LocalProblem, TrackingCost, XUpdateOutcome};
pub use node::{
    lambda_update, Agent, AgentConfig, AgentId, CopyMessage, IterationDiagnostics, NeighborLink, PenaltyLayout,
    PenaltyMode, PlanMessage, SelfLink,
};
pub use plan::{BicycleParams, Dynamics, HolonomicParams, Input, State, StateLayout, TrajectoryPlan};
