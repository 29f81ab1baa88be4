//! Generic online adaptive ADMM for `min f(x) + g(z) s.t. Ax + Bz = c`
//! with an elementwise penalty vector.

mod diagnostics;
mod problem;
mod solver;
mod subsolver;

pub use diagnostics::{
    lyapunov_step, lyapunov_value, online_convergence_monitor, suboptimality_bounds, LyapunovStep, OnlineReport,
    SuboptimalityBounds,
};
pub use problem::{
    augmented_lagrangian, augmented_lagrangian_grad_x, augmented_lagrangian_grad_z, compute_residuals, lambda_step,
    ConsensusProblem, IterateState, Mu, Objective, PenaltyVector, QuadraticObjective, ResidualPair, SaddlePoint,
};
pub use solver::{
    iterate, solve_static, Adaptation, ConstantPenalty, IterationRecord, OnlineSolver, Similarity, SolverConfig, Trace,
    UnitSimilarity,
};
pub use subsolver::{ProjectedGradientSubsolver, QuadraticSubsolver, Subproblem, Subsolver};

#[cfg(test)]
mod tests;
