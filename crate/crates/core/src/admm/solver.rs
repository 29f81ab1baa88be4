use std::io::Write;

use nalgebra::DVector;

use super::problem::{lambda_step, residuals_unchecked, ConsensusProblem, IterateState, Mu, PenaltyVector, ResidualPair};
use super::subsolver::{Subproblem, Subsolver};
use crate::error::{Error, Result};

/// Adaptation function `φ`: produces the next penalty vector.
pub trait Adaptation {
    fn adapt(&mut self, next: &IterateState, residuals: &ResidualPair) -> DVector<f64>;
}

/// Similarity function `μ`: forgetting factor for carried-over multipliers,
/// queried at the first iteration of every time step.
pub trait Similarity {
    fn similarity(&mut self, state: &IterateState) -> Mu;
}

/// Keeps `ρ` fixed.
#[derive(Debug, Clone, Copy, Default)]
pub struct ConstantPenalty;

impl Adaptation for ConstantPenalty {
    fn adapt(&mut self, next: &IterateState, _: &ResidualPair) -> DVector<f64> {
        next.rho.values().clone()
    }
}

/// `μ ≡ 1`.
#[derive(Debug, Clone, Copy, Default)]
pub struct UnitSimilarity;

impl Similarity for UnitSimilarity {
    fn similarity(&mut self, _: &IterateState) -> Mu {
        Mu::one()
    }
}

impl<F: FnMut(&IterateState, &ResidualPair) -> DVector<f64>> Adaptation for F {
    fn adapt(&mut self, next: &IterateState, residuals: &ResidualPair) -> DVector<f64> {
        self(next, residuals)
    }
}

pub struct SolverConfig {
    pub max_iterations_per_step: usize,
    pub primal_tolerance: f64,
    pub dual_tolerance: f64,
    pub adaptation: Box<dyn Adaptation>,
    pub similarity: Box<dyn Similarity>,
}

impl SolverConfig {
    /// Fixed penalty and `μ ≡ 1`, i.e. vector-penalty ADMM.
    pub fn new(max_iterations_per_step: usize, primal_tolerance: f64, dual_tolerance: f64) -> Result<Self> {
        if max_iterations_per_step == 0 {
            return Err(Error::InvalidInput("max_iterations_per_step must be positive".into()));
        }
        if !(primal_tolerance > 0.0 && dual_tolerance > 0.0) {
            return Err(Error::InvalidInput("tolerances must be strictly positive".into()));
        }
        Ok(Self {
            max_iterations_per_step,
            primal_tolerance,
            dual_tolerance,
            adaptation: Box::new(ConstantPenalty),
            similarity: Box::new(UnitSimilarity),
        })
    }

    pub fn with_adaptation(mut self, adaptation: impl Adaptation + 'static) -> Self {
        self.adaptation = Box::new(adaptation);
        self
    }

    pub fn with_similarity(mut self, similarity: impl Similarity + 'static) -> Self {
        self.similarity = Box::new(similarity);
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    /// Iterate after the update, carrying `ρᵏ⁺¹`.
    pub state: IterateState,
    /// `ρᵏ`, the penalty the iteration was computed with.
    pub rho_used: PenaltyVector,
    pub mu_used: Mu,
    pub residuals: ResidualPair,
    pub objective: f64,
    /// `‖ρᵏ⁺¹ − ρᵏ‖∞`, logged so settling of the penalty can be checked.
    pub rho_change: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub initial: IterateState,
    pub records: Vec<IterationRecord>,
    pub converged: bool,
}

impl Trace {
    pub fn last_state(&self) -> &IterateState {
        self.records.last().map(|r| &r.state).unwrap_or(&self.initial)
    }

    /// Rows `k, ‖r‖∞, ‖s‖∞, objective, min ρ, max ρ`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["k", "primal_residual_inf", "dual_residual_inf", "objective", "rho_min", "rho_max"])?;
        for rec in &self.records {
            w.write_record([
                rec.state.k.to_string(),
                format!("{:e}", rec.residuals.primal_inf()),
                format!("{:e}", rec.residuals.dual_inf()),
                format!("{:e}", rec.objective),
                format!("{:e}", rec.state.rho.min()),
                format!("{:e}", rec.state.rho.max()),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Runs one OA-ADMM iteration (x-update, z-update, λ-update, ρ-update) in
/// that order.
pub fn iterate(
    problem: &ConsensusProblem,
    state: &IterateState,
    mu: Mu,
    x_sub: &mut dyn Subsolver,
    z_sub: &mut dyn Subsolver,
    adaptation: &mut dyn Adaptation,
) -> Result<IterationRecord> {
    let iteration = state.k;
    let fail = |reason: String| Error::Subsolver { iteration, reason };

    let bz_c = &problem.b * &state.z - &problem.c;
    let x = x_sub
        .solve(&Subproblem {
            objective: problem.f.as_ref(),
            coupling: &problem.a,
            offset: &bz_c,
            lambda: &state.lambda,
            rho: &state.rho,
            warm_start: &state.x,
        })
        .map_err(fail)?;
    if x.len() != problem.n() || x.iter().any(|v| !v.is_finite()) {
        return Err(fail("x-subsolver returned an invalid point".into()));
    }

    let ax_c = &problem.a * &x - &problem.c;
    let z = z_sub
        .solve(&Subproblem {
            objective: problem.g.as_ref(),
            coupling: &problem.b,
            offset: &ax_c,
            lambda: &state.lambda,
            rho: &state.rho,
            warm_start: &state.z,
        })
        .map_err(fail)?;
    if z.len() != problem.m() || z.iter().any(|v| !v.is_finite()) {
        return Err(fail("z-subsolver returned an invalid point".into()));
    }

    let residuals = residuals_unchecked(problem, &state.z, &state.rho, &x, &z);
    let lambda = lambda_step(&state.lambda, &state.rho, &residuals.r, &mu)?;
    let mut next = IterateState { x, z, lambda, rho: state.rho.clone(), k: state.k + 1, t: state.t };

    let rho_raw = adaptation.adapt(&next, &residuals);
    if rho_raw.len() != problem.p() {
        return Err(Error::Dimension(format!("adaptation returned {} entries, expected {}", rho_raw.len(), problem.p())));
    }
    let rho_next = PenaltyVector::new(rho_raw)
        .map_err(|e| Error::InvalidInput(format!("adaptation output at iteration {iteration}: {e}")))?;
    let rho_change = (rho_next.values() - state.rho.values()).amax();
    next.rho = rho_next;

    Ok(IterationRecord {
        objective: problem.objective(&next.x, &next.z),
        state: next,
        rho_used: state.rho.clone(),
        mu_used: mu,
        residuals,
        rho_change,
    })
}

fn run_step(
    problem: &ConsensusProblem,
    initial: IterateState,
    x_sub: &mut dyn Subsolver,
    z_sub: &mut dyn Subsolver,
    config: &mut SolverConfig,
) -> Result<Trace> {
    initial.check(problem)?;
    let mut records: Vec<IterationRecord> = Vec::new();
    let mut converged = false;
    for i in 0..config.max_iterations_per_step {
        let current = records.last().map(|r| &r.state).unwrap_or(&initial);
        // Within a time step the multipliers are carried over unchanged.
        let mu = if i == 0 { config.similarity.similarity(current) } else { Mu::one() };
        let rec = iterate(problem, current, mu, x_sub, z_sub, config.adaptation.as_mut())?;
        let done = rec.residuals.primal_inf() <= config.primal_tolerance
            && rec.residuals.dual_inf() <= config.dual_tolerance;
        records.push(rec);
        if done {
            converged = true;
            break;
        }
    }
    Ok(Trace { initial, records, converged })
}

/// Iterates a time-invariant problem until both residuals are below their
/// tolerances or the iteration cap is hit. Non-convergence is reported in
/// the trace, not as an error.
pub fn solve_static(
    problem: &ConsensusProblem,
    initial: IterateState,
    x_sub: &mut dyn Subsolver,
    z_sub: &mut dyn Subsolver,
    config: &mut SolverConfig,
) -> Result<Trace> {
    run_step(problem, initial, x_sub, z_sub, config)
}

/// Carries the iterate across control steps of a time-varying problem.
pub struct OnlineSolver {
    pub config: SolverConfig,
    state: IterateState,
    started: bool,
}

impl OnlineSolver {
    pub fn new(config: SolverConfig, initial: IterateState) -> Self {
        Self { config, state: initial, started: false }
    }

    pub fn state(&self) -> &IterateState {
        &self.state
    }

    /// Runs the iterations of the next time step against `problem`, the
    /// problem instance for that step.
    pub fn step(&mut self, problem: &ConsensusProblem, x_sub: &mut dyn Subsolver, z_sub: &mut dyn Subsolver) -> Result<Trace> {
        let mut initial = self.state.clone();
        if self.started {
            initial.t += 1;
        }
        initial.k = 0;
        let trace = run_step(problem, initial, x_sub, z_sub, &mut self.config)?;
        self.state = trace.last_state().clone();
        self.started = true;
        Ok(trace)
    }
}
