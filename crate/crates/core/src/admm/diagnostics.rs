//! Convergence diagnostics: the Lyapunov certificate, the objective
//! suboptimality sandwich and the online dominance monitor.

use nalgebra::{DMatrix, DVector};

use super::problem::{IterateState, PenaltyVector, SaddlePoint};
use super::solver::{IterationRecord, Trace};
use crate::error::{dim_check, Error, Result};

/// `V = ‖R⁻¹(λ − λ*)‖² + ‖R B(z − z*)‖²`.
pub fn lyapunov_value(state: &IterateState, saddle: &SaddlePoint, b: &DMatrix<f64>) -> Result<f64> {
    lyapunov_with(&state.rho, &state.lambda, &state.z, saddle, b)
}

fn lyapunov_with(
    rho: &PenaltyVector,
    lambda: &DVector<f64>,
    z: &DVector<f64>,
    saddle: &SaddlePoint,
    b: &DMatrix<f64>,
) -> Result<f64> {
    if rho.min() <= 0.0 {
        return Err(Error::InvalidInput("penalty entries must be positive".into()));
    }
    dim_check(
        lambda.len() == rho.len() && saddle.lambda_star.len() == rho.len() && b.nrows() == rho.len(),
        || format!("lambda {}, rho {}, B rows {}", lambda.len(), rho.len(), b.nrows()),
    )?;
    dim_check(z.len() == b.ncols() && saddle.z_star.len() == b.ncols(), || {
        format!("z {}, z* {}, B cols {}", z.len(), saddle.z_star.len(), b.ncols())
    })?;
    let dl = lambda - &saddle.lambda_star;
    let dz = b * (z - &saddle.z_star);
    Ok(rho.inverse_weighted_norm_sq(&dl) + rho.weighted_norm_sq(&dz))
}

/// Both sides of the per-iteration decrease `Vᵏ⁺¹ ≤ Vᵏ − ‖Rr‖² − ‖RB(zᵏ⁺¹−zᵏ)‖²`,
/// evaluated with the penalty the iteration used.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyapunovStep {
    pub v_prev: f64,
    pub v_next: f64,
    /// Right-hand side of the inequality.
    pub bound: f64,
}

impl LyapunovStep {
    /// `bound − v_next`; negative means the decrease was violated.
    pub fn margin(&self) -> f64 {
        self.bound - self.v_next
    }
}

pub fn lyapunov_step(
    prev: &IterateState,
    record: &IterationRecord,
    saddle: &SaddlePoint,
    b: &DMatrix<f64>,
) -> Result<LyapunovStep> {
    let rho = &record.rho_used;
    let v_prev = lyapunov_with(rho, &prev.lambda, &prev.z, saddle, b)?;
    let v_next = lyapunov_with(rho, &record.state.lambda, &record.state.z, saddle, b)?;
    let dz = b * (&record.state.z - &prev.z);
    let bound = v_prev - rho.weighted_norm_sq(&record.residuals.r) - rho.weighted_norm_sq(&dz);
    Ok(LyapunovStep { v_prev, v_next, bound })
}

/// `−λ*ᵀr ≤ p − p* ≤ −λᵀr − (ρ∘B(zᵏ⁺¹−zᵏ))ᵀ(−r + B(zᵏ⁺¹−z*))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuboptimalityBounds {
    pub lower: f64,
    pub gap: f64,
    pub upper: f64,
}

impl SuboptimalityBounds {
    pub fn holds(&self, slack: f64) -> bool {
        self.lower <= self.gap + slack && self.gap <= self.upper + slack
    }
}

pub fn suboptimality_bounds(
    prev: &IterateState,
    record: &IterationRecord,
    saddle: &SaddlePoint,
    b: &DMatrix<f64>,
) -> Result<SuboptimalityBounds> {
    let r = &record.residuals.r;
    dim_check(r.len() == saddle.lambda_star.len(), || "residual vs lambda* length".into())?;
    let z = &record.state.z;
    let lower = -saddle.lambda_star.dot(r);
    let gap = record.objective - saddle.p_star;
    let dz = record.rho_used.scale(&(b * (z - &prev.z)));
    let upper = -record.state.lambda.dot(r) - dz.dot(&(-r + b * (z - &saddle.z_star)));
    Ok(SuboptimalityBounds { lower, gap, upper })
}

/// Compares per-step contraction with the drift of the optimum between two
/// consecutive control steps. The final iterate of each step stands in for
/// that step's optimum.
#[derive(Debug, Clone, PartialEq)]
pub struct OnlineReport {
    pub x_contraction: f64,
    pub x_drift: f64,
    pub z_contraction: f64,
    pub z_drift: f64,
    /// `None` when either trace has no iterations.
    pub x_dominates: Option<bool>,
    pub z_dominates: Option<bool>,
    /// `‖ρᵏ⁺¹ − ρᵏ‖∞` at the last iteration of the later step.
    pub rho_settling: Option<f64>,
}

pub fn online_convergence_monitor(trace_t: &Trace, trace_next: &Trace) -> OnlineReport {
    let (Some(last_t), Some(last_next)) = (trace_t.records.last(), trace_next.records.last()) else {
        return OnlineReport {
            x_contraction: f64::NAN,
            x_drift: f64::NAN,
            z_contraction: f64::NAN,
            z_drift: f64::NAN,
            x_dominates: None,
            z_dominates: None,
            rho_settling: trace_next.records.last().map(|r| r.rho_change),
        };
    };
    let x_star = &last_t.state.x;
    let z_star = &last_t.state.z;
    let first = &trace_t.initial;
    let x_contraction = (&first.x - x_star).norm() - (&last_t.state.x - x_star).norm();
    let z_contraction = (&first.z - z_star).norm() - (&last_t.state.z - z_star).norm();
    let x_drift = (&last_next.state.x - x_star).norm();
    let z_drift = (&last_next.state.z - z_star).norm();
    OnlineReport {
        x_contraction,
        x_drift,
        z_contraction,
        z_drift,
        x_dominates: Some(x_contraction > x_drift),
        z_dominates: Some(z_contraction > z_drift),
        rho_settling: Some(last_next.rho_change),
    }
}
