//! The collision-copy optimization (z-update).
//!
//! Per horizon step the copies' positions solve a small QP: stay close to
//! `x + λ/(2ρ)` in the `ρ`-weighted norm subject to one separating-plane
//! constraint per neighbour, linearized at the incoming plans. All other
//! components have the closed-form minimizer.

use super::plan::TrajectoryPlan;
use crate::error::{Error, Result};
use crate::geometry::{separating_halfspace, CapsuleShape, Vec2};

/// One plan entering the z-update with the multiplier and penalty of the
/// copy that tracks it.
#[derive(Debug, Clone, Copy)]
pub struct CopyTarget<'a> {
    pub plan: &'a TrajectoryPlan,
    pub lambda: &'a [f64],
    pub rho: &'a [f64],
    pub shape: CapsuleShape,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZUpdateOutcome {
    pub z_self: Vec<f64>,
    pub z_neighbors: Vec<Vec<f64>>,
    /// Horizon steps where at least one constraint was active.
    pub active_steps: usize,
    /// The exact QP did not converge and a bounded-multiplier relaxation
    /// was returned instead; separation may be violated.
    pub relaxed: bool,
}

/// `λᵀ(x − z) + ‖R(x − z)‖²` for a single copy; gradient with respect to `z`
/// is written into `grad`.
pub fn copy_lagrangian(x: &[f64], z: &[f64], lambda: &[f64], rho: &[f64], grad: &mut [f64]) -> f64 {
    let mut v = 0.0;
    for e in 0..x.len() {
        let r = x[e] - z[e];
        v += lambda[e] * r + rho[e] * r * r;
        grad[e] = -lambda[e] - 2.0 * rho[e] * r;
    }
    v
}

fn unconstrained(target: &CopyTarget) -> Vec<f64> {
    target
        .plan
        .as_slice()
        .iter()
        .zip(target.lambda)
        .zip(target.rho)
        .map(|((x, l), r)| x + l / (2.0 * r))
        .collect()
}

struct Constraint {
    normal: Vec2,
    margin: f64,
}

const MAX_SWEEPS: usize = 2000;
const TOL: f64 = 1e-10;

/// Hildreth's dual coordinate ascent for
/// `min Σ_b w_b‖p_b − p̂_b‖²  s.t.  nⱼᵀ(p_0 − p_j) ≥ mⱼ`, `p_0` being the
/// own copy. `weights[b]` holds the per-axis weights of block `b`.
/// Returns whether it converged.
fn hildreth(points: &mut [Vec2], weights: &[Vec2], cons: &[Constraint], bound: f64) -> bool {
    let inv: Vec<Vec2> = weights.iter().map(|w| Vec2::new(0.5 / w.x, 0.5 / w.y)).collect();
    let curv: Vec<f64> = cons
        .iter()
        .enumerate()
        .map(|(j, c)| {
            let n2 = c.normal.component_mul(&c.normal);
            n2.dot(&inv[0]) + n2.dot(&inv[j + 1])
        })
        .collect();
    let mut nu = vec![0.0; cons.len()];
    for _ in 0..MAX_SWEEPS {
        let mut max_step: f64 = 0.0;
        for (j, c) in cons.iter().enumerate() {
            let gap = c.margin - c.normal.dot(&(points[0] - points[j + 1]));
            let next = (nu[j] + gap / curv[j]).clamp(0.0, bound);
            let delta = next - nu[j];
            if delta != 0.0 {
                points[0] += c.normal.component_mul(&inv[0]) * delta;
                points[j + 1] -= c.normal.component_mul(&inv[j + 1]) * delta;
                nu[j] = next;
                max_step = max_step.max(delta.abs());
            }
        }
        let worst = cons
            .iter()
            .enumerate()
            .map(|(j, c)| c.margin - c.normal.dot(&(points[0] - points[j + 1])))
            .fold(f64::NEG_INFINITY, f64::max);
        let scale = 1.0 + nu.iter().fold(0.0f64, |a, b| a.max(*b));
        if worst <= TOL && max_step <= TOL * scale {
            return true;
        }
    }
    false
}

/// Solves the z-update for the own copy and one copy per neighbour.
/// `margin` is extra clearance demanded on top of contact; `slack_bound`
/// caps the multipliers of the fallback relaxation.
pub fn z_update(own: &CopyTarget, neighbors: &[CopyTarget], margin: f64, slack_bound: f64) -> Result<ZUpdateOutcome> {
    let layout = own.plan.layout();
    let n_h = own.plan.horizon();
    let len = own.plan.as_slice().len();
    for t in std::iter::once(own).chain(neighbors) {
        if t.plan.layout() != layout || t.plan.horizon() != n_h || t.lambda.len() != len || t.rho.len() != len {
            return Err(Error::Dimension("z-update inputs disagree in layout or length".into()));
        }
        if t.rho.iter().any(|r| !(*r > 0.0)) {
            return Err(Error::InvalidInput("z-update penalty must be positive".into()));
        }
    }
    let sd = layout.step_dim();
    let mut z_self = unconstrained(own);
    let mut z_neighbors: Vec<Vec<f64>> = neighbors.iter().map(unconstrained).collect();
    let mut active_steps = 0;
    let mut relaxed = false;

    for h in 0..n_h {
        let (pi, hi) = own.plan.pose(h);
        let cap_i = own.shape.posed(pi, hi);
        let dir_i = Vec2::new(hi.cos(), hi.sin());
        let cons: Vec<Constraint> = neighbors
            .iter()
            .map(|nb| {
                let (pj, hj) = nb.plan.pose(h);
                let cap_j = nb.shape.posed(pj, hj);
                let normal = separating_halfspace(&cap_i, &cap_j).normal;
                let dir_j = Vec2::new(hj.cos(), hj.sin());
                let margin = margin
                    + own.shape.radius
                    + nb.shape.radius
                    + 0.5 * own.shape.length * normal.dot(&dir_i).abs()
                    + 0.5 * nb.shape.length * normal.dot(&dir_j).abs();
                Constraint { normal, margin }
            })
            .collect();
        let idx = h * sd;
        let at = |v: &[f64]| Vec2::new(v[idx], v[idx + 1]);
        let mut points: Vec<Vec2> = std::iter::once(at(&z_self)).chain(z_neighbors.iter().map(|z| at(z))).collect();
        let satisfied = cons
            .iter()
            .enumerate()
            .all(|(j, c)| c.normal.dot(&(points[0] - points[j + 1])) >= c.margin);
        if satisfied {
            continue;
        }
        active_steps += 1;
        let weights: Vec<Vec2> = std::iter::once(own)
            .chain(neighbors)
            .map(|t| Vec2::new(t.rho[idx], t.rho[idx + 1]))
            .collect();
        let start = points.clone();
        if !hildreth(&mut points, &weights, &cons, f64::INFINITY) {
            points = start;
            hildreth(&mut points, &weights, &cons, slack_bound);
            relaxed = true;
        }
        z_self[idx] = points[0].x;
        z_self[idx + 1] = points[0].y;
        for (z, p) in z_neighbors.iter_mut().zip(&points[1..]) {
            z[idx] = p.x;
            z[idx + 1] = p.y;
        }
    }
    Ok(ZUpdateOutcome { z_self, z_neighbors, active_steps, relaxed })
}
