//! Adaptation (`φ`) and similarity (`μ`) functions.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::plan::TrajectoryPlan;
use crate::admm::{IterateState, Mu, Similarity};
use crate::error::{Error, Result};
use crate::geometry::{capsule_clearance, CapsuleShape};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhiConfig {
    /// Distance scale (m) at which `(D/d)^a` reaches one.
    pub d: f64,
    /// Importance weight `w_i`.
    pub w: f64,
    pub a: f64,
    pub phi_min: f64,
    pub phi_max: f64,
    /// Apply the exponent a second time when averaging into `φ_ii`.
    #[serde(default = "default_true")]
    pub second_exponent: bool,
}

fn default_true() -> bool {
    true
}

impl Default for PhiConfig {
    fn default() -> Self {
        Self { d: 2.0, w: 1.0, a: 2.0, phi_min: 0.1, phi_max: 10.0, second_exponent: true }
    }
}

impl PhiConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.phi_min > 0.0
            && self.phi_min < self.phi_max
            && self.phi_max.is_finite()
            && self.w > 0.0
            && self.w.is_finite()
            && self.a > 0.0
            && self.d >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("invalid adaptation parameters {self:?}")))
        }
    }

    pub fn lower(&self) -> f64 {
        self.w * self.phi_min
    }

    pub fn upper(&self) -> f64 {
        self.w * self.phi_max
    }
}

/// `w · clamp((D/d)^a, φmin, φmax)`; non-positive clearance maps to `w·φmax`.
pub fn phi_value(clearance: f64, cfg: &PhiConfig) -> f64 {
    if clearance <= 0.0 || clearance.is_nan() {
        return cfg.upper();
    }
    let raw = (cfg.d / clearance).powf(cfg.a);
    cfg.w * raw.clamp(cfg.phi_min, cfg.phi_max)
}

/// Per-horizon-step `φ_ij` from the capsule clearance of the two plans.
pub fn phi_ij(
    plan_i: &TrajectoryPlan,
    plan_j: &TrajectoryPlan,
    shape_i: &CapsuleShape,
    shape_j: &CapsuleShape,
    cfg: &PhiConfig,
) -> Result<Vec<f64>> {
    if plan_i.horizon() != plan_j.horizon() {
        return Err(Error::Dimension(format!("horizons {} and {}", plan_i.horizon(), plan_j.horizon())));
    }
    Ok((0..plan_i.horizon())
        .map(|k| {
            let (pi, hi) = plan_i.pose(k);
            let (pj, hj) = plan_j.pose(k);
            phi_value(capsule_clearance(&shape_i.posed(pi, hi), &shape_j.posed(pj, hj)), cfg)
        })
        .collect())
}

/// `φ_ii = w · mean_j(φ_ij^a)`, clamped to `[w·φmin, w·φmax]`. With no
/// neighbours every element is `w·φmin`.
pub fn phi_ii(rho_links: &[&[f64]], len: usize, cfg: &PhiConfig) -> Vec<f64> {
    if rho_links.is_empty() {
        return vec![cfg.lower(); len];
    }
    let exp = if cfg.second_exponent { cfg.a } else { 1.0 };
    let n = rho_links.len() as f64;
    (0..len)
        .map(|e| {
            let mean = rho_links.iter().map(|r| r[e].powf(exp)).sum::<f64>() / n;
            (cfg.w * mean).clamp(cfg.lower(), cfg.upper())
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityWeights {
    pub x: f64,
    pub z: f64,
    pub lambda: f64,
    pub rho: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MuConfig {
    pub eta: f64,
    #[serde(default)]
    pub weights: Option<SimilarityWeights>,
}

impl Default for MuConfig {
    fn default() -> Self {
        Self { eta: 0.5, weights: None }
    }
}

impl MuConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(Error::InvalidInput(format!("eta {} outside [0, 1]", self.eta)));
        }
        if let Some(w) = self.weights {
            let all = [w.x, w.z, w.lambda, w.rho];
            if all.iter().any(|v| *v < 0.0) || (all.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidInput(format!("similarity weights {w:?} must be nonnegative and sum to 1")));
            }
        }
        Ok(())
    }
}

/// `μ = η μ_prev + (1−η) min(ρ/w, 1)`, elementwise.
pub fn mu_filtered(prev_mu: &[f64], rho: &[f64], weight: f64, cfg: &MuConfig) -> Vec<f64> {
    prev_mu
        .iter()
        .zip(rho)
        .map(|(m, r)| cfg.eta * m + (1.0 - cfg.eta) * (r / weight).min(1.0))
        .collect()
}

/// Variables of one converged control step, compared by the similarity
/// estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct StepSnapshot {
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    pub lambda: Vec<f64>,
    pub rho: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimilarityEstimate {
    pub value: f64,
    /// A weighted reference vector had zero norm.
    pub degenerate: bool,
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn diff_l2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Weighted similarity of two consecutive converged steps, clamped to
/// `[0, 1]`. Requires `cfg.weights`.
pub fn mu_similarity_estimate(prev: &StepSnapshot, next: &StepSnapshot, cfg: &MuConfig) -> Result<SimilarityEstimate> {
    let w = cfg
        .weights
        .ok_or_else(|| Error::InvalidInput("similarity estimate needs weights".into()))?;
    let parts = [(w.x, &prev.x, &next.x), (w.z, &prev.z, &next.z), (w.lambda, &prev.lambda, &next.lambda), (w.rho, &prev.rho, &next.rho)];
    let mut value = 0.0;
    for (weight, a, b) in parts {
        if weight == 0.0 {
            continue;
        }
        if a.len() != b.len() {
            return Err(Error::Dimension(format!("snapshot lengths {} and {}", a.len(), b.len())));
        }
        let norm = l2(a);
        if norm == 0.0 {
            return Ok(SimilarityEstimate { value: 0.0, degenerate: true });
        }
        value += weight * (1.0 - diff_l2(b, a) / norm);
    }
    Ok(SimilarityEstimate { value: value.clamp(0.0, 1.0), degenerate: false })
}

/// [`mu_filtered`] as a similarity function for the generic solver; the
/// filter state starts at one.
#[derive(Debug, Clone)]
pub struct FilteredSimilarity {
    pub cfg: MuConfig,
    pub weight: f64,
    prev: Option<Vec<f64>>,
}

impl FilteredSimilarity {
    pub fn new(cfg: MuConfig, weight: f64) -> Self {
        Self { cfg, weight, prev: None }
    }
}

impl Similarity for FilteredSimilarity {
    fn similarity(&mut self, state: &IterateState) -> Mu {
        let rho = state.rho.values().as_slice();
        let prev = self.prev.take().unwrap_or_else(|| vec![1.0; rho.len()]);
        let mu = mu_filtered(&prev, rho, self.weight, &self.cfg);
        self.prev = Some(mu.clone());
        Mu::Vector(DVector::from_vec(mu))
    }
}
