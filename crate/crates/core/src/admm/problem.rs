use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{dim_check, Error, Result};

/// A convex function with an analytic gradient.
pub trait Objective: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, v: &DVector<f64>) -> f64;
    fn gradient(&self, v: &DVector<f64>) -> DVector<f64>;

    /// Exposes the quadratic form when the objective is one, so exact
    /// linear-solve subsolvers can be used.
    fn as_quadratic(&self) -> Option<&QuadraticObjective> {
        None
    }
}

/// `½ vᵀPv + qᵀv + constant` with `P` symmetric positive semidefinite.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticObjective {
    pub p: DMatrix<f64>,
    pub q: DVector<f64>,
    pub constant: f64,
}

impl QuadraticObjective {
    pub fn new(p: DMatrix<f64>, q: DVector<f64>) -> Result<Self> {
        dim_check(p.is_square() && p.nrows() == q.len(), || {
            format!("quadratic term {}x{} vs linear term {}", p.nrows(), p.ncols(), q.len())
        })?;
        let asym = (&p - p.transpose()).amax();
        if asym > 1e-9 * (1.0 + p.amax()) {
            return Err(Error::InvalidInput(format!("quadratic term not symmetric (max asymmetry {asym:e})")));
        }
        Ok(Self { p, q, constant: 0.0 })
    }

    pub fn zero(n: usize) -> Self {
        Self { p: DMatrix::zeros(n, n), q: DVector::zeros(n), constant: 0.0 }
    }

    /// `Σ weight·(v − target)²`, expanded into quadratic form.
    pub fn diagonal_tracking(weights: &DVector<f64>, target: &DVector<f64>) -> Self {
        let p = DMatrix::from_diagonal(&(weights * 2.0));
        let q = -2.0 * weights.component_mul(target);
        let constant = weights.component_mul(&target.component_mul(target)).sum();
        Self { p, q, constant }
    }
}

impl Objective for QuadraticObjective {
    fn dim(&self) -> usize {
        self.q.len()
    }

    fn value(&self, v: &DVector<f64>) -> f64 {
        0.5 * v.dot(&(&self.p * v)) + self.q.dot(v) + self.constant
    }

    fn gradient(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.p * v + &self.q
    }

    fn as_quadratic(&self) -> Option<&QuadraticObjective> {
        Some(self)
    }
}

/// `min f(x) + g(z)  s.t.  Ax + Bz = c`.
#[derive(Clone)]
pub struct ConsensusProblem {
    pub f: Arc<dyn Objective>,
    pub g: Arc<dyn Objective>,
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DVector<f64>,
}

impl fmt::Debug for ConsensusProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ConsensusProblem")
            .field("n", &self.n())
            .field("m", &self.m())
            .field("p", &self.p())
            .finish()
    }
}

impl ConsensusProblem {
    pub fn new(
        f: Arc<dyn Objective>,
        g: Arc<dyn Objective>,
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        c: DVector<f64>,
    ) -> Result<Self> {
        dim_check(a.nrows() == c.len() && b.nrows() == c.len(), || {
            format!("A has {} rows, B has {} rows, c has {} entries", a.nrows(), b.nrows(), c.len())
        })?;
        dim_check(f.dim() == a.ncols(), || format!("f takes {} entries but A has {} columns", f.dim(), a.ncols()))?;
        dim_check(g.dim() == b.ncols(), || format!("g takes {} entries but B has {} columns", g.dim(), b.ncols()))?;
        Ok(Self { f, g, a, b, c })
    }

    pub fn n(&self) -> usize {
        self.a.ncols()
    }

    pub fn m(&self) -> usize {
        self.b.ncols()
    }

    pub fn p(&self) -> usize {
        self.c.len()
    }

    pub fn objective(&self, x: &DVector<f64>, z: &DVector<f64>) -> f64 {
        self.f.value(x) + self.g.value(z)
    }

    /// `Ax + Bz − c`.
    pub fn residual(&self, x: &DVector<f64>, z: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_xz(x, z)?;
        Ok(&self.a * x + &self.b * z - &self.c)
    }

    pub(crate) fn check_xz(&self, x: &DVector<f64>, z: &DVector<f64>) -> Result<()> {
        dim_check(x.len() == self.n(), || format!("x has {} entries, expected {}", x.len(), self.n()))?;
        dim_check(z.len() == self.m(), || format!("z has {} entries, expected {}", z.len(), self.m()))
    }

    pub(crate) fn check_p(&self, name: &str, v: &DVector<f64>) -> Result<()> {
        dim_check(v.len() == self.p(), || format!("{name} has {} entries, expected {}", v.len(), self.p()))
    }
}

/// Elementwise penalty `ρ`, every entry strictly positive.
#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyVector(DVector<f64>);

impl PenaltyVector {
    pub fn new(rho: DVector<f64>) -> Result<Self> {
        if let Some((i, v)) = rho.iter().enumerate().find(|(_, v)| !(**v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidInput(format!("penalty entry {i} is {v}, must be finite and > 0")));
        }
        Ok(Self(rho))
    }

    pub fn uniform(p: usize, value: f64) -> Result<Self> {
        Self::new(DVector::from_element(p, value))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.0
    }

    /// `diag(R) = ρ^∘½`.
    pub fn sqrt_diag(&self) -> DVector<f64> {
        self.0.map(f64::sqrt)
    }

    /// `R²v`, i.e. `ρ ∘ v`.
    pub fn scale(&self, v: &DVector<f64>) -> DVector<f64> {
        self.0.component_mul(v)
    }

    /// `‖R v‖₂²`.
    pub fn weighted_norm_sq(&self, v: &DVector<f64>) -> f64 {
        self.0.iter().zip(v.iter()).map(|(r, x)| r * x * x).sum()
    }

    /// `‖R⁻¹ v‖₂²`.
    pub fn inverse_weighted_norm_sq(&self, v: &DVector<f64>) -> f64 {
        self.0.iter().zip(v.iter()).map(|(r, x)| x * x / r).sum()
    }

    pub fn min(&self) -> f64 {
        self.0.min()
    }

    pub fn max(&self) -> f64 {
        self.0.max()
    }
}

/// One OA-ADMM iterate. `k` counts iterations inside time step `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct IterateState {
    pub x: DVector<f64>,
    pub z: DVector<f64>,
    pub lambda: DVector<f64>,
    pub rho: PenaltyVector,
    pub k: usize,
    pub t: usize,
}

impl IterateState {
    pub fn zeros(problem: &ConsensusProblem, rho: PenaltyVector) -> Result<Self> {
        problem.check_p("rho", rho.values())?;
        Ok(Self {
            x: DVector::zeros(problem.n()),
            z: DVector::zeros(problem.m()),
            lambda: DVector::zeros(problem.p()),
            rho,
            k: 0,
            t: 0,
        })
    }

    pub(crate) fn check(&self, problem: &ConsensusProblem) -> Result<()> {
        problem.check_xz(&self.x, &self.z)?;
        problem.check_p("lambda", &self.lambda)?;
        problem.check_p("rho", self.rho.values())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualPair {
    /// Primal residual `Ax + Bz − c`.
    pub r: DVector<f64>,
    /// Dual residual `Aᵀ(ρ ∘ B(z⁺ − z))`.
    pub s: DVector<f64>,
}

impl ResidualPair {
    pub fn primal_inf(&self) -> f64 {
        self.r.amax()
    }

    pub fn dual_inf(&self) -> f64 {
        self.s.amax()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SaddlePoint {
    pub x_star: DVector<f64>,
    pub z_star: DVector<f64>,
    pub lambda_star: DVector<f64>,
    pub p_star: f64,
}

/// Forgetting factor applied to the carried-over multipliers.
#[derive(Debug, Clone, PartialEq)]
pub enum Mu {
    Scalar(f64),
    Vector(DVector<f64>),
}

impl Mu {
    pub fn one() -> Self {
        Mu::Scalar(1.0)
    }
}

/// `f(x) + g(z) + λᵀ(Ax+Bz−c) + ½‖R(Ax+Bz−c)‖²`.
pub fn augmented_lagrangian(problem: &ConsensusProblem, state: &IterateState) -> Result<f64> {
    state.check(problem)?;
    let r = &problem.a * &state.x + &problem.b * &state.z - &problem.c;
    Ok(problem.objective(&state.x, &state.z)
        + state.lambda.dot(&r)
        + 0.5 * state.rho.weighted_norm_sq(&r))
}

/// Gradient of the augmented Lagrangian in `x`.
pub fn augmented_lagrangian_grad_x(problem: &ConsensusProblem, state: &IterateState) -> Result<DVector<f64>> {
    state.check(problem)?;
    let r = &problem.a * &state.x + &problem.b * &state.z - &problem.c;
    Ok(problem.f.gradient(&state.x) + problem.a.tr_mul(&(&state.lambda + state.rho.scale(&r))))
}

/// Gradient of the augmented Lagrangian in `z`.
pub fn augmented_lagrangian_grad_z(problem: &ConsensusProblem, state: &IterateState) -> Result<DVector<f64>> {
    state.check(problem)?;
    let r = &problem.a * &state.x + &problem.b * &state.z - &problem.c;
    Ok(problem.g.gradient(&state.z) + problem.b.tr_mul(&(&state.lambda + state.rho.scale(&r))))
}

/// Primal and dual residuals between two consecutive iterates. The dual
/// residual uses the penalty of `prev`.
pub fn compute_residuals(problem: &ConsensusProblem, prev: &IterateState, next: &IterateState) -> Result<ResidualPair> {
    prev.check(problem)?;
    next.check(problem)?;
    if prev.k + 1 != next.k {
        return Err(Error::InvalidInput(format!(
            "residuals need consecutive iterates, got k={} and k={}",
            prev.k, next.k
        )));
    }
    Ok(residuals_unchecked(problem, &prev.z, &prev.rho, &next.x, &next.z))
}

pub(crate) fn residuals_unchecked(
    problem: &ConsensusProblem,
    z_prev: &DVector<f64>,
    rho_prev: &PenaltyVector,
    x_next: &DVector<f64>,
    z_next: &DVector<f64>,
) -> ResidualPair {
    let r = &problem.a * x_next + &problem.b * z_next - &problem.c;
    let s = problem.a.tr_mul(&rho_prev.scale(&(&problem.b * (z_next - z_prev))));
    ResidualPair { r, s }
}

/// `μ ∘ λ + ρ ∘ r`.
pub fn lambda_step(lambda: &DVector<f64>, rho: &PenaltyVector, r: &DVector<f64>, mu: &Mu) -> Result<DVector<f64>> {
    dim_check(lambda.len() == rho.len() && r.len() == rho.len(), || {
        format!("lambda {}, rho {}, r {}", lambda.len(), rho.len(), r.len())
    })?;
    let in_unit = |v: f64| (0.0..=1.0).contains(&v);
    let forgotten = match mu {
        Mu::Scalar(m) => {
            if !in_unit(*m) {
                return Err(Error::InvalidInput(format!("mu = {m} outside [0, 1]")));
            }
            lambda * *m
        }
        Mu::Vector(m) => {
            dim_check(m.len() == lambda.len(), || format!("mu has {} entries, lambda {}", m.len(), lambda.len()))?;
            if let Some(bad) = m.iter().find(|v| !in_unit(**v)) {
                return Err(Error::InvalidInput(format!("mu entry {bad} outside [0, 1]")));
            }
            lambda.component_mul(m)
        }
    };
    Ok(forgotten + rho.scale(r))
}
