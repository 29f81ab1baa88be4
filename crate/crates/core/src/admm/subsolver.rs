use nalgebra::{DMatrix, DVector};

use super::problem::{Objective, PenaltyVector};
use crate::optim::{minimize_box, BoxMinimizerOptions};

/// One of the two block minimizations:
/// `argmin_y h(y) + λᵀ(My + v) + ½‖R(My + v)‖²`.
///
/// For the x-update `h = f`, `M = A`, `v = Bz − c`; for the z-update
/// `h = g`, `M = B`, `v = Ax − c`.
pub struct Subproblem<'a> {
    pub objective: &'a dyn Objective,
    pub coupling: &'a DMatrix<f64>,
    pub offset: &'a DVector<f64>,
    pub lambda: &'a DVector<f64>,
    pub rho: &'a PenaltyVector,
    pub warm_start: &'a DVector<f64>,
}

impl Subproblem<'_> {
    pub fn value(&self, y: &DVector<f64>) -> f64 {
        let w = self.coupling * y + self.offset;
        self.objective.value(y) + self.lambda.dot(&w) + 0.5 * self.rho.weighted_norm_sq(&w)
    }

    pub fn gradient(&self, y: &DVector<f64>) -> DVector<f64> {
        let w = self.coupling * y + self.offset;
        self.objective.gradient(y) + self.coupling.tr_mul(&(self.lambda + self.rho.scale(&w)))
    }
}

pub trait Subsolver {
    fn solve(&mut self, sub: &Subproblem<'_>) -> Result<DVector<f64>, String>;

    /// Declared accuracy of the returned minimizer.
    fn tolerance(&self) -> f64;
}

/// Exact minimizer for quadratic objectives via the normal equations
/// `(P + MᵀDiag(ρ)M) y = −q − Mᵀ(λ + ρ∘v)`.
#[derive(Debug, Clone, Default)]
pub struct QuadraticSubsolver;

impl Subsolver for QuadraticSubsolver {
    fn solve(&mut self, sub: &Subproblem<'_>) -> Result<DVector<f64>, String> {
        let quad = sub
            .objective
            .as_quadratic()
            .ok_or_else(|| "exact subsolver needs a quadratic objective".to_string())?;
        let weighted = DMatrix::from_diagonal(sub.rho.values()) * sub.coupling;
        let hessian = &quad.p + sub.coupling.tr_mul(&weighted);
        let rhs = -(&quad.q + sub.coupling.tr_mul(&(sub.lambda + sub.rho.scale(sub.offset))));
        if let Some(chol) = hessian.clone().cholesky() {
            return Ok(chol.solve(&rhs));
        }
        hessian
            .lu()
            .solve(&rhs)
            .ok_or_else(|| "subproblem Hessian is singular".to_string())
    }

    fn tolerance(&self) -> f64 {
        1e-12
    }
}

/// Projected gradient for box-constrained subproblems. Works with any
/// smooth objective; the box defaults to the whole space.
#[derive(Debug, Clone)]
pub struct ProjectedGradientSubsolver {
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
    pub options: BoxMinimizerOptions,
}

impl ProjectedGradientSubsolver {
    pub fn new(lower: DVector<f64>, upper: DVector<f64>, tolerance: f64) -> Self {
        Self {
            lower,
            upper,
            options: BoxMinimizerOptions { max_iterations: 100_000, tolerance, ..Default::default() },
        }
    }

    pub fn unbounded(n: usize, tolerance: f64) -> Self {
        Self::new(
            DVector::from_element(n, f64::NEG_INFINITY),
            DVector::from_element(n, f64::INFINITY),
            tolerance,
        )
    }
}

impl Subsolver for ProjectedGradientSubsolver {
    fn solve(&mut self, sub: &Subproblem<'_>) -> Result<DVector<f64>, String> {
        let n = sub.warm_start.len();
        if self.lower.len() != n || self.upper.len() != n {
            return Err(format!("box has {} entries, subproblem {}", self.lower.len(), n));
        }
        let eval = |y: &[f64], g: &mut [f64]| {
            let y = DVector::from_column_slice(y);
            g.copy_from_slice(sub.gradient(&y).as_slice());
            sub.value(&y)
        };
        let res = minimize_box(
            eval,
            sub.warm_start.as_slice(),
            self.lower.as_slice(),
            self.upper.as_slice(),
            &self.options,
        );
        if res.converged {
            Ok(DVector::from_vec(res.x))
        } else {
            Err(format!(
                "projected gradient stalled after {} iterations (residual {:e})",
                res.iterations, res.projected_gradient_norm
            ))
        }
    }

    fn tolerance(&self) -> f64 {
        self.options.tolerance
    }
}
