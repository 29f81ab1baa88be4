//! Random instances and independent reference computations used by the
//! unit tests, the integration tests and the acceptance suite.
//!
//! Nothing here is on a solver path. The references are deliberately naive
//! (dense KKT solves, brute-force sampling, textbook ADMM) so that they do
//! not share code with what they check.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::admm::{ConsensusProblem, IterateState, PenaltyVector, QuadraticObjective, SaddlePoint};
use crate::agent::{BicycleParams, ConsensusPenalty, Dynamics, HolonomicParams, LocalProblem, State, TrackingCost};
use crate::geometry::{Capsule, CapsuleShape, Vec2};
use crate::path::{PathSegment, ReferencePath};

/// Strongly convex QP `½xᵀPx + qᵀx + ½zᵀQz + rᵀz` with `Ax + Bz = c`.
#[derive(Clone)]
pub struct RandomQp {
    pub problem: ConsensusProblem,
    pub f: QuadraticObjective,
    pub g: QuadraticObjective,
    pub rho: PenaltyVector,
}

fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let m = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    m.transpose() * m / n as f64 + DMatrix::identity(n, n) * 0.5
}

/// `n, m` drawn from `2..=max_dim`, `p` from `1..=min(n, m)`, penalties
/// from `[0.5, 2]`.
pub fn random_qp(seed: u64, max_dim: usize) -> RandomQp {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..=max_dim.max(2));
    let m = rng.random_range(2..=max_dim.max(2));
    let p = rng.random_range(1..=n.min(m));
    let f = QuadraticObjective::new(random_spd(&mut rng, n), DVector::from_fn(n, |_, _| rng.random_range(-2.0..2.0)))
        .expect("spd");
    let g = QuadraticObjective::new(random_spd(&mut rng, m), DVector::from_fn(m, |_, _| rng.random_range(-2.0..2.0)))
        .expect("spd");
    let a = DMatrix::from_fn(p, n, |_, _| rng.random_range(-1.0..1.0));
    let b = DMatrix::from_fn(p, m, |_, _| rng.random_range(-1.0..1.0));
    let c = DVector::from_fn(p, |_, _| rng.random_range(-1.0..1.0));
    let rho = PenaltyVector::new(DVector::from_fn(p, |_, _| rng.random_range(0.5..2.0))).expect("positive");
    let problem = ConsensusProblem::new(Arc::new(f.clone()), Arc::new(g.clone()), a, b, c).expect("dimensions");
    RandomQp { problem, f, g, rho }
}

/// Saddle point from one dense solve of the KKT system.
pub fn kkt_saddle(qp: &RandomQp) -> SaddlePoint {
    let prob = &qp.problem;
    let (n, m, p) = (prob.n(), prob.m(), prob.p());
    let dim = n + m + p;
    let mut k = DMatrix::zeros(dim, dim);
    k.view_mut((0, 0), (n, n)).copy_from(&qp.f.p);
    k.view_mut((n, n), (m, m)).copy_from(&qp.g.p);
    k.view_mut((0, n + m), (n, p)).copy_from(&prob.a.transpose());
    k.view_mut((n, n + m), (m, p)).copy_from(&prob.b.transpose());
    k.view_mut((n + m, 0), (p, n)).copy_from(&prob.a);
    k.view_mut((n + m, n), (p, m)).copy_from(&prob.b);
    let mut rhs = DVector::zeros(dim);
    rhs.rows_mut(0, n).copy_from(&(-&qp.f.q));
    rhs.rows_mut(n, m).copy_from(&(-&qp.g.q));
    rhs.rows_mut(n + m, p).copy_from(&prob.c);
    let sol = k.lu().solve(&rhs).expect("KKT matrix is nonsingular for full-row-rank [A B]");
    let x_star = sol.rows(0, n).into_owned();
    let z_star = sol.rows(n, m).into_owned();
    let lambda_star = sol.rows(n + m, p).into_owned();
    let p_star = prob.objective(&x_star, &z_star);
    SaddlePoint { x_star, z_star, lambda_star, p_star }
}

/// Start with `λ = 0` and `z` minimizing `g`, so that `∇g(z) + Bᵀλ = 0`
/// holds before the first iteration as well as after every later one.
pub fn dual_feasible_start(qp: &RandomQp, rho: PenaltyVector) -> IterateState {
    let mut s = IterateState::zeros(&qp.problem, rho).expect("dimensions");
    s.z = qp.g.p.clone().cholesky().expect("spd").solve(&(-&qp.g.q));
    s
}

/// Textbook scalar-penalty ADMM on a [`RandomQp`], solving both updates
/// from their normal equations.
pub struct ScalarAdmm {
    pub x: DVector<f64>,
    pub z: DVector<f64>,
    pub lambda: DVector<f64>,
    pub rho: f64,
}

impl ScalarAdmm {
    pub fn new(x: DVector<f64>, z: DVector<f64>, lambda: DVector<f64>, rho: f64) -> Self {
        Self { x, z, lambda, rho }
    }

    pub fn step(&mut self, qp: &RandomQp) {
        let (a, b, c) = (&qp.problem.a, &qp.problem.b, &qp.problem.c);
        let rho = self.rho;
        let lhs = &qp.f.p + a.transpose() * a * rho;
        let rhs = -&qp.f.q - a.transpose() * &self.lambda - a.transpose() * (b * &self.z - c) * rho;
        self.x = lhs.lu().solve(&rhs).expect("x system");
        let lhs = &qp.g.p + b.transpose() * b * rho;
        let rhs = -&qp.g.q - b.transpose() * &self.lambda - b.transpose() * (a * &self.x - c) * rho;
        self.z = lhs.lu().solve(&rhs).expect("z system");
        self.lambda += (a * &self.x + b * &self.z - c) * rho;
    }
}

/// Clearance by walking `samples + 1` points along each axis and measuring
/// the exact distance to the other axis. Overestimates by at most half the
/// sample spacing.
pub fn sampled_clearance(a: &Capsule, b: &Capsule, samples: usize) -> f64 {
    fn point_segment(p: Vec2, s0: Vec2, s1: Vec2) -> f64 {
        let d = s1 - s0;
        let len2 = d.norm_squared();
        let t = if len2 == 0.0 { 0.0 } else { ((p - s0).dot(&d) / len2).clamp(0.0, 1.0) };
        (p - (s0 + d * t)).norm()
    }
    let mut best = f64::INFINITY;
    for i in 0..=samples {
        let t = i as f64 / samples as f64;
        best = best.min(point_segment(a.p0 + (a.p1 - a.p0) * t, b.p0, b.p1));
        best = best.min(point_segment(b.p0 + (b.p1 - b.p0) * t, a.p0, a.p1));
    }
    best - a.radius - b.radius
}

/// Axis length in `[0, 3)`, radius in `[0.1, 1)`, centre in a 6 m square.
pub fn random_capsule(rng: &mut impl Rng) -> Capsule {
    let c = Vec2::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
    let h = rng.random_range(-PI..PI);
    let shape = CapsuleShape { length: rng.random_range(0.0..3.0), radius: rng.random_range(0.1..1.0) };
    shape.posed(c, h)
}

/// Central differences of `f` at `x` with step `h`.
pub fn central_difference(mut f: impl FnMut(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|e| {
            probe[e] = x[e] + h;
            let up = f(&probe);
            probe[e] = x[e] - h;
            let dn = f(&probe);
            probe[e] = x[e];
            (up - dn) / (2.0 * h)
        })
        .collect()
}

/// Largest `|a − b| / max(|a|, 1)` over the entries.
pub fn max_relative_error(analytic: &[f64], reference: &[f64]) -> f64 {
    analytic.iter().zip(reference).map(|(a, r)| (a - r).abs() / a.abs().max(1.0)).fold(0.0, f64::max)
}

/// A bicycle MPC problem on a straight-then-turn path.
pub fn bicycle_problem(horizon: usize) -> LocalProblem {
    LocalProblem {
        dynamics: Dynamics::Bicycle(BicycleParams::default()),
        cost: TrackingCost::default(),
        path: Arc::new(ReferencePath::new(vec![
            PathSegment::Line { start: Vec2::new(0.0, -20.0), end: Vec2::new(0.0, 0.0) },
            PathSegment::Arc { center: Vec2::new(-8.0, 0.0), radius: 8.0, start_angle: 0.0, sweep: PI / 2.0 },
            PathSegment::Line { start: Vec2::new(-8.0, 8.0), end: Vec2::new(-30.0, 8.0) },
        ])),
        v_ref: 4.0,
        horizon,
        dt: 0.05,
    }
}

/// A holonomic MPC problem along the x axis.
pub fn holonomic_problem(horizon: usize) -> LocalProblem {
    LocalProblem {
        dynamics: Dynamics::Holonomic(HolonomicParams::default()),
        cost: TrackingCost::default(),
        path: Arc::new(ReferencePath::line(Vec2::new(-50.0, 0.0), Vec2::new(50.0, 0.0))),
        v_ref: 1.0,
        horizon,
        dt: 0.05,
    }
}

/// Uniform draw inside the input box.
pub fn random_inputs(rng: &mut impl Rng, p: &LocalProblem) -> Vec<f64> {
    let (lo, hi) = p.input_bounds();
    lo.iter().zip(&hi).map(|(l, h)| rng.random_range(*l..*h)).collect()
}

/// Initial state near the start of the problem's path.
pub fn random_state(rng: &mut impl Rng, p: &LocalProblem) -> State {
    match p.dynamics {
        Dynamics::Bicycle(_) => {
            [rng.random_range(-2.0..2.0), rng.random_range(-15.0..5.0), rng.random_range(0.5..2.5), rng.random_range(1.0..5.0)]
        }
        Dynamics::Holonomic(_) => {
            [rng.random_range(-5.0..5.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]
        }
    }
}

/// `terms` consensus terms whose copies scatter around a random rollout.
pub fn random_penalty(rng: &mut impl Rng, p: &LocalProblem, s0: &State, terms: usize) -> ConsensusPenalty {
    let len = p.plan_len();
    let base = p.dynamics.rollout(s0, &random_inputs(rng, p), p.dt).expect("rollout").into_vec();
    let mut pen = ConsensusPenalty::new(len);
    for _ in 0..terms {
        let z: Vec<f64> = base.iter().map(|v| v + rng.random_range(-1.0..1.0)).collect();
        let l: Vec<f64> = (0..len).map(|_| rng.random_range(-2.0..2.0)).collect();
        let r: Vec<f64> = (0..len).map(|_| rng.random_range(0.1..5.0)).collect();
        pen.add_term(&z, &l, &r).expect("lengths");
    }
    pen
}
