use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::testkit::{self, kkt_saddle, RandomQp};

fn random_qp(seed: u64) -> RandomQp {
    testkit::random_qp(seed, 5)
}

fn dual_feasible_start(qp: &RandomQp) -> IterateState {
    testkit::dual_feasible_start(qp, qp.rho.clone())
}

fn one_dim_problem() -> (ConsensusProblem, QuadraticObjective, QuadraticObjective) {
    // (x−1)² + (z+1)²  s.t.  x − z = 0
    let fq = QuadraticObjective::diagonal_tracking(&DVector::from_element(1, 1.0), &DVector::from_element(1, 1.0));
    let gq = QuadraticObjective::diagonal_tracking(&DVector::from_element(1, 1.0), &DVector::from_element(1, -1.0));
    let prob = ConsensusProblem::new(
        Arc::new(fq.clone()),
        Arc::new(gq.clone()),
        DMatrix::identity(1, 1),
        -DMatrix::identity(1, 1),
        DVector::zeros(1),
    )
    .unwrap();
    (prob, fq, gq)
}

#[test]
fn one_dimensional_consensus_converges_to_kkt_point() {
    let (prob, _, _) = one_dim_problem();
    let init = IterateState::zeros(&prob, PenaltyVector::uniform(1, 1.0).unwrap()).unwrap();
    let mut cfg = SolverConfig::new(500, 1e-10, 1e-10).unwrap();
    let trace = solve_static(&prob, init, &mut QuadraticSubsolver, &mut QuadraticSubsolver, &mut cfg).unwrap();
    assert!(trace.converged);
    let last = trace.last_state();
    assert!(last.x[0].abs() < 1e-9);
    assert!(last.z[0].abs() < 1e-9);
    assert!((last.lambda[0] - 2.0).abs() < 1e-9);
}

#[test]
fn saddle_point_is_a_fixed_point() {
    let (prob, fq, gq) = one_dim_problem();
    let saddle = kkt_saddle(&RandomQp { problem: prob.clone(), f: fq, g: gq, rho: PenaltyVector::uniform(prob.p(), 1.0).unwrap() });
    let init = IterateState {
        x: saddle.x_star.clone(),
        z: saddle.z_star.clone(),
        lambda: saddle.lambda_star.clone(),
        rho: PenaltyVector::uniform(1, 1.0).unwrap(),
        k: 0,
        t: 0,
    };
    let mut cfg = SolverConfig::new(10, 1e-12, 1e-12).unwrap();
    let trace = solve_static(&prob, init.clone(), &mut QuadraticSubsolver, &mut QuadraticSubsolver, &mut cfg).unwrap();
    assert!(trace.converged);
    assert_eq!(trace.records.len(), 1);
    let rec = &trace.records[0];
    assert_eq!(rec.residuals.primal_inf(), 0.0);
    assert_eq!(rec.residuals.dual_inf(), 0.0);
    assert_eq!(rec.state.x, init.x);
    assert_eq!(rec.state.z, init.z);
    assert_eq!(rec.state.lambda, init.lambda);
}

#[test]
fn separable_qp_matches_kkt_reference() {
    // 5-dim separable objective with identity consensus x = z.
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = 5;
    let fq = QuadraticObjective::diagonal_tracking(
        &DVector::from_fn(n, |_, _| rng.random_range(0.5..3.0)),
        &DVector::from_fn(n, |_, _| rng.random_range(-2.0..2.0)),
    );
    let gq = QuadraticObjective::diagonal_tracking(
        &DVector::from_fn(n, |_, _| rng.random_range(0.5..3.0)),
        &DVector::from_fn(n, |_, _| rng.random_range(-2.0..2.0)),
    );
    let prob = ConsensusProblem::new(
        Arc::new(fq.clone()),
        Arc::new(gq.clone()),
        DMatrix::identity(n, n),
        -DMatrix::identity(n, n),
        DVector::zeros(n),
    )
    .unwrap();
    let saddle = kkt_saddle(&RandomQp { problem: prob.clone(), f: fq, g: gq, rho: PenaltyVector::uniform(prob.p(), 1.0).unwrap() });
    let init = IterateState::zeros(&prob, PenaltyVector::uniform(n, 1.5).unwrap()).unwrap();
    let mut cfg = SolverConfig::new(2000, 1e-9, 1e-9).unwrap();
    let trace = solve_static(&prob, init, &mut QuadraticSubsolver, &mut QuadraticSubsolver, &mut cfg).unwrap();
    assert!(trace.converged);
    assert!((&trace.last_state().x - &saddle.x_star).amax() < 1e-6);
}

#[test]
fn projected_gradient_subsolvers_solve_box_constrained_consensus() {
    // Same 1-D problem, z restricted to [0.25, 1]: optimum x = z = 0.25.
    let (prob, _, _) = one_dim_problem();
    let init = IterateState::zeros(&prob, PenaltyVector::uniform(1, 1.0).unwrap()).unwrap();
    let mut cfg = SolverConfig::new(2000, 1e-8, 1e-8).unwrap();
    let mut x_sub = ProjectedGradientSubsolver::unbounded(1, 1e-12);
    let mut z_sub = ProjectedGradientSubsolver::new(DVector::from_element(1, 0.25), DVector::from_element(1, 1.0), 1e-12);
    let trace = solve_static(&prob, init, &mut x_sub, &mut z_sub, &mut cfg).unwrap();
    assert!(trace.converged);
    assert!((trace.last_state().x[0] - 0.25).abs() < 1e-6);
}

#[test]
fn lyapunov_examples() {
    let saddle = SaddlePoint {
        x_star: DVector::zeros(1),
        z_star: DVector::zeros(1),
        lambda_star: DVector::from_element(1, 2.0),
        p_star: 0.0,
    };
    let b = DMatrix::identity(1, 1);
    let at = IterateState {
        x: DVector::zeros(1),
        z: DVector::zeros(1),
        lambda: DVector::from_element(1, 2.0),
        rho: PenaltyVector::uniform(1, 4.0).unwrap(),
        k: 0,
        t: 0,
    };
    assert_eq!(lyapunov_value(&at, &saddle, &b).unwrap(), 0.0);
    let off = IterateState { lambda: DVector::from_element(1, 3.0), ..at };
    assert_eq!(lyapunov_value(&off, &saddle, &b).unwrap(), 0.25);
}

#[test]
fn lyapunov_is_non_increasing_along_trace() {
    for seed in 0..5 {
        let qp = random_qp(seed);
        let saddle = kkt_saddle(&qp);
        let init = dual_feasible_start(&qp);
        let mut cfg = SolverConfig::new(300, 1e-12, 1e-12).unwrap();
        let trace = solve_static(&qp.problem, init, &mut QuadraticSubsolver, &mut QuadraticSubsolver, &mut cfg).unwrap();
        let mut prev = &trace.initial;
        for rec in &trace.records {
            let step = lyapunov_step(prev, rec, &saddle, &qp.problem.b).unwrap();
            assert!(step.v_next <= step.v_prev + 1e-9, "seed {seed} k {}: {step:?}", rec.state.k);
            assert!(step.margin() >= -1e-9, "seed {seed} k {}: {step:?}", rec.state.k);
            let bounds = suboptimality_bounds(prev, rec, &saddle, &qp.problem.b).unwrap();
            assert!(bounds.holds(1e-9 * (1.0 + saddle.p_star.abs())), "seed {seed}: {bounds:?}");
            prev = &rec.state;
        }
    }
}

#[test]
fn lagrangian_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for seed in 0..10 {
        let qp = random_qp(100 + seed);
        let state = IterateState {
            x: DVector::from_fn(qp.problem.n(), |_, _| rng.random_range(-1.0..1.0)),
            z: DVector::from_fn(qp.problem.m(), |_, _| rng.random_range(-1.0..1.0)),
            lambda: DVector::from_fn(qp.problem.p(), |_, _| rng.random_range(-1.0..1.0)),
            rho: qp.rho.clone(),
            k: 0,
            t: 0,
        };
        let gx = augmented_lagrangian_grad_x(&qp.problem, &state).unwrap();
        let h = 1e-6;
        for i in 0..qp.problem.n() {
            let mut plus = state.clone();
            let mut minus = state.clone();
            plus.x[i] += h;
            minus.x[i] -= h;
            let fd = (augmented_lagrangian(&qp.problem, &plus).unwrap() - augmented_lagrangian(&qp.problem, &minus).unwrap())
                / (2.0 * h);
            assert!((fd - gx[i]).abs() <= 1e-5 * gx[i].abs().max(1.0));
        }
        let gz = augmented_lagrangian_grad_z(&qp.problem, &state).unwrap();
        for i in 0..qp.problem.m() {
            let mut plus = state.clone();
            let mut minus = state.clone();
            plus.z[i] += h;
            minus.z[i] -= h;
            let fd = (augmented_lagrangian(&qp.problem, &plus).unwrap() - augmented_lagrangian(&qp.problem, &minus).unwrap())
                / (2.0 * h);
            assert!((fd - gz[i]).abs() <= 1e-5 * gz[i].abs().max(1.0));
        }
    }
}

#[test]
fn nonpositive_adaptation_output_is_rejected() {
    let (prob, _, _) = one_dim_problem();
    let init = IterateState::zeros(&prob, PenaltyVector::uniform(1, 1.0).unwrap()).unwrap();
    let mut cfg = SolverConfig::new(10, 1e-9, 1e-9)
        .unwrap()
        .with_adaptation(|_: &IterateState, _: &ResidualPair| DVector::from_element(1, 0.0));
    let res = solve_static(&prob, init, &mut QuadraticSubsolver, &mut QuadraticSubsolver, &mut cfg);
    assert!(res.is_err());
}

#[test]
fn non_convergence_is_reported_in_trace() {
    let qp = random_qp(7);
    let init = IterateState::zeros(&qp.problem, qp.rho.clone()).unwrap();
    let mut cfg = SolverConfig::new(2, 1e-14, 1e-14).unwrap();
    let trace = solve_static(&qp.problem, init, &mut QuadraticSubsolver, &mut QuadraticSubsolver, &mut cfg).unwrap();
    assert!(!trace.converged);
    assert_eq!(trace.records.len(), 2);
}

#[test]
fn subsolver_failure_carries_iteration() {
    struct Failing;
    impl Subsolver for Failing {
        fn solve(&mut self, _: &Subproblem<'_>) -> Result<DVector<f64>, String> {
            Err("boom".into())
        }
        fn tolerance(&self) -> f64 {
            0.0
        }
    }
    let (prob, _, _) = one_dim_problem();
    let init = IterateState::zeros(&prob, PenaltyVector::uniform(1, 1.0).unwrap()).unwrap();
    let mut cfg = SolverConfig::new(10, 1e-9, 1e-9).unwrap();
    let err = solve_static(&prob, init, &mut Failing, &mut QuadraticSubsolver, &mut cfg).unwrap_err();
    assert!(matches!(err, crate::Error::Subsolver { iteration: 0, .. }));
}

struct HalfSimilarity;
impl Similarity for HalfSimilarity {
    fn similarity(&mut self, _: &IterateState) -> Mu {
        Mu::Scalar(0.5)
    }
}

#[test]
fn online_solver_forgets_only_at_step_start() {
    let (prob, _, _) = one_dim_problem();
    let init = IterateState::zeros(&prob, PenaltyVector::uniform(1, 1.0).unwrap()).unwrap();
    let cfg = SolverConfig::new(3, 1e-14, 1e-14).unwrap().with_similarity(HalfSimilarity);
    let mut online = OnlineSolver::new(cfg, init);
    let first = online.step(&prob, &mut QuadraticSubsolver, &mut QuadraticSubsolver).unwrap();
    let second = online.step(&prob, &mut QuadraticSubsolver, &mut QuadraticSubsolver).unwrap();
    assert_eq!(first.records[0].state.t, 0);
    assert_eq!(second.records[0].state.t, 1);
    for trace in [&first, &second] {
        assert_eq!(trace.records[0].mu_used, Mu::Scalar(0.5));
        assert!(trace.records[1..].iter().all(|r| r.mu_used == Mu::one()));
        assert_eq!(trace.records.iter().map(|r| r.state.k).collect::<Vec<_>>(), vec![1, 2, 3]);
    }
}

#[test]
fn online_monitor_examples() {
    let (prob, _, _) = one_dim_problem();
    let init = IterateState::zeros(&prob, PenaltyVector::uniform(1, 1.0).unwrap()).unwrap();
    let mut online = OnlineSolver::new(SolverConfig::new(50, 1e-14, 1e-14).unwrap(), init);
    let a = online.step(&prob, &mut QuadraticSubsolver, &mut QuadraticSubsolver).unwrap();
    let b = online.step(&prob, &mut QuadraticSubsolver, &mut QuadraticSubsolver).unwrap();
    let report = online_convergence_monitor(&a, &b);
    assert!(report.x_drift < 1e-9);
    assert_eq!(report.x_dominates, Some(true));

    // Drift equal to contraction: the later step ends where the first began
    // relative to its final iterate, mirrored.
    let mut shifted = b.clone();
    let last = a.last_state().clone();
    let delta = &last.x - &a.initial.x;
    let zdelta = &last.z - &a.initial.z;
    let rec = shifted.records.last_mut().unwrap();
    rec.state.x = &last.x + &delta;
    rec.state.z = &last.z + &zdelta;
    let report = online_convergence_monitor(&a, &shifted);
    assert!((report.x_contraction - report.x_drift).abs() < 1e-15);
    assert_eq!(report.x_dominates, Some(false));

    let empty = Trace { initial: a.initial.clone(), records: vec![], converged: false };
    assert_eq!(online_convergence_monitor(&empty, &b).x_dominates, None);
}

#[test]
fn trace_csv_has_one_row_per_iteration() {
    let qp = random_qp(1);
    let init = IterateState::zeros(&qp.problem, qp.rho.clone()).unwrap();
    let mut cfg = SolverConfig::new(5, 1e-14, 1e-14).unwrap();
    let trace = solve_static(&qp.problem, init, &mut QuadraticSubsolver, &mut QuadraticSubsolver, &mut cfg).unwrap();
    let mut buf = Vec::new();
    trace.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(lines[0], "k,primal_residual_inf,dual_residual_inf,objective,rho_min,rho_max");
    assert_eq!(lines.len(), 6);
    assert!(lines[1].starts_with("1,"));
}
