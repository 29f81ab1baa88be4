//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! fails. Run with `cargo test -p oaadmm-cli --test acceptance`.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use nalgebra::{DVector, Rotation2};
use oaadmm::admm::{
    iterate, lyapunov_step, solve_static, suboptimality_bounds, ConstantPenalty, IterateState, Mu, PenaltyVector,
    QuadraticSubsolver, SolverConfig,
};
use oaadmm::agent::{copy_lagrangian, mu_filtered, phi_ii, phi_value, ConsensusPenalty, MuConfig, PenaltyMode, PhiConfig};
use oaadmm::baselines::Fidelity;
use oaadmm::bench::{
    case_seed, par_map, run_benchmark, run_case, run_sweep, BenchmarkOptions, Classification, SweepOptions,
};
use oaadmm::geometry::{capsule_clearance, Capsule, Vec2};
use oaadmm::sim::{enumerate_conflict_cases, Protocol};
use oaadmm::testkit::{self, RandomQp};
use proptest::test_runner::{Config, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

/// The QP suite shared by the first three criteria.
fn qp_suite() -> Vec<RandomQp> {
    (0..20).map(|seed| testkit::random_qp(1000 + seed, 10)).collect()
}

fn static_convergence() -> Outcome {
    let suite = qp_suite();
    let start = Instant::now();
    let mut worst_x: f64 = 0.0;
    let mut failures = Vec::new();
    let mut max_iters = 0;
    for (i, qp) in suite.iter().enumerate() {
        let saddle = testkit::kkt_saddle(qp);
        let init = testkit::dual_feasible_start(qp, qp.rho.clone());
        let mut cfg = SolverConfig::new(2000, 1e-6, 1e-6).unwrap();
        let trace = solve_static(&qp.problem, init, &mut QuadraticSubsolver, &mut QuadraticSubsolver, &mut cfg).unwrap();
        let err = (&trace.last_state().x - &saddle.x_star).amax();
        worst_x = worst_x.max(err);
        max_iters = max_iters.max(trace.records.len());
        if !trace.converged || err > 1e-5 {
            failures.push(i);
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        failures.is_empty() && secs < 5.0,
        format!("20 QPs, max iterations {max_iters}, max |x - x*| {worst_x:.2e}, {secs:.2} s, failing {failures:?}"),
    )
}

fn for_each_iteration(mut check: impl FnMut(&RandomQp, &IterateState, &oaadmm::admm::IterationRecord, &oaadmm::admm::SaddlePoint)) {
    for qp in qp_suite() {
        let saddle = testkit::kkt_saddle(&qp);
        let init = testkit::dual_feasible_start(&qp, qp.rho.clone());
        let mut cfg = SolverConfig::new(2000, 1e-6, 1e-6).unwrap();
        let trace = solve_static(&qp.problem, init, &mut QuadraticSubsolver, &mut QuadraticSubsolver, &mut cfg).unwrap();
        let mut prev = &trace.initial;
        for rec in &trace.records {
            check(&qp, prev, rec, &saddle);
            prev = &rec.state;
        }
    }
}

fn lyapunov_decrease() -> Outcome {
    let (mut checked, mut violations, mut worst) = (0, 0, f64::INFINITY);
    for_each_iteration(|qp, prev, rec, saddle| {
        let step = lyapunov_step(prev, rec, saddle, &qp.problem.b).unwrap();
        checked += 1;
        worst = worst.min(step.margin());
        if step.margin() < -1e-9 {
            violations += 1;
        }
    });
    outcome(violations == 0, format!("{checked} iterations, {violations} violations, smallest margin {worst:.2e}"))
}

fn suboptimality_sandwich() -> Outcome {
    let (mut checked, mut violations) = (0, 0);
    for_each_iteration(|qp, prev, rec, saddle| {
        let b = suboptimality_bounds(prev, rec, saddle, &qp.problem.b).unwrap();
        checked += 1;
        if !b.holds(1e-9 * (1.0 + saddle.p_star.abs())) {
            violations += 1;
        }
    });
    outcome(violations == 0, format!("{checked} iterations, {violations} violations (rounding slack 1e-9·(1+|p*|))"))
}

fn scalar_equivalence() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for seed in 0..10 {
        let qp = testkit::random_qp(2000 + seed, 10);
        let rho: f64 = rng.random_range(0.2..5.0);
        let (n, m, p) = (qp.problem.n(), qp.problem.m(), qp.problem.p());
        let x = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let z = DVector::from_fn(m, |_, _| rng.random_range(-1.0..1.0));
        let lambda = DVector::from_fn(p, |_, _| rng.random_range(-1.0..1.0));
        let mut state =
            IterateState { x: x.clone(), z: z.clone(), lambda: lambda.clone(), rho: PenaltyVector::uniform(p, rho).unwrap(), k: 0, t: 0 };
        let mut reference = testkit::ScalarAdmm::new(x, z, lambda, rho);
        for _ in 0..100 {
            let rec = iterate(&qp.problem, &state, Mu::one(), &mut QuadraticSubsolver, &mut QuadraticSubsolver, &mut ConstantPenalty)
                .unwrap();
            state = rec.state;
            reference.step(&qp);
            let diff = (&state.x - &reference.x)
                .amax()
                .max((&state.z - &reference.z).amax())
                .max((&state.lambda - &reference.lambda).amax());
            worst = worst.max(diff);
        }
    }
    outcome(worst <= 1e-10, format!("10 instances × 100 iterations, max deviation {worst:.2e}"))
}

fn phi(d: f64, w: f64, a: f64, lo: f64, hi: f64) -> PhiConfig {
    PhiConfig { d, w, a, phi_min: lo, phi_max: hi, second_exponent: true }
}

fn adaptation_functions() -> Outcome {
    let examples = [
        phi_value(4.0, &phi(2.0, 1.0, 2.0, 0.1, 10.0)) == 0.25,
        phi_value(100.0, &phi(1.0, 2.0, 1.0, 0.1, 10.0)) == 0.2,
        phi_value(1e-9, &phi(1.0, 1.0, 1.0, 0.1, 10.0)) == 10.0,
        phi_value(2.0, &phi(0.0, 1.0, 1.0, 0.1, 10.0)) == 0.1,
        phi_ii(&[&[0.5], &[2.0]], 1, &phi(1.0, 1.0, 1.0, 0.1, 10.0)) == vec![1.25],
        phi_ii(&[&[10.0]], 1, &phi(1.0, 1.0, 1.0, 0.1, 10.0)) == vec![10.0],
        phi_ii(&[&[1.0], &[3.0]], 1, &phi(1.0, 1.0, 2.0, 0.1, 100.0)) == vec![5.0],
        mu_filtered(&[1.0, 1.0], &[0.4, 2.0], 1.0, &MuConfig { eta: 0.5, weights: None }) == vec![0.7, 1.0],
        mu_filtered(&[0.3], &[5.0], 1.0, &MuConfig { eta: 1.0, weights: None }) == vec![0.3],
        mu_filtered(&[0.9], &[0.6], 2.0, &MuConfig { eta: 0.0, weights: None }) == vec![0.3],
    ];
    let failed_examples: Vec<usize> = examples.iter().enumerate().filter(|(_, ok)| !**ok).map(|(i, _)| i).collect();

    let mut runner = TestRunner::new(Config { cases: 100_000, failure_persistence: None, ..Config::default() });
    let strategy = (
        (0.0..5.0f64, 0.01..10.0f64, 0.1..4.0f64, 0.001..1.0f64, 1.01..100.0f64),
        (-2.0..20.0f64, proptest::collection::vec(0.0..1000.0f64, 1..5)),
        (0.0..=1.0f64, 0.0..=1.0f64, 0.0..100.0f64),
    );
    let prop = runner.run(&strategy, |((d, w, a, lo, span), (clearance, links), (eta, prev, rho))| {
        let c = phi(d, w, a, lo, lo * span);
        let v = phi_value(clearance, &c);
        proptest::prop_assert!(v >= c.lower() && v <= c.upper(), "phi {v}");
        let refs: Vec<&[f64]> = links.iter().map(std::slice::from_ref).collect();
        let ii = phi_ii(&refs, 1, &c)[0];
        proptest::prop_assert!(ii >= c.lower() && ii <= c.upper(), "phi_ii {ii}");
        let m = mu_filtered(&[prev], &[rho], w, &MuConfig { eta, weights: None })[0];
        proptest::prop_assert!((0.0..=1.0).contains(&m), "mu {m}");
        Ok(())
    });
    outcome(
        failed_examples.is_empty() && prop.is_ok(),
        format!(
            "{} examples (failing {failed_examples:?}); 1e5 random inputs: {}",
            examples.len(),
            prop.map_or_else(|e| e.to_string(), |_| "bounds hold".into())
        ),
    )
}

fn moved(c: &Capsule, rot: &Rotation2<f64>, shift: Vec2) -> Capsule {
    Capsule { p0: rot * c.p0 + shift, p1: rot * c.p1 + shift, radius: c.radius }
}

fn clearance_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut oracle_err, mut sym_err, mut rigid_err): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for _ in 0..1000 {
        let a = testkit::random_capsule(&mut rng);
        let b = testkit::random_capsule(&mut rng);
        let exact = capsule_clearance(&a, &b);
        oracle_err = oracle_err.max((testkit::sampled_clearance(&a, &b, 4000) - exact).abs());
        sym_err = sym_err.max((capsule_clearance(&b, &a) - exact).abs());
        let rot = Rotation2::new(rng.random_range(-3.2..3.2));
        let shift = Vec2::new(rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0));
        rigid_err = rigid_err.max((capsule_clearance(&moved(&a, &rot, shift), &moved(&b, &rot, shift)) - exact).abs());
    }
    outcome(
        oracle_err <= 1e-3 && sym_err <= 1e-9 && rigid_err <= 1e-9,
        format!("1000 pairs: oracle {oracle_err:.2e}, symmetry {sym_err:.2e}, rigid motion {rigid_err:.2e}"),
    )
}

fn gradients() -> Outcome {
    let h = 1e-6;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut j_err, mut x_err, mut z_err): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for i in 0..50 {
        let p = if i % 2 == 0 { testkit::bicycle_problem(12) } else { testkit::holonomic_problem(12) };
        let s0 = testkit::random_state(&mut rng, &p);
        let u = testkit::random_inputs(&mut rng, &p);
        let mut grad = vec![0.0; u.len()];
        let mut scratch = vec![0.0; u.len()];

        let empty = ConsensusPenalty::new(p.plan_len());
        let j = p.reduced_lagrangian(&s0, &u, &empty, &mut grad);
        let fd = testkit::central_difference(|v| p.tracking_cost(&s0, v), &u, h);
        j_err = j_err.max(testkit::max_relative_error(&grad, &fd)).max((j - p.tracking_cost(&s0, &u)).abs());

        let pen = testkit::random_penalty(&mut rng, &p, &s0, 2);
        p.reduced_lagrangian(&s0, &u, &pen, &mut grad);
        let fd = testkit::central_difference(|v| p.reduced_lagrangian(&s0, v, &pen, &mut scratch), &u, h);
        x_err = x_err.max(testkit::max_relative_error(&grad, &fd));

        let n = 4 * 12;
        let mut draw = |lo: f64, hi: f64| -> Vec<f64> { (0..n).map(|_| rng.random_range(lo..hi)).collect() };
        let (x, z, l, r) = (draw(-3.0, 3.0), draw(-3.0, 3.0), draw(-3.0, 3.0), draw(0.1, 3.0));
        let mut g = vec![0.0; n];
        let mut s = vec![0.0; n];
        copy_lagrangian(&x, &z, &l, &r, &mut g);
        let fd = testkit::central_difference(|v| copy_lagrangian(&x, v, &l, &r, &mut s), &z, h);
        z_err = z_err.max(testkit::max_relative_error(&g, &fd));
    }
    outcome(
        j_err <= 1e-5 && x_err <= 1e-5 && z_err <= 1e-5,
        format!("50 instances each, max relative error: tracking {j_err:.2e}, x-update {x_err:.2e}, copy {z_err:.2e}"),
    )
}

fn sweep() -> Outcome {
    let start = Instant::now();
    let opts = SweepOptions::default();
    let oa = run_sweep(PenaltyMode::Adaptive, &opts);
    let fixed = run_sweep(PenaltyMode::Fixed, &opts);
    let secs = start.elapsed().as_secs_f64();
    let (a, f) = (&oa.summary, &fixed.summary);
    let lower = |x: Option<f64>, y: Option<f64>| matches!((x, y), (Some(x), Some(y)) if x < y);
    let pass = secs < 1800.0
        && oa.runs.len() == 220
        && fixed.runs.len() == 220
        && a.counts.resolved >= 3 * f.counts.resolved
        && lower(a.mean_delay, f.mean_delay)
        && a.msv < f.msv;
    outcome(
        pass,
        format!(
            "resolved {} vs {}, delay {:.3?} vs {:.3?}, msv {:.2e} vs {:.2e}, {secs:.0} s",
            a.counts.resolved, f.counts.resolved, a.mean_delay, f.mean_delay, a.msv, f.msv
        ),
    )
}

/// Runs the OA-ADMM benchmark with per-run timing; returns the outcome of
/// the robustness criterion and the mean delay and mean estimate.
fn benchmark_robustness() -> (Outcome, Option<f64>, f64) {
    let opts = BenchmarkOptions::default();
    let jobs: Vec<_> = enumerate_conflict_cases()
        .into_iter()
        .flat_map(|c| (0..opts.repetitions).map(move |r| (c, r)))
        .collect();
    let runs = par_map(&jobs, |&(c, r)| {
        let start = Instant::now();
        let run = run_case(c, Protocol::OaAdmm, r, &opts).unwrap();
        (run, start.elapsed().as_secs_f64())
    });
    let violations = runs.iter().filter(|(r, _)| r.classification == Classification::Violation).count();
    let timeouts = runs.iter().filter(|(r, _)| r.classification == Classification::Timeout).count();
    let slowest = runs.iter().map(|(_, s)| *s).fold(0.0, f64::max);
    let delays: Vec<f64> = runs.iter().filter_map(|(r, _)| r.delay).collect();
    let mean_delay = (!delays.is_empty()).then(|| delays.iter().sum::<f64>() / delays.len() as f64);
    let mean_estimate = runs.iter().map(|(r, _)| r.estimated_delay).sum::<f64>() / runs.len() as f64;
    let min_delay = delays.iter().copied().fold(f64::INFINITY, f64::min);
    debug_assert!(runs.iter().all(|(r, _)| r.seed == case_seed(opts.base_seed, r.repetition, r.case)));
    let o = outcome(
        violations == 0 && timeouts == 0 && slowest < 60.0,
        format!(
            "{} runs ({} cases × {}): {violations} violations, {timeouts} timeouts, slowest {slowest:.1} s, min delay {min_delay:.3} s",
            runs.len(),
            runs.len() / opts.repetitions,
            opts.repetitions
        ),
    );
    (o, mean_delay, mean_estimate)
}

fn baseline_comparison(oa_delay: Option<f64>, estimate: f64) -> Outcome {
    let opts = BenchmarkOptions::default();
    let reactive = run_benchmark(Protocol::Reactive { fidelity: Fidelity::Low }, &opts).unwrap().summary;
    let timeslot = run_benchmark(Protocol::Timeslot { fidelity: Fidelity::High }, &opts).unwrap().summary;
    let below = |other: Option<f64>| matches!((oa_delay, other), (Some(a), Some(b)) if a < b);
    let pass = below(reactive.mean_delay) && below(timeslot.mean_delay) && (estimate - 0.4089).abs() <= 0.15;
    outcome(
        pass,
        format!(
            "mean delay oa-admm {:.3?}, reactive-low {:.3?}, timeslot-high {:.3?}; mean estimated delay {estimate:.4} (0.4089 ± 0.15)",
            oa_delay, reactive.mean_delay, timeslot.mean_delay
        ),
    )
}

fn run_cli(out: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_oaadmm"))
        .args(["benchmark", "--protocol", "oa-admm,reactive", "--fidelity", "low", "--repetitions", "1", "--seed", "11"])
        .arg("--out-dir")
        .arg(out)
        .output()
        .expect("running the oaadmm binary")
}

fn cli_determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let (ra, rb) = (run_cli(&a), run_cli(&b));
    if !ra.status.success() || !rb.status.success() {
        return outcome(false, format!("benchmark exited with {} / {}", ra.status, rb.status));
    }
    let mut names: Vec<String> = std::fs::read_dir(&a)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".csv"))
        .collect();
    names.sort();
    let differing: Vec<&String> =
        names.iter().filter(|n| std::fs::read(a.join(n)).ok() != std::fs::read(b.join(n)).ok()).collect();
    outcome(
        !names.is_empty() && differing.is_empty(),
        format!("{} CSV files compared, differing {differing:?}", names.len()),
    )
}

fn main() {
    let mut results: Vec<(u32, &str, Outcome)> = Vec::new();
    let mut report = |id: u32, name: &'static str, o: Outcome| {
        println!("[{}] criterion {id:>2} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        results.push((id, name, o));
    };
    report(1, "static convergence", static_convergence());
    report(2, "Lyapunov decrease", lyapunov_decrease());
    report(3, "suboptimality bounds", suboptimality_sandwich());
    report(4, "scalar-penalty equivalence", scalar_equivalence());
    report(5, "adaptation and similarity functions", adaptation_functions());
    report(6, "capsule clearance", clearance_oracle());
    report(7, "analytic gradients", gradients());
    report(8, "tuning sweep", sweep());
    let (robust, oa_delay, estimate) = benchmark_robustness();
    report(9, "benchmark robustness", robust);
    report(10, "delay against baselines", baseline_comparison(oa_delay, estimate));
    report(11, "CLI determinism", cli_determinism());
    let failed: Vec<u32> = results.iter().filter(|(_, _, o)| !o.pass).map(|(id, _, _)| *id).collect();
    println!("{} of {} criteria passed", results.len() - failed.len(), results.len());
    if !failed.is_empty() {
        eprintln!("failing criteria: {failed:?}");
        std::process::exit(1);
    }
}
