//! Benchmark and sweep runners with CSV reports.

use std::collections::BTreeMap;
use std::io::Write;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::estimate::estimated_delay;
use super::metrics::{mean, msv, Classification, Counts, MetricsRecord, SweepGrid};
use crate::agent::{AgentConfig, PenaltyMode};
use crate::error::Result;
use crate::sim::{
    enumerate_conflict_cases, four_robot_crossing_solo, four_robot_crossing_subset, run_scenario, run_scenario_subset,
    ClockConfig, ConflictCase, CrossingConfig, Protocol, RunOptions, WorldTrace,
};

/// Applies `f` to every item on all available cores; results keep the
/// input order.
pub fn par_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get()).min(items.len().max(1));
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<R>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..threads {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                slots.lock().expect("no panics while holding the lock")[i] = Some(r);
            });
        }
    });
    slots.into_inner().expect("threads joined").into_iter().map(|r| r.expect("every slot filled")).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkOptions {
    pub run: RunOptions,
    pub repetitions: usize,
    /// See [`case_seed`].
    pub base_seed: u64,
}

impl Default for BenchmarkOptions {
    fn default() -> Self {
        Self { run: RunOptions::default(), repetitions: 3, base_seed: 1 }
    }
}

/// One run of one case. Delays are those of the ego vehicle (id 0).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseRun {
    pub case: ConflictCase,
    pub repetition: usize,
    pub seed: u64,
    pub classification: Classification,
    pub time: Option<f64>,
    /// Completion time of the ego driving alone with the same protocol and
    /// reference speed.
    pub solo_time: Option<f64>,
    pub delay: Option<f64>,
    pub estimated_delay: f64,
    pub min_clearance: f64,
    pub msv: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub protocol: Protocol,
    pub runs: Vec<CaseRun>,
    pub summary: MetricsRecord,
}

/// Seed of one run: every (repetition, case) pair draws its own reference
/// speeds, so which vehicle is faster varies across the benchmark.
pub fn case_seed(base_seed: u64, repetition: usize, case: ConflictCase) -> u64 {
    let cases = enumerate_conflict_cases();
    let index = cases.iter().position(|c| *c == case).expect("enumerated case");
    base_seed + (repetition * cases.len() + index) as u64
}

pub fn run_case(case: ConflictCase, protocol: Protocol, repetition: usize, opts: &BenchmarkOptions) -> Result<CaseRun> {
    let seed = case_seed(opts.base_seed, repetition, case);
    let spec = case.scenario(protocol, seed);
    let trace = run_scenario(&spec, &opts.run)?;
    let solo = run_scenario_subset(&spec, &opts.run, |id| id == 0)?;
    let time = trace.vehicles[0].completion_time;
    let solo_time = solo.vehicles[0].completion_time;
    let estimate = estimated_delay(&spec, &opts.run.agent.shape)?;
    Ok(CaseRun {
        case,
        repetition,
        seed,
        classification: Classification::of(&trace),
        time,
        solo_time,
        delay: time.zip(solo_time).map(|(t, s)| t - s),
        estimated_delay: estimate.per_vehicle[0],
        min_clearance: trace.min_clearance(),
        msv: msv(&trace),
    })
}

/// Runs every case `repetitions` times. A run that fails outright is an
/// error: unlike the sweep, the benchmark has no failure budget.
pub fn run_benchmark(protocol: Protocol, opts: &BenchmarkOptions) -> Result<BenchmarkReport> {
    let jobs: Vec<(ConflictCase, usize)> = enumerate_conflict_cases()
        .into_iter()
        .flat_map(|c| (0..opts.repetitions).map(move |r| (c, r)))
        .collect();
    let runs = par_map(&jobs, |&(c, r)| run_case(c, protocol, r, opts)).into_iter().collect::<Result<Vec<_>>>()?;
    let summary = summarize(protocol.label(), &runs);
    Ok(BenchmarkReport { protocol, runs, summary })
}

fn summarize(label: String, runs: &[CaseRun]) -> MetricsRecord {
    let mut counts = Counts::default();
    for r in runs {
        counts.add(r.classification);
    }
    let mean_delay = mean(runs.iter().filter_map(|r| r.delay));
    let mean_estimated_delay = mean(runs.iter().map(|r| r.estimated_delay));
    MetricsRecord {
        label,
        runs: runs.len(),
        mean_time: mean(runs.iter().filter_map(|r| r.time)),
        mean_delay,
        mean_estimated_delay,
        mean_added_delay: mean_delay.zip(mean_estimated_delay).map(|(m, e)| super::added_delay(m, e)),
        min_clearance: runs.iter().map(|r| r.min_clearance).fold(f64::INFINITY, f64::min),
        msv: mean(runs.iter().map(|r| r.msv)).unwrap_or(0.0),
        counts,
    }
}

fn fmt(v: Option<f64>) -> String {
    v.filter(|x| x.is_finite()).map(|x| format!("{x:.4}")).unwrap_or_default()
}

impl BenchmarkReport {
    /// Per-case mean delay over the repetitions that finished, keyed by
    /// row letter then `ego,other` column.
    pub fn case_matrix(&self) -> BTreeMap<char, BTreeMap<String, Option<f64>>> {
        let mut sums: BTreeMap<ConflictCase, Vec<f64>> = BTreeMap::new();
        for r in &self.runs {
            let e = sums.entry(r.case).or_default();
            e.extend(r.delay);
        }
        let mut out: BTreeMap<char, BTreeMap<String, Option<f64>>> = BTreeMap::new();
        for (case, delays) in sums {
            out.entry(case.relative_arm.letter()).or_default().insert(case.column(), mean(delays));
        }
        out
    }

    /// The per-case matrix with rows `L`, `F`, `R` and one column per
    /// `ego,other` pair.
    pub fn write_matrix_csv<W: Write>(&self, out: W) -> Result<()> {
        write_matrix(self.case_matrix(), &self.summary.label, out)
    }

    /// One line per run.
    pub fn write_runs_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "protocol",
            "case",
            "repetition",
            "seed",
            "classification",
            "time",
            "solo_time",
            "delay",
            "estimated_delay",
            "min_clearance",
            "msv",
        ])?;
        for r in &self.runs {
            w.write_record([
                self.summary.label.clone(),
                r.case.label(),
                r.repetition.to_string(),
                r.seed.to_string(),
                r.classification.label().to_string(),
                fmt(r.time),
                fmt(r.solo_time),
                fmt(r.delay),
                format!("{:.4}", r.estimated_delay),
                format!("{:.4}", r.min_clearance),
                format!("{:.6e}", r.msv),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// The estimated-delay matrix in the layout of the per-case reports.
pub fn write_estimate_matrix_csv<W: Write>(shape: &crate::geometry::CapsuleShape, out: W) -> Result<()> {
    let mut m: BTreeMap<char, BTreeMap<String, Option<f64>>> = BTreeMap::new();
    for case in enumerate_conflict_cases() {
        let e = estimated_delay(&case.scenario(Protocol::None, 0), shape)?;
        m.entry(case.relative_arm.letter()).or_default().insert(case.column(), Some(e.per_vehicle[0]));
    }
    write_matrix(m, "estimated", out)
}

fn write_matrix<W: Write>(m: BTreeMap<char, BTreeMap<String, Option<f64>>>, label: &str, out: W) -> Result<()> {
    let columns: Vec<String> = enumerate_conflict_cases()
        .iter()
        .map(|c| c.column())
        .fold(Vec::new(), |mut acc, c| {
            if !acc.contains(&c) {
                acc.push(c);
            }
            acc
        });
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["protocol".to_string(), "row".to_string()];
    header.extend(columns.iter().cloned());
    w.write_record(&header)?;
    for row in ['L', 'F', 'R'] {
        let Some(cells) = m.get(&row) else { continue };
        let mut rec = vec![label.to_string(), row.to_string()];
        rec.extend(columns.iter().map(|c| fmt(cells.get(c).copied().flatten())));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Summary table, one line per record.
pub fn write_summary_csv<W: Write>(records: &[MetricsRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "label",
        "runs",
        "mean_time",
        "mean_delay",
        "mean_estimated_delay",
        "mean_added_delay",
        "min_clearance",
        "msv",
        "resolved",
        "violations",
        "timeouts",
    ])?;
    for r in records {
        w.write_record([
            r.label.clone(),
            r.runs.to_string(),
            fmt(r.mean_time),
            fmt(r.mean_delay),
            fmt(r.mean_estimated_delay),
            fmt(r.mean_added_delay),
            fmt(Some(r.min_clearance)),
            format!("{:.6e}", r.msv),
            r.counts.resolved.to_string(),
            r.counts.violations.to_string(),
            r.counts.timeouts.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepOptions {
    pub grid: SweepGrid,
    pub crossing: CrossingConfig,
    pub agent: AgentConfig,
    pub clock: ClockConfig,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            grid: SweepGrid::default(),
            crossing: CrossingConfig::default(),
            agent: AgentConfig::robot(),
            clock: ClockConfig::default(),
        }
    }
}

/// One sweep point. The delay is the mean over robots of completion time
/// minus the time the same robot needs without communication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRun {
    pub d: f64,
    pub w: f64,
    pub classification: Classification,
    pub delay: Option<f64>,
    pub min_clearance: f64,
    pub msv: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub mode: PenaltyMode,
    pub runs: Vec<SweepRun>,
    pub summary: MetricsRecord,
}

fn mode_label(mode: PenaltyMode) -> &'static str {
    match mode {
        PenaltyMode::Adaptive => "oa-admm",
        PenaltyMode::Fixed => "admm",
    }
}

fn sweep_point(d: f64, w: f64, mode: PenaltyMode, opts: &SweepOptions) -> Result<SweepRun> {
    let trace: WorldTrace =
        four_robot_crossing_subset(d, w, mode, &opts.crossing, &opts.agent, &opts.clock, &|_| true)?;
    let solo = four_robot_crossing_solo(d, w, mode, &opts.crossing, &opts.agent, &opts.clock)?;
    let classification = Classification::of(&trace);
    let delay = if trace.timed_out {
        None
    } else {
        mean(
            trace
                .vehicles
                .iter()
                .zip(&solo.vehicles)
                .filter_map(|(v, s)| v.completion_time.zip(s.completion_time).map(|(t, r)| t - r)),
        )
    };
    Ok(SweepRun { d, w, classification, delay, min_clearance: trace.min_clearance(), msv: msv(&trace) })
}

/// Runs every grid point. A point whose simulation fails is logged and
/// counted as a timeout.
pub fn run_sweep(mode: PenaltyMode, opts: &SweepOptions) -> SweepReport {
    let points = opts.grid.combinations();
    let runs = par_map(&points, |&(d, w)| {
        sweep_point(d, w, mode, opts).unwrap_or_else(|e| {
            log::warn!("sweep point D={d} w={w} ({}) failed: {e}", mode_label(mode));
            SweepRun { d, w, classification: Classification::Timeout, delay: None, min_clearance: f64::NAN, msv: 0.0 }
        })
    });
    let mut counts = Counts::default();
    for r in &runs {
        counts.add(r.classification);
    }
    let summary = MetricsRecord {
        label: mode_label(mode).into(),
        runs: runs.len(),
        mean_time: None,
        mean_delay: mean(runs.iter().filter_map(|r| r.delay)),
        mean_estimated_delay: None,
        mean_added_delay: None,
        min_clearance: runs.iter().map(|r| r.min_clearance).filter(|c| !c.is_nan()).fold(f64::INFINITY, f64::min),
        msv: mean(runs.iter().map(|r| r.msv)).unwrap_or(0.0),
        counts,
    };
    SweepReport { mode, runs, summary }
}

impl SweepReport {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["solver", "d", "w", "classification", "delay", "min_clearance", "msv"])?;
        for r in &self.runs {
            w.write_record([
                self.summary.label.clone(),
                format!("{:.2}", r.d),
                format!("{:.2}", r.w),
                r.classification.label().to_string(),
                fmt(r.delay),
                fmt(Some(r.min_clearance)),
                format!("{:.6e}", r.msv),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}
