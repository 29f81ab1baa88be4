//! `oaadmm`: static solves, single scenarios, the intersection benchmark and
//! the four-robot tuning sweep.

mod problem_file;

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use oaadmm::admm::{solve_static, QuadraticSubsolver};
use oaadmm::agent::PenaltyMode;
use oaadmm::baselines::Fidelity;
use oaadmm::bench::{
    run_benchmark, run_sweep, write_estimate_matrix_csv, write_summary_csv, BenchmarkOptions, Classification,
    MetricsRecord, SweepOptions,
};
use oaadmm::sim::{run_scenario, ClockConfig, Protocol, RunOptions, ScenarioSpec};

use problem_file::StaticProblemFile;

#[derive(Parser)]
#[command(name = "oaadmm", version, about = "Online adaptive ADMM conflict resolution")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Base seed for reference-speed draws. Overrides the seed of a scenario file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for CSV and JSON reports; created if missing.
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// Planning rate [default: 20].
    #[arg(long, global = true)]
    control_hz: Option<f64>,
    /// Integration rate, an integer multiple of the control rate [default: 160].
    #[arg(long, global = true)]
    physics_hz: Option<f64>,
    /// Simulated seconds before a run counts as a timeout [default: 30].
    #[arg(long, global = true)]
    timeout_s: Option<f64>,
    /// OA-ADMM iterations per control tick.
    #[arg(long, global = true)]
    iterations_per_step: Option<usize>,
}

impl Common {
    fn clock(&self) -> ClockConfig {
        let d = ClockConfig::default();
        ClockConfig {
            control_hz: self.control_hz.unwrap_or(d.control_hz),
            physics_hz: self.physics_hz.unwrap_or(d.physics_hz),
            timeout_s: self.timeout_s.unwrap_or(d.timeout_s),
        }
    }

    fn run_options(&self) -> RunOptions {
        let mut run = RunOptions { clock: self.clock(), ..RunOptions::default() };
        if let Some(k) = self.iterations_per_step {
            run.fleet.iterations_per_step = k;
        }
        run
    }

    fn create(&self, name: &str) -> Result<BufWriter<File>> {
        std::fs::create_dir_all(&self.out_dir).with_context(|| format!("creating {}", self.out_dir.display()))?;
        let path = self.out_dir.join(name);
        Ok(BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?))
    }
}

#[derive(Subcommand)]
enum Command {
    /// Solve a static consensus QP (TOML, or JSON by extension) and write its trace.
    Solve { problem: PathBuf },
    /// Run one scenario file and write its trace.
    Scenario { spec: PathBuf },
    /// Run every conflict case under the chosen protocols.
    Benchmark {
        #[arg(long, value_enum, value_delimiter = ',', default_value = "oa-admm,reactive,timeslot")]
        protocol: Vec<ProtocolArg>,
        /// Grid fidelities for the reservation protocols.
        #[arg(long, value_enum, value_delimiter = ',', default_value = "low,high")]
        fidelity: Vec<FidelityArg>,
        #[arg(long, default_value_t = 3)]
        repetitions: usize,
    },
    /// Run the D × w grid on the four-robot crossing.
    Sweep {
        #[arg(long, value_enum, value_delimiter = ',', default_value = "adaptive,fixed")]
        mode: Vec<ModeArg>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ProtocolArg {
    OaAdmm,
    Reactive,
    Timeslot,
    None,
}

#[derive(Clone, Copy, ValueEnum)]
enum FidelityArg {
    Low,
    Medium,
    High,
}

impl From<FidelityArg> for Fidelity {
    fn from(f: FidelityArg) -> Self {
        match f {
            FidelityArg::Low => Fidelity::Low,
            FidelityArg::Medium => Fidelity::Medium,
            FidelityArg::High => Fidelity::High,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Adaptive,
    Fixed,
}

fn protocols(kinds: &[ProtocolArg], fidelities: &[FidelityArg]) -> Vec<Protocol> {
    let mut out = Vec::new();
    for kind in kinds {
        match kind {
            ProtocolArg::OaAdmm => out.push(Protocol::OaAdmm),
            ProtocolArg::None => out.push(Protocol::None),
            ProtocolArg::Reactive => {
                out.extend(fidelities.iter().map(|&f| Protocol::Reactive { fidelity: f.into() }))
            }
            ProtocolArg::Timeslot => {
                out.extend(fidelities.iter().map(|&f| Protocol::Timeslot { fidelity: f.into() }))
            }
        }
    }
    out.dedup();
    out
}

fn print_record(r: &MetricsRecord) {
    let show = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.3}"));
    println!(
        "{:<16} runs {:>3}  resolved {:>3}  violations {:>3}  timeouts {:>3}  delay {:>7}  added {:>7}  msv {:.3e}",
        r.label,
        r.runs,
        r.counts.resolved,
        r.counts.violations,
        r.counts.timeouts,
        show(r.mean_delay),
        show(r.mean_added_delay),
        r.msv
    );
}

fn solve(common: &Common, path: &Path) -> Result<()> {
    let file = StaticProblemFile::read(path)?;
    let problem = file.problem()?;
    let init = file.initial_state(&problem)?;
    let mut cfg = file.config()?;
    let trace = solve_static(&problem, init, &mut QuadraticSubsolver, &mut QuadraticSubsolver, &mut cfg)?;
    trace.write_csv(common.create("trace.csv")?)?;
    let last = trace.records.last();
    println!(
        "converged {} after {} iterations; objective {}",
        trace.converged,
        trace.records.len(),
        last.map_or(f64::NAN, |r| r.objective)
    );
    println!("x = {:?}", trace.last_state().x.as_slice());
    Ok(())
}

fn scenario(common: &Common, path: &Path) -> Result<()> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut spec = ScenarioSpec::from_toml(&text)?;
    if let Some(seed) = common.seed {
        spec.seed = seed;
    }
    let trace = run_scenario(&spec, &common.run_options())?;
    trace.write_csv(common.create(&format!("{}.csv", sanitize(&spec.name)))?)?;
    println!("{} ({}): {}", spec.name, spec.protocol.label(), Classification::of(&trace).label());
    for v in &trace.vehicles {
        let t = v.completion_time.map_or("-".into(), |t| format!("{t:.3} s"));
        println!("  vehicle {} v_ref {:.3} path {:.1} m done {t}", v.id, v.v_ref, v.path_length);
    }
    println!("  min clearance {:.3} m", trace.min_clearance());
    Ok(())
}

fn sanitize(name: &str) -> String {
    name.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}

fn benchmark(common: &Common, protocols: &[Protocol], repetitions: usize) -> Result<()> {
    let d = BenchmarkOptions::default();
    let opts = BenchmarkOptions { run: common.run_options(), repetitions, base_seed: common.seed.unwrap_or(d.base_seed) };
    let mut summaries = Vec::new();
    for &protocol in protocols {
        let start = Instant::now();
        let report = run_benchmark(protocol, &opts)?;
        let label = protocol.label();
        report.write_runs_csv(common.create(&format!("runs-{label}.csv"))?)?;
        report.write_matrix_csv(common.create(&format!("matrix-{label}.csv"))?)?;
        print_record(&report.summary);
        log::info!("{label}: {:.1} s", start.elapsed().as_secs_f64());
        summaries.push(report.summary);
    }
    write_estimate_matrix_csv(&opts.run.agent.shape, common.create("estimate.csv")?)?;
    write_summary_csv(&summaries, common.create("summary.csv")?)?;
    serde_json::to_writer_pretty(common.create("summary.json")?, &summaries)?;
    Ok(())
}

fn sweep(common: &Common, modes: &[ModeArg]) -> Result<()> {
    let mut opts = SweepOptions { clock: common.clock(), ..SweepOptions::default() };
    if let Some(k) = common.iterations_per_step {
        opts.crossing.iterations_per_step = k;
    }
    let mut summaries = Vec::new();
    for mode in modes {
        let mode = match mode {
            ModeArg::Adaptive => PenaltyMode::Adaptive,
            ModeArg::Fixed => PenaltyMode::Fixed,
        };
        let report = run_sweep(mode, &opts);
        report.write_csv(common.create(&format!("sweep-{}.csv", report.summary.label))?)?;
        print_record(&report.summary);
        summaries.push(report.summary);
    }
    write_summary_csv(&summaries, common.create("sweep-summary.csv")?)?;
    serde_json::to_writer_pretty(common.create("sweep-summary.json")?, &summaries)?;
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match &cli.command {
        Command::Solve { problem } => solve(&cli.common, problem),
        Command::Scenario { spec } => scenario(&cli.common, spec),
        Command::Benchmark { protocol, fidelity, repetitions } => {
            benchmark(&cli.common, &protocols(protocol, fidelity), *repetitions)
        }
        Command::Sweep { mode } => sweep(&cli.common, mode),
    }
}
