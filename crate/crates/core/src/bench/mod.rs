//! Benchmark metrics and runners.

mod estimate;
mod metrics;
mod runner;

pub use estimate::{estimated_delay, orthogonal_occupancy, DelayEstimate};
pub use metrics::{added_delay, msv, msv_of, Classification, Counts, MetricsRecord, SweepGrid};
pub use runner::{
    case_seed, par_map, run_benchmark, run_case, run_sweep, write_estimate_matrix_csv, write_summary_csv, BenchmarkOptions,
    BenchmarkReport, CaseRun, SweepOptions, SweepReport, SweepRun,
};
