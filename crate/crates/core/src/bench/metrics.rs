//! Run metrics and their aggregation.

use serde::{Deserialize, Serialize};

use crate::sim::WorldTrace;

/// Mean over all (tick, pair) samples of `max(0, −clearance)²`.
pub fn msv(trace: &WorldTrace) -> f64 {
    msv_of(trace.clearance_samples())
}

pub fn msv_of(samples: impl IntoIterator<Item = f64>) -> f64 {
    let (mut sum, mut n) = (0.0, 0usize);
    for c in samples {
        let p = (-c).max(0.0);
        sum += p * p;
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

pub fn added_delay(measured: f64, estimated: f64) -> f64 {
    measured - estimated
}

/// Outcome class. A run with negative clearance is a violation even if it
/// also timed out; a timeout without violation is a timeout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Resolved,
    Violation,
    Timeout,
}

impl Classification {
    pub fn of(trace: &WorldTrace) -> Self {
        if trace.has_violation() {
            Classification::Violation
        } else if trace.timed_out {
            Classification::Timeout
        } else {
            Classification::Resolved
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Classification::Resolved => "resolved",
            Classification::Violation => "violation",
            Classification::Timeout => "timeout",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Counts {
    pub resolved: usize,
    pub violations: usize,
    pub timeouts: usize,
}

impl Counts {
    pub fn add(&mut self, c: Classification) {
        match c {
            Classification::Resolved => self.resolved += 1,
            Classification::Violation => self.violations += 1,
            Classification::Timeout => self.timeouts += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.resolved + self.violations + self.timeouts
    }
}

/// Aggregate of a set of runs. Means skip runs where the quantity is
/// undefined (a vehicle that never finished has no time or delay).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub label: String,
    pub runs: usize,
    pub mean_time: Option<f64>,
    pub mean_delay: Option<f64>,
    pub mean_estimated_delay: Option<f64>,
    pub mean_added_delay: Option<f64>,
    pub min_clearance: f64,
    pub msv: f64,
    pub counts: Counts,
}

pub(crate) fn mean(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (mut sum, mut n) = (0.0, 0usize);
    for v in values {
        sum += v;
        n += 1;
    }
    (n > 0).then(|| sum / n as f64)
}

/// The tuning grid: `D ∈ {0, 0.1, …, 1}`, `w ∈ {0.25, 0.5, …, 5}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub d_values: Vec<f64>,
    pub w_values: Vec<f64>,
}

impl Default for SweepGrid {
    fn default() -> Self {
        Self {
            d_values: (0..=10).map(|k| k as f64 / 10.0).collect(),
            w_values: (1..=20).map(|k| k as f64 * 0.25).collect(),
        }
    }
}

impl SweepGrid {
    pub fn combinations(&self) -> Vec<(f64, f64)> {
        self.d_values.iter().flat_map(|&d| self.w_values.iter().map(move |&w| (d, w))).collect()
    }
}
