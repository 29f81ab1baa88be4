//! Reactive cell locking: a vehicle claims every cell it still has to cross
//! once the first of them enters its lookahead window, and brakes to a stop
//! before the first cell someone else holds.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::grid::{CellSpan, IntersectionGrid};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReactiveParams {
    /// Lookahead window in seconds of travel.
    pub lookahead_s: f64,
    /// Deceleration used to plan stops (m/s²).
    pub comfort_decel: f64,
    /// Proportional speed gain (1/s).
    pub speed_gain: f64,
    /// Distance kept to a contested cell when stopped (m).
    pub stop_margin: f64,
}

impl Default for ReactiveParams {
    fn default() -> Self {
        Self { lookahead_s: 1.5, comfort_decel: 3.0, speed_gain: 2.0, stop_margin: 0.3 }
    }
}

/// Who goes first among contenders: earlier predicted arrival, then lower
/// vehicle id.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PriorityTicket {
    pub vehicle: usize,
    pub arrival: f64,
}

impl Eq for PriorityTicket {}

impl Ord for PriorityTicket {
    fn cmp(&self, other: &Self) -> Ordering {
        self.arrival.total_cmp(&other.arrival).then(self.vehicle.cmp(&other.vehicle))
    }
}

impl PartialOrd for PriorityTicket {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// A path-bound vehicle as the protocols see it.
#[derive(Debug, Clone, Copy)]
pub struct PathVehicle<'a> {
    pub id: usize,
    pub s: f64,
    pub v: f64,
    pub v_ref: f64,
    pub spans: &'a [CellSpan],
}

impl PathVehicle<'_> {
    /// Spans not yet left behind.
    pub fn remaining(&self) -> impl Iterator<Item = &CellSpan> + '_ {
        self.spans.iter().filter(move |sp| sp.s_out > self.s)
    }

    pub fn lookahead(&self, params: &ReactiveParams) -> f64 {
        params.lookahead_s * self.v.max(self.v_ref)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpeedCommand {
    pub accel: f64,
    /// Arc length the vehicle is braking for, if any.
    pub stop_at: Option<f64>,
}

/// Speed tracking toward `v_ref`.
pub fn cruise(v: f64, v_ref: f64, params: &ReactiveParams) -> SpeedCommand {
    SpeedCommand { accel: params.speed_gain * (v_ref - v), stop_at: None }
}

/// Braking envelope ending at `stop_at`.
pub fn stop_before(s: f64, v: f64, v_ref: f64, stop_at: f64, params: &ReactiveParams) -> SpeedCommand {
    let d = stop_at - s;
    let allowed = (2.0 * params.comfort_decel * d.max(0.0)).sqrt();
    let accel = if d <= 0.0 {
        f64::NEG_INFINITY
    } else if v >= allowed {
        -v * v / (2.0 * d)
    } else {
        params.speed_gain * (v_ref.min(allowed) - v)
    };
    SpeedCommand { accel, stop_at: Some(stop_at) }
}

/// Releases the cells the vehicle has left, then claims or waits. Must be
/// called for contenders in ticket order.
pub fn reactive_priority_step(vehicle: &PathVehicle, grid: &mut IntersectionGrid, params: &ReactiveParams) -> SpeedCommand {
    for sp in vehicle.spans.iter().filter(|sp| sp.s_out <= vehicle.s) {
        grid.release(vehicle.id, sp.cell);
    }
    let remaining: Vec<CellSpan> = vehicle.remaining().copied().collect();
    let Some(first) = remaining.first() else {
        return cruise(vehicle.v, vehicle.v_ref, params);
    };
    if first.s_in > vehicle.s + vehicle.lookahead(params) {
        return cruise(vehicle.v, vehicle.v_ref, params);
    }
    let cells: Vec<usize> = remaining.iter().map(|sp| sp.cell).collect();
    if grid.try_claim(vehicle.id, &cells) {
        return cruise(vehicle.v, vehicle.v_ref, params);
    }
    let blocked = remaining
        .iter()
        .find(|sp| grid.owner(sp.cell).is_some_and(|o| o != vehicle.id))
        .expect("a failed claim has a contested cell");
    stop_before(vehicle.s, vehicle.v, vehicle.v_ref, blocked.s_in - params.stop_margin, params)
}
