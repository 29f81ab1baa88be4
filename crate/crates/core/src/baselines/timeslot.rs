//! Predictive time-slot reservation: a vehicle picks the earliest delay at
//! which every cell it crosses is free, books the slots and shapes its speed
//! so that it arrives on time instead of waiting at the cell edge.

use serde::{Deserialize, Serialize};

use super::grid::{IntersectionGrid, Reservation};
use super::reactive::PathVehicle;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeslotParams {
    /// Guard time added on both sides of every slot (s).
    pub buffer: f64,
    /// Acceleration magnitude of the profile ramps (m/s²).
    pub ramp: f64,
    /// Resolution of the delay search (s).
    pub delay_step: f64,
    pub max_delay: f64,
    /// Vehicles plan once their first cell is this close (m).
    pub planning_distance: f64,
    pub kp: f64,
    pub kd: f64,
}

impl Default for TimeslotParams {
    fn default() -> Self {
        Self { buffer: 0.2, ramp: 2.0, delay_step: 0.05, max_delay: 30.0, planning_distance: 25.0, kp: 1.0, kd: 2.0 }
    }
}

/// Piecewise constant-acceleration speed profile starting at `(t0, s0, v0)`;
/// after the last phase the speed stays constant.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpeedProfile {
    pub t0: f64,
    pub s0: f64,
    pub v0: f64,
    /// `(duration, acceleration)` pairs.
    pub phases: Vec<(f64, f64)>,
}

impl SpeedProfile {
    /// Arc length, speed and acceleration at time `t`.
    pub fn eval(&self, t: f64) -> (f64, f64, f64) {
        let (mut s, mut v) = (self.s0, self.v0);
        let mut rest = (t - self.t0).max(0.0);
        for &(d, a) in &self.phases {
            if rest < d {
                return (s + v * rest + 0.5 * a * rest * rest, v + a * rest, a);
            }
            s += v * d + 0.5 * a * d * d;
            v += a * d;
            rest -= d;
        }
        (s + v * rest, v, 0.0)
    }

    /// Earliest time the profile reaches `target`; infinite if never.
    pub fn time_at(&self, target: f64) -> f64 {
        let (mut s, mut v, mut t) = (self.s0, self.v0, self.t0);
        if target <= s {
            return t;
        }
        for &(d, a) in &self.phases {
            let end = s + v * d + 0.5 * a * d * d;
            if end >= target {
                let gap = target - s;
                let tau = if a.abs() < 1e-12 {
                    gap / v
                } else {
                    (-v + (v * v + 2.0 * a * gap).max(0.0).sqrt()) / a
                };
                return t + tau;
            }
            s = end;
            v += a * d;
            t += d;
        }
        if v > 0.0 {
            t + (target - s) / v
        } else {
            f64::INFINITY
        }
    }

    pub fn final_speed(&self) -> f64 {
        self.phases.iter().fold(self.v0, |v, (d, a)| v + a * d)
    }

    /// Change speed to `v_low`, hold it for `hold`, then ramp to `v_top`.
    fn slowdown(t0: f64, s0: f64, v0: f64, v_low: f64, hold: f64, v_top: f64, ramp: f64) -> Self {
        let mut phases = Vec::new();
        let dv = v_low - v0;
        if dv.abs() > 1e-12 {
            phases.push((dv.abs() / ramp, ramp * dv.signum()));
        }
        if hold > 0.0 {
            phases.push((hold, 0.0));
        }
        if v_top > v_low {
            phases.push(((v_top - v_low) / ramp, ramp));
        }
        Self { t0, s0, v0, phases }
    }
}

/// The profile reaching `v_top` quickest, delayed by `delay` at `s_mark`.
fn delayed_profile(vehicle: &PathVehicle, t: f64, s_mark: f64, delay: f64, params: &TimeslotParams) -> SpeedProfile {
    let (v0, top, ramp) = (vehicle.v, vehicle.v_ref, params.ramp);
    let fast = SpeedProfile::slowdown(t, vehicle.s, v0, v0.min(top), 0.0, top, ramp);
    if delay <= 0.0 {
        return fast;
    }
    let target = fast.time_at(s_mark) + delay;
    let stop = SpeedProfile::slowdown(t, vehicle.s, v0, 0.0, 0.0, top, ramp);
    let at_stop = stop.time_at(s_mark);
    if at_stop <= target {
        return SpeedProfile::slowdown(t, vehicle.s, v0, 0.0, target - at_stop, top, ramp);
    }
    // Arrival time falls as the lowest speed rises; bisect on it.
    let (mut lo, mut hi) = (0.0, v0.min(top));
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if SpeedProfile::slowdown(t, vehicle.s, v0, mid, 0.0, top, ramp).time_at(s_mark) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    SpeedProfile::slowdown(t, vehicle.s, v0, hi, 0.0, top, ramp)
}

fn slots(vehicle: &PathVehicle, profile: &SpeedProfile, params: &TimeslotParams) -> Vec<(usize, Reservation)> {
    vehicle
        .remaining()
        .map(|sp| {
            let entry = profile.time_at(sp.s_in) - params.buffer;
            let exit = profile.time_at(sp.s_out) + params.buffer;
            (sp.cell, Reservation { vehicle: vehicle.id, entry, exit })
        })
        .collect()
}

/// Searches the smallest delay whose slots are all free, books them and
/// returns the profile. `None` when no delay up to the limit works; the
/// caller then falls back to the reactive rule for this tick.
pub fn timeslot_plan_step(
    vehicle: &PathVehicle,
    t: f64,
    grid: &mut IntersectionGrid,
    params: &TimeslotParams,
) -> Option<SpeedProfile> {
    let Some(first) = vehicle.remaining().next() else {
        return Some(delayed_profile(vehicle, t, vehicle.s, 0.0, params));
    };
    let mark = first.s_in.max(vehicle.s);
    let steps = (params.max_delay / params.delay_step).round() as usize;
    for k in 0..=steps {
        let profile = delayed_profile(vehicle, t, mark, k as f64 * params.delay_step, params);
        let booked = slots(vehicle, &profile, params);
        if booked.iter().all(|(c, r)| r.exit.is_finite() && grid.slot_free(*c, r.entry, r.exit, vehicle.id)) {
            for (c, r) in booked {
                grid.reserve(c, r).expect("checked free");
            }
            return Some(profile);
        }
    }
    None
}

/// Feedforward plus PD tracking of a profile.
pub fn track_profile(profile: &SpeedProfile, t: f64, s: f64, v: f64, params: &TimeslotParams) -> f64 {
    let (s_ref, v_ref, a_ref) = profile.eval(t);
    a_ref + params.kp * (s_ref - s) + params.kd * (v_ref - v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::{CellSpan, Fidelity};
    use crate::geometry::{CapsuleShape, Vec2};
    use crate::path::ReferencePath;

    fn spans(grid: &IntersectionGrid) -> Vec<CellSpan> {
        let path = ReferencePath::line(Vec2::new(1.75, -30.0), Vec2::new(1.75, 15.0));
        grid.path_spans(&path, &CapsuleShape::VEHICLE)
    }

    #[test]
    fn profile_time_and_position_agree() {
        let p = SpeedProfile::slowdown(1.0, 2.0, 4.0, 1.0, 0.5, 4.0, 2.0);
        for k in 0..200 {
            let t = 1.0 + k as f64 * 0.05;
            let (s, v, _) = p.eval(t);
            assert!(v >= 0.0);
            if v > 1e-9 {
                assert!((p.time_at(s) - t).abs() < 1e-9);
            }
        }
        assert!((p.final_speed() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn empty_grid_gives_constant_reference_speed() {
        let mut grid = IntersectionGrid::new(Fidelity::High);
        let sp = spans(&grid);
        let v = PathVehicle { id: 0, s: 0.0, v: 4.0, v_ref: 4.0, spans: &sp };
        let p = timeslot_plan_step(&v, 0.0, &mut grid, &TimeslotParams::default()).unwrap();
        assert!(p.phases.is_empty());
        assert_eq!(p.eval(3.0), (12.0, 4.0, 0.0));
    }

    #[test]
    fn conflicting_slot_slows_early() {
        let mut grid = IntersectionGrid::new(Fidelity::High);
        let sp = spans(&grid);
        let params = TimeslotParams::default();
        let mid = sp[sp.len() / 2];
        let nominal_entry = mid.s_in / 4.0;
        grid.reserve(mid.cell, Reservation { vehicle: 9, entry: nominal_entry - 1.0, exit: nominal_entry + 1.0 })
            .unwrap();
        let v = PathVehicle { id: 0, s: 0.0, v: 4.0, v_ref: 4.0, spans: &sp };
        let p = timeslot_plan_step(&v, 0.0, &mut grid, &params).unwrap();
        // Slowdown starts right away, far from the grid edge.
        assert!(p.eval(0.5).1 < 4.0);
        let (s_first, _, _) = p.eval(p.phases.iter().map(|x| x.0).sum());
        assert!(s_first < sp[0].s_in, "still slowing at the grid edge");
        assert!(p.time_at(mid.s_in) - params.buffer >= nominal_entry + 1.0 - 1e-9);
        // Never stopped.
        assert!((0..400).all(|k| p.eval(k as f64 * 0.05).1 > 0.0));
    }

    #[test]
    fn paths_sharing_no_cells_are_not_slowed() {
        // A northbound lane hugging the east edge and an eastbound path
        // ending short of it: one shared 4×4 cell, no shared 8×8 cell.
        let east = ReferencePath::line(Vec2::new(-30.0, 7.9), Vec2::new(2.5, 7.9));
        let north = ReferencePath::line(Vec2::new(7.9, -30.0), Vec2::new(7.9, 15.0));
        for (fid, expect_slow) in [(Fidelity::High, false), (Fidelity::Medium, true)] {
            let mut grid = IntersectionGrid::new(fid);
            let a = grid.path_spans(&east, &CapsuleShape::VEHICLE);
            let b = grid.path_spans(&north, &CapsuleShape::VEHICLE);
            let shared = a.iter().any(|x| b.iter().any(|y| x.cell == y.cell));
            let params = TimeslotParams::default();
            let pa = PathVehicle { id: 0, s: 0.0, v: 4.0, v_ref: 4.0, spans: &a };
            timeslot_plan_step(&pa, 0.0, &mut grid, &params).unwrap();
            let pb = PathVehicle { id: 1, s: 0.0, v: 4.0, v_ref: 4.0, spans: &b };
            let prof = timeslot_plan_step(&pb, 0.0, &mut grid, &params).unwrap();
            assert_eq!(shared, expect_slow);
            assert_eq!(!prof.phases.is_empty(), expect_slow, "{fid:?}");
        }
    }
}
