//! Geometric estimate of the delay a yielding vehicle incurs in a
//! two-vehicle case.
//!
//! Both vehicles drive their reference paths at the nominal speed. If their
//! capsules never touch there is no conflict. Otherwise the conflict point
//! is the crossing of the two centerlines (or, for merges, the first
//! contact), the later arrival yields, and its delay is the time the
//! priority vehicle needs to clear the yielder's path: the priority
//! capsule's half-length projected on the yielder's normal plus both radii,
//! divided by the priority speed along that normal.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{capsule_clearance, segment_distance, CapsuleShape, Vec2};
use crate::sim::ScenarioSpec;

/// Crossings flatter than this are treated as merges.
const MIN_CROSSING_SIN: f64 = 0.2;
/// Contacts flatter than this have no orthogonal component at all.
const DEGENERATE_SIN: f64 = 0.05;
const SAMPLE_DT: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DelayEstimate {
    /// Estimated delay per vehicle (s); nonzero only for the yielder.
    pub per_vehicle: Vec<f64>,
    pub yielder: Option<usize>,
    /// Capsules overlap somewhere when both drive at the nominal speed.
    pub conflict: bool,
    /// A conflict without orthogonal motion; reported as zero delay.
    pub degenerate: bool,
    pub sin_angle: f64,
}

impl DelayEstimate {
    fn none(n: usize, conflict: bool, degenerate: bool) -> Self {
        Self { per_vehicle: vec![0.0; n], yielder: None, conflict, degenerate, sin_angle: 0.0 }
    }
}

/// `(l_p/2)·sinθ + r_p + r_y` over `v·sinθ`.
pub fn orthogonal_occupancy(priority: &CapsuleShape, yielder: &CapsuleShape, sin_angle: f64, speed: f64) -> f64 {
    let s = sin_angle.abs();
    (0.5 * priority.length * s + priority.radius + yielder.radius) / (speed * s)
}

fn cross(a: Vec2, b: Vec2) -> f64 {
    a.x * b.y - a.y * b.x
}

/// The estimate for a two-vehicle scenario at its nominal speed.
pub fn estimated_delay(spec: &ScenarioSpec, shape: &CapsuleShape) -> Result<DelayEstimate> {
    spec.validate()?;
    if spec.vehicles.len() != 2 {
        return Err(Error::InvalidInput("the delay estimate needs exactly two vehicles".into()));
    }
    let paths = spec.paths();
    let v = spec.v_ref;
    let horizon = paths.iter().map(|p| p.length()).fold(f64::INFINITY, f64::min) / v;
    let pose = |k: usize, t: f64| {
        let s = v * t;
        shape.posed(paths[k].point_at(s), paths[k].heading_at(s))
    };
    let steps = (horizon / SAMPLE_DT).ceil() as usize;
    let contact = (0..=steps).map(|i| i as f64 * SAMPLE_DT).find(|&t| capsule_clearance(&pose(0, t), &pose(1, t)) < 0.0);
    let Some(t_contact) = contact else {
        return Ok(DelayEstimate::none(2, false, false));
    };

    let crossing = paths[0].first_crossing(&paths[1]).and_then(|(s0, s1)| {
        let sin = cross(paths[0].tangent_at(s0), paths[1].tangent_at(s1)).abs();
        (sin >= MIN_CROSSING_SIN).then_some((s0, s1, sin))
    });
    let (yielder, sin) = match crossing {
        Some((s0, s1, sin)) => (if s0 <= s1 { 1 } else { 0 }, sin),
        None => {
            let (c0, c1) = (pose(0, t_contact), pose(1, t_contact));
            let (_, w0, w1) = segment_distance(&c0.p0, &c0.p1, &c1.p0, &c1.p1);
            let h0 = paths[0].heading_at(v * t_contact);
            let h1 = paths[1].heading_at(v * t_contact);
            let sin = (h0 - h1).sin().abs();
            if sin < DEGENERATE_SIN {
                return Ok(DelayEstimate::none(2, true, true));
            }
            // The vehicle meeting the other with its front yields.
            let ahead = |c: &crate::geometry::Capsule, w: Vec2, h: f64| (w - c.center()).dot(&Vec2::new(h.cos(), h.sin()));
            let a0 = ahead(&c0, w0, h0);
            let a1 = ahead(&c1, w1, h1);
            (if a0 > a1 { 0 } else { 1 }, sin)
        }
    };
    let mut per_vehicle = vec![0.0; 2];
    per_vehicle[yielder] = orthogonal_occupancy(shape, shape, sin, v);
    Ok(DelayEstimate { per_vehicle, yielder: Some(yielder), conflict: true, degenerate: false, sin_angle: sin })
}
