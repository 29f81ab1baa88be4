//! Intersection layout, reference paths and scenario descriptions.

use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::Fidelity;
use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::path::{PathSegment, ReferencePath};

/// Approach arm, named by where the vehicle comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arm {
    South,
    East,
    North,
    West,
}

impl Arm {
    /// Rotation taking the south arm onto this one.
    fn rotation(self) -> f64 {
        match self {
            Arm::South => 0.0,
            Arm::East => FRAC_PI_2,
            Arm::North => PI,
            Arm::West => -FRAC_PI_2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Maneuver {
    Left,
    Forward,
    Right,
}

impl Maneuver {
    pub const ALL: [Maneuver; 3] = [Maneuver::Left, Maneuver::Forward, Maneuver::Right];

    pub fn letter(self) -> char {
        match self {
            Maneuver::Left => 'L',
            Maneuver::Forward => 'F',
            Maneuver::Right => 'R',
        }
    }
}

/// Arm of the other vehicle as seen by the ego vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelativeArm {
    Left,
    Front,
    Right,
}

impl RelativeArm {
    pub const ALL: [RelativeArm; 3] = [RelativeArm::Left, RelativeArm::Front, RelativeArm::Right];

    pub fn letter(self) -> char {
        match self {
            RelativeArm::Left => 'L',
            RelativeArm::Front => 'F',
            RelativeArm::Right => 'R',
        }
    }

    /// Absolute arm when the ego comes from the south (heading north).
    pub fn arm(self) -> Arm {
        match self {
            RelativeArm::Left => Arm::West,
            RelativeArm::Front => Arm::North,
            RelativeArm::Right => Arm::East,
        }
    }
}

/// Single-lane, four-arm intersection with right-hand traffic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntersectionGeometry {
    /// Distance from the centre to where turning arcs begin (m).
    pub half_width: f64,
    pub lane_width: f64,
    pub spawn_distance: f64,
    pub finish_distance: f64,
}

impl Default for IntersectionGeometry {
    fn default() -> Self {
        Self { half_width: 7.0, lane_width: 3.5, spawn_distance: 30.0, finish_distance: 15.0 }
    }
}

impl IntersectionGeometry {
    pub fn validate(&self) -> Result<()> {
        let off = self.lane_width / 2.0;
        let ok = self.lane_width > 0.0
            && self.half_width > off
            && self.spawn_distance > self.half_width
            && self.finish_distance > self.half_width;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("inconsistent intersection geometry {self:?}")))
        }
    }

    /// Path of a vehicle entering from `arm`, from spawn to the finish line.
    pub fn reference_path(&self, arm: Arm, maneuver: Maneuver) -> ReferencePath {
        let off = self.lane_width / 2.0;
        let hw = self.half_width;
        let v = Vec2::new;
        let entry = PathSegment::Line { start: v(off, -self.spawn_distance), end: v(off, -hw) };
        let segments = match maneuver {
            Maneuver::Forward => {
                vec![PathSegment::Line { start: v(off, -self.spawn_distance), end: v(off, self.finish_distance) }]
            }
            Maneuver::Right => {
                let r = hw - off;
                vec![
                    entry,
                    PathSegment::Arc { center: v(hw, -hw), radius: r, start_angle: PI, sweep: -FRAC_PI_2 },
                    PathSegment::Line { start: v(hw, -off), end: v(self.finish_distance, -off) },
                ]
            }
            Maneuver::Left => {
                let r = hw + off;
                vec![
                    entry,
                    PathSegment::Arc { center: v(-hw, -hw), radius: r, start_angle: 0.0, sweep: FRAC_PI_2 },
                    PathSegment::Line { start: v(-hw, off), end: v(-self.finish_distance, off) },
                ]
            }
        };
        let rot = arm.rotation();
        let (s, c) = rot.sin_cos();
        let turn = |p: Vec2| Vec2::new(c * p.x - s * p.y, s * p.x + c * p.y);
        ReferencePath::new(
            segments
                .into_iter()
                .map(|seg| match seg {
                    PathSegment::Line { start, end } => PathSegment::Line { start: turn(start), end: turn(end) },
                    PathSegment::Arc { center, radius, start_angle, sweep } => {
                        PathSegment::Arc { center: turn(center), radius, start_angle: start_angle + rot, sweep }
                    }
                })
                .collect(),
        )
    }
}

/// Conflict-resolution protocol driving the vehicles of a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Protocol {
    OaAdmm,
    /// Reactive grid-reservation analogue.
    Reactive { fidelity: Fidelity },
    /// Predictive time-slot reservation analogue.
    Timeslot { fidelity: Fidelity },
    /// Vehicles ignore each other.
    None,
}

impl Protocol {
    pub fn label(&self) -> String {
        match self {
            Protocol::OaAdmm => "oa-admm".into(),
            Protocol::Reactive { fidelity } => format!("reactive-{}", fidelity.label()),
            Protocol::Timeslot { fidelity } => format!("timeslot-{}", fidelity.label()),
            Protocol::None => "none".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleSpec {
    pub arm: Arm,
    pub maneuver: Maneuver,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub name: String,
    #[serde(default)]
    pub geometry: IntersectionGeometry,
    pub vehicles: Vec<VehicleSpec>,
    #[serde(default = "default_v_ref")]
    pub v_ref: f64,
    #[serde(default = "default_v_perturbation")]
    pub v_perturbation: f64,
    #[serde(default)]
    pub seed: u64,
    pub protocol: Protocol,
}

fn default_v_ref() -> f64 {
    4.0
}

fn default_v_perturbation() -> f64 {
    0.15
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        if self.vehicles.is_empty() || self.vehicles.len() > 8 {
            return Err(Error::InvalidInput(format!("{} vehicles; 1 to 8 supported", self.vehicles.len())));
        }
        if !(self.v_ref > 0.0) || !(self.v_perturbation >= 0.0) || self.v_perturbation >= self.v_ref {
            return Err(Error::InvalidInput("reference speed must exceed its perturbation".into()));
        }
        Ok(())
    }

    /// Per-vehicle reference speeds. Depend only on the seed and the
    /// vehicle count, so every protocol sees the same draws.
    pub fn reference_speeds(&self) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        self.vehicles
            .iter()
            .map(|_| {
                let u: f64 = rng.random_range(-1.0..=1.0);
                self.v_ref + self.v_perturbation * u
            })
            .collect()
    }

    pub fn paths(&self) -> Vec<Arc<ReferencePath>> {
        self.vehicles.iter().map(|v| Arc::new(self.geometry.reference_path(v.arm, v.maneuver))).collect()
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: Self = toml::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::InvalidInput(e.to_string()))
    }
}

/// One two-vehicle benchmark case: ego from the south, other vehicle on
/// `relative_arm`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ConflictCase {
    pub relative_arm: RelativeArm,
    pub ego: Maneuver,
    pub other: Maneuver,
}

impl ConflictCase {
    /// `row:ego,other`, e.g. `L:F,R`.
    pub fn label(&self) -> String {
        format!("{}:{},{}", self.relative_arm.letter(), self.ego.letter(), self.other.letter())
    }

    pub fn column(&self) -> String {
        format!("{},{}", self.ego.letter(), self.other.letter())
    }

    pub fn vehicles(&self) -> Vec<VehicleSpec> {
        vec![
            VehicleSpec { arm: Arm::South, maneuver: self.ego },
            VehicleSpec { arm: self.relative_arm.arm(), maneuver: self.other },
        ]
    }

    pub fn scenario(&self, protocol: Protocol, seed: u64) -> ScenarioSpec {
        ScenarioSpec {
            name: self.label(),
            geometry: IntersectionGeometry::default(),
            vehicles: self.vehicles(),
            v_ref: default_v_ref(),
            v_perturbation: default_v_perturbation(),
            seed,
            protocol,
        }
    }
}

/// All 27 (relative arm × ego maneuver × other maneuver) cases, row-major
/// in arm then ego then other. The same-arm follower case is not part of
/// the set since the other vehicle never shares the ego's arm.
pub fn enumerate_conflict_cases() -> Vec<ConflictCase> {
    let mut out = Vec::with_capacity(27);
    for relative_arm in RelativeArm::ALL {
        for ego in Maneuver::ALL {
            for other in Maneuver::ALL {
                out.push(ConflictCase { relative_arm, ego, other });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twenty_seven_cases_without_followers() {
        let cases = enumerate_conflict_cases();
        assert_eq!(cases.len(), 27);
        assert!(cases.iter().all(|c| c.vehicles()[0].arm != c.vehicles()[1].arm));
        let probe = ConflictCase { relative_arm: RelativeArm::Right, ego: Maneuver::Left, other: Maneuver::Right };
        assert!(cases.contains(&probe));
        assert_eq!(probe.label(), "R:L,R");
    }

    #[test]
    fn paths_start_and_end_where_expected() {
        let g = IntersectionGeometry::default();
        let right = g.reference_path(Arm::South, Maneuver::Right);
        assert!((right.point_at(0.0) - Vec2::new(1.75, -30.0)).norm() < 1e-12);
        assert!((right.point_at(right.length()) - Vec2::new(15.0, -1.75)).norm() < 1e-9);
        let left = g.reference_path(Arm::South, Maneuver::Left);
        assert!((left.point_at(left.length()) - Vec2::new(-15.0, 1.75)).norm() < 1e-9);
        assert!((left.heading_at(left.length()) - PI).abs() < 1e-9);
        // Rotated arms: from the east, heading west on the northern lane.
        let east = g.reference_path(Arm::East, Maneuver::Forward);
        assert!((east.point_at(0.0) - Vec2::new(30.0, 1.75)).norm() < 1e-9);
        assert!((east.point_at(east.length()) - Vec2::new(-15.0, 1.75)).norm() < 1e-9);
        let west_left = g.reference_path(Arm::West, Maneuver::Left);
        assert!((west_left.point_at(west_left.length()) - Vec2::new(1.75, 15.0)).norm() < 1e-9);
    }

    #[test]
    fn speeds_depend_only_on_seed() {
        let case = enumerate_conflict_cases()[4];
        let a = case.scenario(Protocol::OaAdmm, 11).reference_speeds();
        let b = case.scenario(Protocol::Timeslot { fidelity: Fidelity::High }, 11).reference_speeds();
        assert_eq!(a, b);
        assert!(a.iter().all(|v| (v - 4.0).abs() <= 0.15));
        assert_ne!(a, case.scenario(Protocol::OaAdmm, 12).reference_speeds());
    }

    #[test]
    fn toml_round_trip() {
        let spec = enumerate_conflict_cases()[0].scenario(Protocol::Reactive { fidelity: Fidelity::Low }, 3);
        let text = spec.to_toml().unwrap();
        assert_eq!(ScenarioSpec::from_toml(&text).unwrap(), spec);
    }
}
