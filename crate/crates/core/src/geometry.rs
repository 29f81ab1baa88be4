//! Capsule collision primitive, clearance and separating halfspaces in the
//! plane.

use nalgebra::Vector2;

use crate::agent::TrajectoryPlan;
use crate::error::{Error, Result};

pub type Vec2 = Vector2<f64>;

/// Segment `p0–p1` inflated by `radius`. A zero-length capsule is a disc.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Capsule {
    pub p0: Vec2,
    pub p1: Vec2,
    pub radius: f64,
}

impl Capsule {
    pub fn new(p0: Vec2, p1: Vec2, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidInput(format!("capsule radius {radius} must be positive")));
        }
        Ok(Self { p0, p1, radius })
    }

    pub fn disc(center: Vec2, radius: f64) -> Result<Self> {
        Self::new(center, center, radius)
    }

    pub fn length(&self) -> f64 {
        (self.p1 - self.p0).norm()
    }

    pub fn center(&self) -> Vec2 {
        (self.p0 + self.p1) * 0.5
    }
}

/// Length and radius of a capsule footprint, posed at a point and heading.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CapsuleShape {
    pub length: f64,
    pub radius: f64,
}

impl CapsuleShape {
    pub const VEHICLE: CapsuleShape = CapsuleShape { length: 4.0, radius: 1.0 };
    pub const ROBOT: CapsuleShape = CapsuleShape { length: 0.0, radius: 0.5 };

    /// Segment centred at `center`, aligned with `heading`.
    pub fn posed(&self, center: Vec2, heading: f64) -> Capsule {
        let half = Vec2::new(heading.cos(), heading.sin()) * (0.5 * self.length);
        Capsule { p0: center - half, p1: center + half, radius: self.radius }
    }
}

/// `{p : normal·p ≥ offset}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Halfspace {
    pub normal: Vec2,
    pub offset: f64,
}

impl Halfspace {
    pub fn signed_distance(&self, p: &Vec2) -> f64 {
        self.normal.dot(p) - self.offset
    }

    /// True when `a` lies inside the halfspace and `b` outside it, each with
    /// its radius of margin. This implies the capsules do not overlap.
    pub fn separates(&self, a: &Capsule, b: &Capsule) -> bool {
        let a_ok = self.signed_distance(&a.p0).min(self.signed_distance(&a.p1)) >= a.radius;
        let b_ok = self.signed_distance(&b.p0).max(self.signed_distance(&b.p1)) <= -b.radius;
        a_ok && b_ok
    }
}

fn cross(a: &Vec2, b: &Vec2) -> f64 {
    a.x * b.y - a.y * b.x
}

/// Closest point on segment `a–b` to `p`.
fn closest_on_segment(p: &Vec2, a: &Vec2, b: &Vec2) -> Vec2 {
    let ab = b - a;
    let len_sq = ab.norm_squared();
    if len_sq == 0.0 {
        return *a;
    }
    let t = ((p - a).dot(&ab) / len_sq).clamp(0.0, 1.0);
    a + ab * t
}

fn segments_cross(a0: &Vec2, a1: &Vec2, b0: &Vec2, b1: &Vec2) -> bool {
    let da = a1 - a0;
    let db = b1 - b0;
    let o1 = cross(&da, &(b0 - a0));
    let o2 = cross(&da, &(b1 - a0));
    let o3 = cross(&db, &(a0 - b0));
    let o4 = cross(&db, &(a1 - b0));
    o1 * o2 < 0.0 && o3 * o4 < 0.0
}

/// Minimum distance between two segments and a pair of witness points
/// `(on_a, on_b)` realizing it.
pub fn segment_distance(a0: &Vec2, a1: &Vec2, b0: &Vec2, b1: &Vec2) -> (f64, Vec2, Vec2) {
    if segments_cross(a0, a1, b0, b1) {
        // Proper crossing: intersection point is a witness on both.
        let da = a1 - a0;
        let db = b1 - b0;
        let t = cross(&(b0 - a0), &db) / cross(&da, &db);
        let p = a0 + da * t;
        return (0.0, p, p);
    }
    // Otherwise the minimum is attained at an endpoint of one of the segments.
    let candidates = [
        (*a0, closest_on_segment(a0, b0, b1)),
        (*a1, closest_on_segment(a1, b0, b1)),
        (closest_on_segment(b0, a0, a1), *b0),
        (closest_on_segment(b1, a0, a1), *b1),
    ];
    let mut best = (f64::INFINITY, *a0, *b0);
    for (pa, pb) in candidates {
        let d = (pa - pb).norm();
        if d < best.0 {
            best = (d, pa, pb);
        }
    }
    best
}

/// Segment distance minus the two radii: non-negative means collision-free,
/// negative is the (negated) penetration depth.
pub fn capsule_clearance(a: &Capsule, b: &Capsule) -> f64 {
    segment_distance(&a.p0, &a.p1, &b.p0, &b.p1).0 - (a.radius + b.radius)
}

/// Projection interval of a capsule's centre-line onto `axis`.
fn project(c: &Capsule, axis: &Vec2) -> (f64, f64) {
    let s0 = axis.dot(&c.p0);
    let s1 = axis.dot(&c.p1);
    (s0.min(s1), s0.max(s1))
}

/// Halfspace containing `a` and excluding `b` when both are kept at their
/// radius from the boundary. The normal points from `b` towards `a`.
///
/// Separated centre-lines use the minimum-distance witness pair; crossing
/// centre-lines use the axis of least projected overlap. Coincident capsules
/// fall back to the world x-axis.
pub fn separating_halfspace(a: &Capsule, b: &Capsule) -> Halfspace {
    let (dist, wa, wb) = segment_distance(&a.p0, &a.p1, &b.p0, &b.p1);
    if dist > 1e-9 {
        let normal = (wa - wb) / dist;
        // Middle of the gap between the two inflated surfaces.
        let offset = normal.dot(&wb) + b.radius + 0.5 * (dist - a.radius - b.radius);
        return Halfspace { normal, offset };
    }

    let mut axes: Vec<Vec2> = Vec::with_capacity(3);
    for c in [a, b] {
        let d = c.p1 - c.p0;
        if d.norm() > 1e-12 {
            axes.push(Vec2::new(-d.y, d.x).normalize());
        }
    }
    let centers = a.center() - b.center();
    if centers.norm() > 1e-12 {
        axes.push(centers.normalize());
    }

    let mut best: Option<(f64, Vec2, f64)> = None;
    for axis in axes {
        // Orient from b towards a.
        let mut n = axis;
        let (amin, amax) = project(a, &n);
        let (bmin, bmax) = project(b, &n);
        if (amin + amax) < (bmin + bmax) {
            n = -n;
        }
        let (amin, _) = project(a, &n);
        let (_, bmax) = project(b, &n);
        let overlap = bmax - amin;
        if best.is_none_or(|(o, _, _)| overlap < o - 1e-12) {
            best = Some((overlap, n, 0.5 * (amin + bmax)));
        }
    }
    match best {
        Some((_, normal, offset)) => Halfspace { normal, offset },
        None => {
            let normal = Vec2::new(1.0, 0.0);
            Halfspace { normal, offset: normal.dot(&((a.center() + b.center()) * 0.5)) }
        }
    }
}

/// Clearance between two plans, capsule posed at every horizon step.
pub fn clearance_along_plans(
    plan_i: &TrajectoryPlan,
    plan_j: &TrajectoryPlan,
    shape_i: &CapsuleShape,
    shape_j: &CapsuleShape,
) -> Result<Vec<f64>> {
    if plan_i.horizon() != plan_j.horizon() {
        return Err(Error::InvalidInput(format!(
            "horizon mismatch: {} vs {}",
            plan_i.horizon(),
            plan_j.horizon()
        )));
    }
    Ok((0..plan_i.horizon())
        .map(|k| {
            let (pi, hi) = plan_i.pose(k);
            let (pj, hj) = plan_j.pose(k);
            capsule_clearance(&shape_i.posed(pi, hi), &shape_j.posed(pj, hj))
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::{StateLayout, TrajectoryPlan};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn v(x: f64, y: f64) -> Vec2 {
        Vec2::new(x, y)
    }

    /// Minimum over a uniform parameter grid on both segments.
    fn sampled_clearance(a: &Capsule, b: &Capsule, n: usize) -> f64 {
        let pa: Vec<Vec2> = (0..=n).map(|i| a.p0 + (a.p1 - a.p0) * (i as f64 / n as f64)).collect();
        let pb: Vec<Vec2> = (0..=n).map(|i| b.p0 + (b.p1 - b.p0) * (i as f64 / n as f64)).collect();
        let mut best = f64::INFINITY;
        for p in &pa {
            for q in &pb {
                best = best.min((p - q).norm_squared());
            }
        }
        best.sqrt() - a.radius - b.radius
    }

    fn random_capsule(rng: &mut ChaCha8Rng) -> Capsule {
        let c = v(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
        let h = rng.random_range(-3.2..3.2);
        let shape = CapsuleShape { length: rng.random_range(0.0..3.0), radius: rng.random_range(0.1..1.0) };
        shape.posed(c, h)
    }

    #[test]
    fn point_capsules() {
        let a = Capsule::disc(v(0.0, 0.0), 1.0).unwrap();
        let b = Capsule::disc(v(3.0, 0.0), 1.0).unwrap();
        assert_eq!(capsule_clearance(&a, &b), 1.0);
    }

    #[test]
    fn identical_capsules_penetrate_by_two_radii() {
        let a = CapsuleShape::VEHICLE.posed(v(1.0, 2.0), 0.3);
        assert_eq!(capsule_clearance(&a, &a), -2.0);
    }

    #[test]
    fn invalid_radius_rejected() {
        assert!(Capsule::new(v(0.0, 0.0), v(1.0, 0.0), 0.0).is_err());
    }

    #[test]
    fn clearance_matches_dense_sampling() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let a = random_capsule(&mut rng);
            let b = random_capsule(&mut rng);
            let exact = capsule_clearance(&a, &b);
            let sampled = sampled_clearance(&a, &b, 1000);
            assert!(sampled >= exact - 1e-12);
            assert!((exact - sampled).abs() < 1e-3, "{a:?} {b:?}: {exact} vs {sampled}");
        }
    }

    #[test]
    fn disc_halfspace_is_bisector() {
        let a = Capsule::disc(v(0.0, 0.0), 1.0).unwrap();
        let b = Capsule::disc(v(4.0, 0.0), 1.0).unwrap();
        let h = separating_halfspace(&a, &b);
        assert_eq!(h.normal, v(-1.0, 0.0));
        assert_eq!(h.offset, -2.0);
        assert!(h.separates(&a, &b));
    }

    #[test]
    fn overlapping_discs_use_center_axis() {
        let a = Capsule::disc(v(0.0, 1.0), 1.0).unwrap();
        let b = Capsule::disc(v(0.0, 0.0), 1.0).unwrap();
        let h = separating_halfspace(&a, &b);
        assert!((h.normal - v(0.0, 1.0)).norm() < 1e-12);
        assert!((h.offset - 0.5).abs() < 1e-12);
    }

    #[test]
    fn crossing_segments_pick_smallest_overlap() {
        let a = Capsule::new(v(-2.0, 0.2), v(2.0, 0.2), 0.5).unwrap();
        let b = Capsule::new(v(0.0, -2.0), v(0.0, 2.0), 0.5).unwrap();
        let h = separating_halfspace(&a, &b);
        assert!((h.normal.norm() - 1.0).abs() < 1e-12);
        // Horizontal vs vertical separation both need ~4 m of travel; either
        // way the normal is axis aligned.
        assert!(h.normal.x.abs() < 1e-12 || h.normal.y.abs() < 1e-12);
    }

    #[test]
    fn coincident_capsules_fall_back_to_x_axis() {
        let a = Capsule::disc(v(1.0, 1.0), 0.5).unwrap();
        let h = separating_halfspace(&a, &a);
        assert_eq!(h.normal, v(1.0, 0.0));
        assert_eq!(h.offset, 1.0);
    }

    #[test]
    fn separation_implies_clearance_monte_carlo() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut checked = 0;
        while checked < 10_000 {
            let a = random_capsule(&mut rng);
            let b = random_capsule(&mut rng);
            let h = separating_halfspace(&a, &b);
            assert!((h.normal.norm() - 1.0).abs() < 1e-12);
            // Perturb both and keep the pairs that satisfy the halfspace.
            let shift = v(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let a2 = Capsule { p0: a.p0 + shift, p1: a.p1 + shift, ..a };
            if h.separates(&a2, &b) {
                assert!(capsule_clearance(&a2, &b) >= -1e-9);
                checked += 1;
            }
            if h.separates(&a, &b) {
                assert!(capsule_clearance(&a, &b) >= -1e-9);
            }
        }
    }

    fn straight_plan(y: f64, x0: f64, speed: f64, n: usize) -> TrajectoryPlan {
        let dt = 0.1;
        let mut data = Vec::new();
        for k in 0..n {
            data.extend_from_slice(&[x0 + speed * dt * (k + 1) as f64, y, 0.0, speed, 0.0, 0.0]);
        }
        TrajectoryPlan::new(StateLayout::Bicycle, data, dt).unwrap()
    }

    #[test]
    fn clearance_along_parallel_plans() {
        let a = straight_plan(0.0, 0.0, 4.0, 10);
        let b = straight_plan(10.0, 0.0, 4.0, 10);
        let c = clearance_along_plans(&a, &b, &CapsuleShape::VEHICLE, &CapsuleShape::VEHICLE).unwrap();
        for (k, value) in c.iter().enumerate() {
            let (pa, ha) = a.pose(k);
            let (pb, hb) = b.pose(k);
            let single = capsule_clearance(&CapsuleShape::VEHICLE.posed(pa, ha), &CapsuleShape::VEHICLE.posed(pb, hb));
            assert_eq!(*value, single);
            assert!((value - 8.0).abs() < 1e-12);
        }
    }

    #[test]
    fn identical_plans_penetrate() {
        let a = straight_plan(0.0, 0.0, 4.0, 5);
        let c = clearance_along_plans(&a, &a, &CapsuleShape::VEHICLE, &CapsuleShape::VEHICLE).unwrap();
        assert!(c.iter().all(|v| *v == -2.0));
    }

    #[test]
    fn diverging_plans_have_monotone_clearance() {
        let a = straight_plan(0.0, 0.0, 4.0, 20);
        let dt = 0.1;
        let mut data = Vec::new();
        for k in 0..20 {
            let t = dt * (k + 1) as f64;
            data.extend_from_slice(&[4.0 * t, 1.0 + 3.0 * t, 0.6435, 5.0, 0.0, 0.0]);
        }
        let b = TrajectoryPlan::new(StateLayout::Bicycle, data, dt).unwrap();
        let c = clearance_along_plans(&a, &b, &CapsuleShape::VEHICLE, &CapsuleShape::VEHICLE).unwrap();
        assert!(c.windows(2).all(|w| w[1] >= w[0]), "{c:?}");
    }

    #[test]
    fn horizon_mismatch_rejected() {
        let a = straight_plan(0.0, 0.0, 4.0, 5);
        let b = straight_plan(0.0, 0.0, 4.0, 6);
        assert!(clearance_along_plans(&a, &b, &CapsuleShape::VEHICLE, &CapsuleShape::VEHICLE).is_err());
    }

    proptest! {
        #[test]
        fn clearance_symmetric_and_rigid_invariant(
            ax in -5.0..5.0f64, ay in -5.0..5.0f64, ah in -3.2..3.2f64, al in 0.0..4.0f64, ar in 0.1..1.5f64,
            bx in -5.0..5.0f64, by in -5.0..5.0f64, bh in -3.2..3.2f64, bl in 0.0..4.0f64, br in 0.1..1.5f64,
            tx in -50.0..50.0f64, ty in -50.0..50.0f64, rot in -3.2..3.2f64,
        ) {
            let a = CapsuleShape { length: al, radius: ar }.posed(v(ax, ay), ah);
            let b = CapsuleShape { length: bl, radius: br }.posed(v(bx, by), bh);
            prop_assert_eq!(capsule_clearance(&a, &b), capsule_clearance(&b, &a));
            let (s, c) = rot.sin_cos();
            let tf = |p: Vec2| v(c * p.x - s * p.y + tx, s * p.x + c * p.y + ty);
            let a2 = Capsule { p0: tf(a.p0), p1: tf(a.p1), ..a };
            let b2 = Capsule { p0: tf(b.p0), p1: tf(b.p1), ..b };
            prop_assert!((capsule_clearance(&a, &b) - capsule_clearance(&a2, &b2)).abs() < 1e-9);
        }
    }
}
