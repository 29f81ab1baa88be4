//! Reference paths built from straight segments and circular arcs.

use std::f64::consts::PI;

use crate::geometry::Vec2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PathSegment {
    Line { start: Vec2, end: Vec2 },
    /// Arc around `center`; `sweep` is signed (positive is counter-clockwise).
    Arc { center: Vec2, radius: f64, start_angle: f64, sweep: f64 },
}

impl PathSegment {
    pub fn length(&self) -> f64 {
        match self {
            PathSegment::Line { start, end } => (end - start).norm(),
            PathSegment::Arc { radius, sweep, .. } => radius * sweep.abs(),
        }
    }

    fn point_at(&self, s: f64) -> Vec2 {
        match *self {
            PathSegment::Line { start, end } => {
                let len = (end - start).norm();
                start + (end - start) * (s / len)
            }
            PathSegment::Arc { center, radius, start_angle, sweep } => {
                let ang = start_angle + sweep.signum() * s / radius;
                center + Vec2::new(ang.cos(), ang.sin()) * radius
            }
        }
    }

    fn tangent_at(&self, s: f64) -> Vec2 {
        match *self {
            PathSegment::Line { start, end } => (end - start).normalize(),
            PathSegment::Arc { radius, start_angle, sweep, .. } => {
                let ang = start_angle + sweep.signum() * s / radius;
                Vec2::new(-ang.sin(), ang.cos()) * sweep.signum()
            }
        }
    }

    /// Closest point as arc length along this segment, unclamped for lines
    /// so the first and last segments extend indefinitely.
    fn project(&self, p: &Vec2, extend_back: bool, extend_forward: bool) -> f64 {
        match *self {
            PathSegment::Line { start, end } => {
                let d = end - start;
                let len = d.norm();
                let s = (p - start).dot(&d) / len;
                let lo = if extend_back { f64::NEG_INFINITY } else { 0.0 };
                let hi = if extend_forward { f64::INFINITY } else { len };
                s.clamp(lo, hi)
            }
            PathSegment::Arc { center, radius, start_angle, sweep } => {
                let rel = p - center;
                if rel.norm() < 1e-12 {
                    return 0.0;
                }
                let ang = rel.y.atan2(rel.x);
                let mut delta = (ang - start_angle) * sweep.signum();
                delta = delta.rem_euclid(2.0 * PI);
                let span = sweep.abs();
                if delta > span {
                    // Outside the swept range: snap to the nearer end.
                    if delta - span < 2.0 * PI - delta {
                        delta = span;
                    } else {
                        delta = 0.0;
                    }
                }
                delta * radius
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    /// Arc length of the closest point (may be negative or exceed the
    /// length, on the extended end segments).
    pub s: f64,
    pub point: Vec2,
    pub tangent: Vec2,
    /// Signed distance, positive to the left of the direction of travel.
    pub lateral: f64,
    /// Gradient of the path heading at `point` with respect to the query
    /// point; zero on lines and at clamped arc ends.
    pub heading_rate: Vec2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferencePath {
    segments: Vec<PathSegment>,
    starts: Vec<f64>,
    length: f64,
}

impl ReferencePath {
    pub fn new(segments: Vec<PathSegment>) -> Self {
        assert!(!segments.is_empty(), "path needs at least one segment");
        let mut starts = Vec::with_capacity(segments.len());
        let mut acc = 0.0;
        for seg in &segments {
            starts.push(acc);
            acc += seg.length();
        }
        Self { segments, starts, length: acc }
    }

    pub fn line(start: Vec2, end: Vec2) -> Self {
        Self::new(vec![PathSegment::Line { start, end }])
    }

    pub fn segments(&self) -> &[PathSegment] {
        &self.segments
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    fn locate(&self, s: f64) -> (usize, f64) {
        let idx = self.starts.iter().rposition(|st| *st <= s).unwrap_or_default();
        (idx, s - self.starts[idx])
    }

    /// Point at arc length `s`; beyond either end the end segments are
    /// extended as straight lines.
    pub fn point_at(&self, s: f64) -> Vec2 {
        if s < 0.0 {
            let t = self.tangent_at(0.0);
            return self.segments[0].point_at(0.0) + t * s;
        }
        if s > self.length {
            let last = self.segments.len() - 1;
            let seg = &self.segments[last];
            let t = seg.tangent_at(seg.length());
            return seg.point_at(seg.length()) + t * (s - self.length);
        }
        let (i, local) = self.locate(s);
        self.segments[i].point_at(local.min(self.segments[i].length()))
    }

    pub fn tangent_at(&self, s: f64) -> Vec2 {
        let s = s.clamp(0.0, self.length);
        let (i, local) = self.locate(s);
        self.segments[i].tangent_at(local.min(self.segments[i].length()))
    }

    pub fn heading_at(&self, s: f64) -> f64 {
        let t = self.tangent_at(s);
        t.y.atan2(t.x)
    }

    pub fn project(&self, p: &Vec2) -> Projection {
        let last = self.segments.len() - 1;
        let mut best: Option<(f64, Projection)> = None;
        for (i, seg) in self.segments.iter().enumerate() {
            let local = seg.project(p, i == 0, i == last);
            let (point, tangent) = if local < 0.0 {
                let t = seg.tangent_at(0.0);
                (seg.point_at(0.0) + t * local, t)
            } else if local > seg.length() {
                let t = seg.tangent_at(seg.length());
                (seg.point_at(seg.length()) + t * (local - seg.length()), t)
            } else {
                (seg.point_at(local), seg.tangent_at(local))
            };
            let rel = p - point;
            let dist = rel.norm();
            if best.as_ref().is_none_or(|(d, _)| dist < *d) {
                let lateral = tangent.x * rel.y - tangent.y * rel.x;
                let heading_rate = match *seg {
                    PathSegment::Arc { center, .. } if local > 0.0 && local < seg.length() => {
                        let r = p - center;
                        Vec2::new(-r.y, r.x) / r.norm_squared()
                    }
                    _ => Vec2::zeros(),
                };
                best = Some((dist, Projection { s: self.starts[i] + local, point, tangent, lateral, heading_rate }));
            }
        }
        best.expect("non-empty path").1
    }

    /// Points every `step` metres of arc length, both ends included.
    pub fn polyline(&self, step: f64) -> Vec<(f64, Vec2)> {
        let n = (self.length / step).ceil().max(1.0) as usize;
        (0..=n)
            .map(|k| {
                let s = self.length * k as f64 / n as f64;
                (s, self.point_at(s))
            })
            .collect()
    }

    /// First proper crossing of the two centerlines as arc lengths
    /// `(s_self, s_other)`, "first" meaning the smallest sum.
    pub fn first_crossing(&self, other: &ReferencePath) -> Option<(f64, f64)> {
        const STEP: f64 = 0.05;
        let cross = |a: Vec2, b: Vec2| a.x * b.y - a.y * b.x;
        let pb = other.polyline(STEP);
        let mut best: Option<(f64, f64)> = None;
        for wa in self.polyline(STEP).windows(2) {
            let ((sa0, a0), (sa1, a1)) = (wa[0], wa[1]);
            let da = a1 - a0;
            for wb in pb.windows(2) {
                let ((sb0, b0), (sb1, b1)) = (wb[0], wb[1]);
                let db = b1 - b0;
                let den = cross(da, db);
                if den.abs() < 1e-12 {
                    continue;
                }
                let t = cross(b0 - a0, db) / den;
                let u = cross(b0 - a0, da) / den;
                if (0.0..1.0).contains(&t) && (0.0..1.0).contains(&u) {
                    let hit = (sa0 + t * (sa1 - sa0), sb0 + u * (sb1 - sb0));
                    if best.is_none_or(|b| hit.0 + hit.1 < b.0 + b.1) {
                        best = Some(hit);
                    }
                }
            }
        }
        best
    }
}
