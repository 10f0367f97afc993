use super::{Pose, Vec2};
use crate::scenario::{RoadKind, RoadPolyline};
use crate::GeometryError;

/// Oriented rectangle used as a vehicle footprint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Obb {
    pub center: Vec2,
    /// Half length along the heading, half width across it.
    pub half_extents: Vec2,
    pub heading: f64,
}

impl Obb {
    pub fn new(center: Vec2, length: f64, width: f64, heading: f64) -> Self {
        Self { center, half_extents: Vec2::new(0.5 * length, 0.5 * width), heading }
    }

    pub fn axes(&self) -> [Vec2; 2] {
        let u = Vec2::from_angle(self.heading);
        [u, u.perp()]
    }

    pub fn corners(&self) -> [Vec2; 4] {
        let [u, v] = self.axes();
        let a = u * self.half_extents.x;
        let b = v * self.half_extents.y;
        let c = self.center;
        [c + a + b, c - a + b, c - a - b, c + a - b]
    }

    /// Radius of the circumscribed circle.
    pub fn bounding_radius(&self) -> f64 {
        self.half_extents.norm()
    }

    /// Closed containment test.
    pub fn contains(&self, p: Vec2) -> bool {
        let local = Pose::new(self.center, self.heading).to_local(p);
        local.x.abs() <= self.half_extents.x && local.y.abs() <= self.half_extents.y
    }

    /// Half-width of the box's projection onto unit `axis`.
    fn projected_radius(&self, axis: Vec2) -> f64 {
        let [u, v] = self.axes();
        self.half_extents.x * u.dot(axis).abs() + self.half_extents.y * v.dot(axis).abs()
    }
}

/// Signed separating-axis measure over the four face normals: positive is the
/// largest gap found along any axis, non-positive is minus the smallest overlap.
pub fn obb_separation(a: &Obb, b: &Obb) -> f64 {
    let d = b.center - a.center;
    let mut best = f64::NEG_INFINITY;
    for axis in a.axes().into_iter().chain(b.axes()) {
        let gap = d.dot(axis).abs() - a.projected_radius(axis) - b.projected_radius(axis);
        best = best.max(gap);
    }
    best
}

/// True iff the closed rectangles intersect; touching counts.
pub fn obb_overlap(a: &Obb, b: &Obb) -> bool {
    obb_separation(a, b) <= 0.0
}

/// Signed separating-axis measure between a box and the segment `p0 -> p1`,
/// over the box axes and the segment normal.
pub fn obb_segment_separation(b: &Obb, p0: Vec2, p1: Vec2) -> f64 {
    let mut axes = [Vec2::ZERO; 3];
    let [u, v] = b.axes();
    axes[0] = u;
    axes[1] = v;
    let d = p1 - p0;
    let len = d.norm();
    let n_axes = if len > 0.0 {
        axes[2] = d.perp() * (1.0 / len);
        3
    } else {
        2
    };
    let mid = (p0 + p1) * 0.5;
    let half = d * 0.5;
    let mut best = f64::NEG_INFINITY;
    for &axis in &axes[..n_axes] {
        let seg_r = half.dot(axis).abs();
        let gap = (mid - b.center).dot(axis).abs() - b.projected_radius(axis) - seg_r;
        best = best.max(gap);
    }
    best
}

/// Closed segment-versus-box intersection.
pub fn obb_touches_segment(b: &Obb, p0: Vec2, p1: Vec2) -> bool {
    obb_segment_separation(b, p0, p1) <= 0.0
}

/// True iff any segment of a road-edge polyline meets the box.
pub fn obb_touches_polyline(b: &Obb, polyline: &RoadPolyline) -> Result<bool, GeometryError> {
    if polyline.kind != RoadKind::RoadEdge {
        return Err(GeometryError::NotRoadEdge(polyline.kind));
    }
    let pts = &polyline.points;
    if pts.len() == 1 {
        return Ok(obb_touches_segment(b, pts[0], pts[0]));
    }
    Ok(pts.windows(2).any(|w| obb_touches_segment(b, w[0], w[1])))
}
