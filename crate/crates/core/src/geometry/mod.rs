//! Planar geometry: vectors, oriented boxes, segment tests, polyline
//! decimation and a uniform grid for radius queries.

mod grid;
mod obb;
mod simplify;

pub use grid::SpatialGrid;
pub use obb::{obb_overlap, obb_segment_separation, obb_separation, obb_touches_polyline, obb_touches_segment, Obb};
pub use simplify::{decimate_polyline, decimate_with_log, Removal};

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::dynamics::wrap_angle;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    /// Unit vector pointing along `angle`.
    pub fn from_angle(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self { x: c, y: s }
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 3-D cross product.
    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm_sq(self) -> f64 {
        self.x * self.x + self.y * self.y
    }

    pub fn distance(self, o: Vec2) -> f64 {
        (self - o).norm()
    }

    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    /// Rotate counter-clockwise by `angle` radians.
    pub fn rotate(self, angle: f64) -> Vec2 {
        let (s, c) = angle.sin_cos();
        Vec2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, k: f64) -> Vec2 {
        Vec2::new(self.x * k, self.y * k)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

impl From<[f64; 2]> for Vec2 {
    fn from(p: [f64; 2]) -> Self {
        Vec2::new(p[0], p[1])
    }
}

impl From<Vec2> for [f64; 2] {
    fn from(v: Vec2) -> Self {
        [v.x, v.y]
    }
}

/// A planar pose: position plus heading.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub position: Vec2,
    pub heading: f64,
}

impl Pose {
    pub fn new(position: Vec2, heading: f64) -> Self {
        Self { position, heading }
    }

    /// Express a world point in this pose's frame.
    pub fn to_local(&self, p: Vec2) -> Vec2 {
        (p - self.position).rotate(-self.heading)
    }

    /// Express a world direction angle in this pose's frame.
    pub fn to_local_angle(&self, angle: f64) -> f64 {
        wrap_angle(angle - self.heading)
    }
}

/// Ego-frame description of a road segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentFeatures {
    pub midpoint: Vec2,
    pub length: f64,
    pub orientation: f64,
}

/// Midpoint, length and direction of the segment `p0 -> p1` seen from `ego`.
pub fn segment_features(p0: Vec2, p1: Vec2, ego: &Pose) -> SegmentFeatures {
    let d = p1 - p0;
    SegmentFeatures {
        midpoint: ego.to_local((p0 + p1) * 0.5),
        length: d.norm(),
        orientation: ego.to_local_angle(d.angle()),
    }
}

/// Twice the signed area of triangle `abc`.
pub(crate) fn cross3(a: Vec2, b: Vec2, c: Vec2) -> f64 {
    (b - a).cross(c - a)
}
