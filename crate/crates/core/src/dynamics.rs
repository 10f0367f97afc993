//! Discrete joint action grid and kinematic bicycle integration.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::geometry::Vec2;
use crate::DynamicsError;

/// Steering beyond this magnitude saturates; the grid's ±π endpoints would
/// otherwise cross the tan singularity at ±π/2.
pub const MAX_EFFECTIVE_STEER: f64 = 1.2;
pub const MAX_FORWARD_SPEED: f64 = 30.0;
pub const MAX_REVERSE_SPEED: f64 = 5.0;

/// Evenly spaced acceleration × steering product space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionGrid {
    pub accelerations: Vec<f64>,
    pub steering: Vec<f64>,
}

impl Default for ActionGrid {
    fn default() -> Self {
        Self::new(7, 4.0, 13, PI)
    }
}

fn linspace(n: usize, lo: f64, hi: f64) -> Vec<f64> {
    if n == 1 {
        return vec![0.5 * (lo + hi)];
    }
    let mut v: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
    if lo == -hi {
        // Mirror so the grid is exactly symmetric and its center exactly zero.
        for i in 0..n / 2 {
            v[n - 1 - i] = -v[i];
        }
        if n % 2 == 1 {
            v[n / 2] = 0.0;
        }
    }
    v
}

impl ActionGrid {
    /// Symmetric grids `[-max_accel, max_accel]` and `[-max_steer, max_steer]`.
    pub fn new(n_accel: usize, max_accel: f64, n_steer: usize, max_steer: f64) -> Self {
        Self {
            accelerations: linspace(n_accel, -max_accel, max_accel),
            steering: linspace(n_steer, -max_steer, max_steer),
        }
    }

    pub fn len(&self) -> usize {
        self.accelerations.len() * self.steering.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `(accel, steer)` for flat index `k`; steering varies fastest.
    pub fn index_to_controls(&self, k: usize) -> Result<(f64, f64), DynamicsError> {
        if k >= self.len() {
            return Err(DynamicsError::ActionOutOfRange { index: k, size: self.len() });
        }
        let ns = self.steering.len();
        Ok((self.accelerations[k / ns], self.steering[k % ns]))
    }

    pub fn controls_to_index(&self, accel_idx: usize, steer_idx: usize) -> Option<usize> {
        (accel_idx < self.accelerations.len() && steer_idx < self.steering.len())
            .then(|| accel_idx * self.steering.len() + steer_idx)
    }
}

/// Per-agent kinematic slice of the world state. Speed is signed.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct KinematicState {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub speed: f64,
}

impl KinematicState {
    pub fn new(x: f64, y: f64, heading: f64, speed: f64) -> Self {
        Self { x, y, heading, speed }
    }

    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }

    pub fn velocity(&self) -> Vec2 {
        Vec2::from_angle(self.heading) * self.speed
    }
}

/// Wrap an angle onto the circle. Values already in `[-π, π]` are returned
/// untouched (so both `-π` and `π` are fixed points); anything else lands in
/// the half-open `[-π, π)`.
pub fn wrap_angle(a: f64) -> f64 {
    if (-PI..=PI).contains(&a) {
        return a;
    }
    let two_pi = 2.0 * PI;
    let w = a - two_pi * ((a + PI) / two_pi).floor();
    // Rounding can leave w a hair outside the interval.
    if w >= PI {
        w - two_pi
    } else if w < -PI {
        w + two_pi
    } else {
        w
    }
}

/// Slip angle at the vehicle's reference point for a front-wheel angle.
pub fn slip_angle(steer: f64) -> f64 {
    let delta = steer.clamp(-MAX_EFFECTIVE_STEER, MAX_EFFECTIVE_STEER);
    (0.5 * delta.tan()).atan()
}

/// Advance one tick of the center-referenced kinematic bicycle.
///
/// Speed is integrated first and clamped to `[-MAX_REVERSE_SPEED,
/// MAX_FORWARD_SPEED]`; the yaw increment uses the new speed and the position
/// moves along the mean of the old and new course angles.
pub fn bicycle_step(s: &KinematicState, accel: f64, steer: f64, dt: f64, length: f64) -> KinematicState {
    let speed = (s.speed + accel * dt).clamp(-MAX_REVERSE_SPEED, MAX_FORWARD_SPEED);
    let beta = slip_angle(steer);
    let yaw = 2.0 * speed / length * beta.sin() * dt;
    let course = s.heading + beta + 0.5 * yaw;
    let (sin_c, cos_c) = course.sin_cos();
    KinematicState {
        x: s.x + speed * cos_c * dt,
        y: s.y + speed * sin_c * dt,
        heading: wrap_angle(s.heading + yaw),
        speed,
    }
}
