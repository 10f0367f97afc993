//! Detectors for maneuvers that are rare in forward-driving data: U-turns
//! and sustained reverse driving.

use serde::Serialize;

use crate::dynamics::wrap_angle;
use crate::geometry::Vec2;
use crate::OodError;

/// Per-step kinematics of one agent.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrajectorySample {
    pub positions: Vec<Vec2>,
    pub headings: Vec<f64>,
    pub velocities: Vec<Vec2>,
    pub valid: Vec<bool>,
}

impl TrajectorySample {
    fn check(&self) -> Result<(), OodError> {
        let n = self.headings.len();
        if self.positions.len() != n || self.velocities.len() != n || self.valid.len() != n {
            return Err(OodError::LengthMismatch);
        }
        if !self.valid.iter().any(|&v| v) {
            return Err(OodError::NoValidSteps);
        }
        Ok(())
    }
}

/// Circular distance between two angles, in degrees, within `[0, 180]`.
fn angle_gap_deg(a: f64, b: f64) -> f64 {
    wrap_angle(a - b).abs().to_degrees()
}

/// True when some valid step's heading differs from the first valid
/// heading by more than `threshold_deg` on the circle.
pub fn detect_uturn(tr: &TrajectorySample, threshold_deg: f64) -> Result<bool, OodError> {
    tr.check()?;
    let first = tr.valid.iter().position(|&v| v).expect("checked above");
    let base = tr.headings[first];
    Ok(tr.headings.iter().zip(&tr.valid).skip(first).any(|(&h, &v)| v && angle_gap_deg(h, base) > threshold_deg))
}

/// True when more than `min_steps` consecutive valid steps move against the
/// heading (angle above `angle_deg`) at more than `min_speed_kmh`.
pub fn detect_reverse(
    tr: &TrajectorySample,
    angle_deg: f64,
    min_steps: usize,
    min_speed_kmh: f64,
) -> Result<bool, OodError> {
    tr.check()?;
    let min_speed = min_speed_kmh / 3.6;
    let mut run = 0usize;
    for t in 0..tr.headings.len() {
        let v = tr.velocities[t];
        let backwards = tr.valid[t] && v.norm() > min_speed && angle_gap_deg(v.angle(), tr.headings[t]) > angle_deg;
        run = if backwards { run + 1 } else { 0 };
        if run > min_steps {
            return Ok(true);
        }
    }
    Ok(false)
}

pub const UTURN_DEG: f64 = 150.0;
pub const REVERSE_DEG: f64 = 150.0;
pub const REVERSE_MIN_STEPS: usize = 10;
pub const REVERSE_MIN_KMH: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct OodCounts {
    pub agents: usize,
    pub uturns: usize,
    pub reverses: usize,
    pub uturn_fraction: f64,
    pub reverse_fraction: f64,
}

impl OodCounts {
    pub fn csv(&self) -> String {
        format!(
            "agents,uturns,reverses,uturn_fraction,reverse_fraction\n{},{},{},{},{}\n",
            self.agents, self.uturns, self.reverses, self.uturn_fraction, self.reverse_fraction
        )
    }
}

/// Apply both detectors with default thresholds over a corpus. Trajectories
/// without any valid step are not counted as agents.
pub fn corpus_scan<'a>(trajectories: impl IntoIterator<Item = &'a TrajectorySample>) -> Result<OodCounts, OodError> {
    let mut c = OodCounts::default();
    for tr in trajectories {
        match detect_uturn(tr, UTURN_DEG) {
            Err(OodError::NoValidSteps) => continue,
            Err(e) => return Err(e),
            Ok(u) => {
                c.agents += 1;
                c.uturns += usize::from(u);
                c.reverses += usize::from(detect_reverse(tr, REVERSE_DEG, REVERSE_MIN_STEPS, REVERSE_MIN_KMH)?);
            }
        }
    }
    if c.agents > 0 {
        c.uturn_fraction = c.uturns as f64 / c.agents as f64;
        c.reverse_fraction = c.reverses as f64 / c.agents as f64;
    }
    Ok(c)
}
