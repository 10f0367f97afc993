//! Scenario data model, JSON persistence, validation and scene transforms.

mod generate;

pub use generate::{generate_scenario, GeneratorSpec, Template};

use std::f64::consts::PI;
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::geometry::Vec2;
use crate::ScenarioError;

pub const DEFAULT_HORIZON: usize = 91;
pub const DEFAULT_DT: f64 = 0.1;
pub const MAX_CONTROLLED_AGENTS: usize = 64;
/// Agents whose goal is at most this far from their start are trivial.
pub const NON_TRIVIAL_DISTANCE: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoadKind {
    RoadEdge,
    RoadLane,
    RoadLine,
    StopSign,
    Crosswalk,
    SpeedBump,
}

impl RoadKind {
    pub const ALL: [RoadKind; 6] = [
        RoadKind::RoadEdge,
        RoadKind::RoadLane,
        RoadKind::RoadLine,
        RoadKind::StopSign,
        RoadKind::Crosswalk,
        RoadKind::SpeedBump,
    ];

    /// Position in the one-hot type encoding; 0 is reserved for "none".
    pub fn one_hot_index(self) -> usize {
        match self {
            RoadKind::RoadEdge => 1,
            RoadKind::RoadLane => 2,
            RoadKind::RoadLine => 3,
            RoadKind::StopSign => 4,
            RoadKind::Crosswalk => 5,
            RoadKind::SpeedBump => 6,
        }
    }

    fn min_points(self) -> usize {
        match self {
            RoadKind::RoadEdge | RoadKind::RoadLane | RoadKind::RoadLine => 2,
            _ => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RoadKind::RoadEdge => "road_edge",
            RoadKind::RoadLane => "road_lane",
            RoadKind::RoadLine => "road_line",
            RoadKind::StopSign => "stop_sign",
            RoadKind::Crosswalk => "crosswalk",
            RoadKind::SpeedBump => "speed_bump",
        }
    }
}

impl fmt::Display for RoadKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoadPolyline {
    pub kind: RoadKind,
    pub width: f64,
    pub height: f64,
    #[serde(with = "points_as_pairs")]
    pub points: Vec<Vec2>,
}

mod points_as_pairs {
    use super::Vec2;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(pts: &[Vec2], s: S) -> Result<S::Ok, S::Error> {
        let pairs: Vec<[f64; 2]> = pts.iter().map(|&p| p.into()).collect();
        pairs.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec2>, D::Error> {
        let pairs = Vec::<[f64; 2]>::deserialize(d)?;
        Ok(pairs.into_iter().map(Vec2::from).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentRecord {
    pub id: i64,
    pub length: f64,
    pub width: f64,
    pub height: f64,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub speed: f64,
    pub goal: [f64; 2],
    pub controlled: bool,
    pub valid: bool,
    /// Logged trajectory as `[x, y, heading, speed]` rows. Kept for reference;
    /// the simulator never replays it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log: Option<Vec<[f64; 4]>>,
}

impl AgentRecord {
    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }

    pub fn goal(&self) -> Vec2 {
        Vec2::from(self.goal)
    }

    pub fn goal_distance(&self) -> f64 {
        self.position().distance(self.goal())
    }
}

fn default_dt() -> f64 {
    DEFAULT_DT
}

fn default_horizon() -> usize {
    DEFAULT_HORIZON
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub id: String,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    pub roads: Vec<RoadPolyline>,
    pub agents: Vec<AgentRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitMode {
    AllObjects,
    #[default]
    AllNonTrivial,
}

impl Scenario {
    /// Check every structural invariant of the data model.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |what: String| Err(ScenarioError::Invariant(format!("scenario {:?}: {what}", self.id)));
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        for (i, road) in self.roads.iter().enumerate() {
            if road.points.len() < road.kind.min_points() {
                return bad(format!("road {i} ({}) has {} points", road.kind, road.points.len()));
            }
            if road.points.iter().any(|p| !p.is_finite()) {
                return bad(format!("road {i} has a non-finite coordinate"));
            }
            if !(road.width.is_finite() && road.height.is_finite()) {
                return bad(format!("road {i} has non-finite width/height"));
            }
        }
        let mut controlled = 0;
        for a in &self.agents {
            let scalars = [a.length, a.width, a.height, a.x, a.y, a.heading, a.speed, a.goal[0], a.goal[1]];
            if scalars.iter().any(|v| !v.is_finite()) {
                return bad(format!("agent {} has a non-finite field", a.id));
            }
            if a.length <= 0.0 || a.width <= 0.0 {
                return bad(format!("agent {} has non-positive extent", a.id));
            }
            if !(-PI..=PI).contains(&a.heading) {
                return bad(format!("agent {} heading {} outside [-pi, pi]", a.id, a.heading));
            }
            if a.controlled && !a.valid {
                return bad(format!("agent {} is controlled but not valid", a.id));
            }
            controlled += a.controlled as usize;
        }
        if controlled > MAX_CONTROLLED_AGENTS {
            return bad(format!("{controlled} controlled agents exceeds {MAX_CONTROLLED_AGENTS}"));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let s: Scenario = serde_json::from_str(text).map_err(|e| match e.classify() {
            serde_json::error::Category::Data => ScenarioError::Schema(e.to_string()),
            _ => ScenarioError::Parse(e.to_string()),
        })?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn controlled_count(&self) -> usize {
        self.agents.iter().filter(|a| a.controlled).count()
    }
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| ScenarioError::Io(format!("{}: {e}", path.display())))?;
    Scenario::from_json(&text)
}

pub fn save_scenario(s: &Scenario, path: impl AsRef<Path>) -> Result<(), ScenarioError> {
    let path = path.as_ref();
    fs::write(path, s.to_json()).map_err(|e| ScenarioError::Io(format!("{}: {e}", path.display())))
}

/// Apply an init mode. `AllNonTrivial` demotes agents within
/// [`NON_TRIVIAL_DISTANCE`] of their goal to static obstacles.
pub fn select_controlled(s: &Scenario, mode: InitMode) -> Scenario {
    let mut out = s.clone();
    if mode == InitMode::AllNonTrivial {
        for a in &mut out.agents {
            if a.controlled && a.goal_distance() <= NON_TRIVIAL_DISTANCE {
                a.controlled = false;
            }
        }
    }
    out
}

/// Reflect each controlled agent's goal through its start position so the
/// target lies behind it at the same distance.
pub fn alter_goals_behind(s: &Scenario) -> Result<Scenario, ScenarioError> {
    let mut out = s.clone();
    for a in out.agents.iter_mut().filter(|a| a.controlled) {
        if a.goal[0] == a.x && a.goal[1] == a.y {
            return Err(ScenarioError::DegenerateGoal(a.id));
        }
        a.goal = [2.0 * a.x - a.goal[0], 2.0 * a.y - a.goal[1]];
    }
    Ok(out)
}
