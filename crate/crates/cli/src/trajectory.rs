//! Trajectory dumps: one CSV row per agent per step.
//!
//! Pose columns are the state at the start of the step and `action` the
//! action chosen there (empty for agents not acting). The three flags are
//! the sticky values after the step, so the last row of each agent carries
//! its final outcome.

use std::collections::BTreeMap;
use std::path::Path;

use roadrl::env::{AgentStatus, EpisodeRecord};
use roadrl::geometry::Vec2;
use roadrl::metrics::SceneOutcome;
use roadrl::ood::TrajectorySample;
use serde::{Deserialize, Serialize};

use crate::error::{io_err, CliError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub scenario_id: String,
    pub agent_id: i64,
    pub step: usize,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub speed: f64,
    pub vx: f64,
    pub vy: f64,
    pub valid: bool,
    pub controlled: bool,
    pub goal_achieved: bool,
    pub collided: bool,
    pub offroad: bool,
    pub action: Option<usize>,
}

pub fn episode_rows(ep: &EpisodeRecord, agent_ids: &[i64]) -> Vec<TrajectoryRow> {
    let n_agents = agent_ids.len();
    let mut last = vec![AgentStatus::default(); n_agents];
    for (slot, &i) in ep.controlled.iter().enumerate() {
        last[i] = ep.final_status[slot];
    }
    let mut rows = Vec::with_capacity(ep.frames.len() * n_agents);
    for (t, frame) in ep.frames.iter().enumerate() {
        for (i, f) in frame.iter().enumerate() {
            let after = ep.frames.get(t + 1).map_or(last[i], |next| next[i].status);
            let v = f.state.velocity();
            rows.push(TrajectoryRow {
                scenario_id: ep.scenario_id.clone(),
                agent_id: agent_ids[i],
                step: t,
                x: f.state.x,
                y: f.state.y,
                heading: f.state.heading,
                speed: f.state.speed,
                vx: v.x,
                vy: v.y,
                valid: f.valid,
                controlled: f.controlled,
                goal_achieved: after.goal_achieved,
                collided: after.collided,
                offroad: after.offroad,
                action: f.action,
            });
        }
    }
    rows
}

pub fn write_rows(path: &Path, rows: &[TrajectoryRow]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub fn read_rows(path: &Path) -> Result<Vec<TrajectoryRow>, CliError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| io_err(path, e))?;
    r.deserialize().map(|row| row.map_err(|e| CliError::data(format!("{}: {e}", path.display())))).collect()
}

type AgentKey = (String, i64);

fn by_agent(rows: &[TrajectoryRow]) -> BTreeMap<AgentKey, Vec<&TrajectoryRow>> {
    let mut map: BTreeMap<AgentKey, Vec<&TrajectoryRow>> = BTreeMap::new();
    for r in rows {
        map.entry((r.scenario_id.clone(), r.agent_id)).or_default().push(r);
    }
    for v in map.values_mut() {
        v.sort_by_key(|r| r.step);
    }
    map
}

/// Kinematics of every agent, keyed by scenario and agent id.
pub fn trajectory_samples(rows: &[TrajectoryRow]) -> BTreeMap<AgentKey, TrajectorySample> {
    by_agent(rows)
        .into_iter()
        .map(|(k, rs)| {
            let tr = TrajectorySample {
                positions: rs.iter().map(|r| Vec2::new(r.x, r.y)).collect(),
                headings: rs.iter().map(|r| r.heading).collect(),
                velocities: rs.iter().map(|r| Vec2::new(r.vx, r.vy)).collect(),
                valid: rs.iter().map(|r| r.valid).collect(),
            };
            (k, tr)
        })
        .collect()
}

/// Final flags of the controlled agents of each scenario.
pub fn scene_outcomes(rows: &[TrajectoryRow]) -> Vec<SceneOutcome> {
    let mut scenes: BTreeMap<String, SceneOutcome> = BTreeMap::new();
    for ((scene, _), rs) in by_agent(rows) {
        let entry = scenes
            .entry(scene.clone())
            .or_insert_with(|| SceneOutcome { scenario_id: scene, ..SceneOutcome::default() });
        let last = rs.last().expect("groups are non-empty");
        if last.controlled {
            entry.goal.push(last.goal_achieved);
            entry.collided.push(last.collided);
            entry.offroad.push(last.offroad);
        }
    }
    scenes.into_values().collect()
}
