//! Batched partially observed driving game.
//!
//! Each [`Scene`] owns the mutable state of one scenario. Within a scene every
//! agent moves from the same pre-step snapshot; scenes are independent and are
//! stepped in parallel by [`EnvBatch`].

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{bicycle_step, ActionGrid, KinematicState};
use crate::geometry::{obb_overlap, obb_touches_segment, Obb};
use crate::obs::{raw_observation, write_observation, AgentView, ObsConfig, ObsScratch, RawObservation, RoadGraph};
use crate::scenario::{select_controlled, InitMode, Scenario};
use crate::EnvError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardWeights {
    pub goal: f64,
    pub collision: f64,
    pub offroad: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self { goal: 1.0, collision: -0.75, offroad: -0.75 }
    }
}

/// What happens to an agent after it collides or touches a road edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CollisionBehavior {
    #[default]
    Ignore,
    Remove,
    Stop,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    pub reward: RewardWeights,
    pub goal_radius: f64,
    pub collision_behavior: CollisionBehavior,
    pub init_mode: InitMode,
    /// Penalize only the first step of each contact instead of every step.
    pub penalize_onset_only: bool,
    pub keep_goal_achieved_collidable: bool,
    pub obs: ObsConfig,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            reward: RewardWeights::default(),
            goal_radius: 2.0,
            collision_behavior: CollisionBehavior::Ignore,
            init_mode: InitMode::AllNonTrivial,
            penalize_onset_only: false,
            keep_goal_achieved_collidable: false,
            obs: ObsConfig::default(),
        }
    }
}

/// Sticky per-episode flags plus the current activity state of one agent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AgentStatus {
    pub active: bool,
    pub goal_achieved: bool,
    pub collided: bool,
    pub offroad: bool,
    pub removed: bool,
    pub stopped: bool,
}

/// Scenario plus its preprocessed road graph; cheap to clone.
#[derive(Debug, Clone)]
pub struct PreparedScenario {
    pub scenario: Arc<Scenario>,
    pub roads: Arc<RoadGraph>,
}

impl PreparedScenario {
    /// Applies the init mode and builds the road graph once.
    pub fn new(scenario: &Scenario, cfg: &EnvConfig) -> Self {
        let s = select_controlled(scenario, cfg.init_mode);
        let roads = RoadGraph::build(&s, &cfg.obs);
        Self { scenario: Arc::new(s), roads: Arc::new(roads) }
    }
}

/// Events detected for one controlled agent during one step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct StepEvents {
    pub goal: bool,
    pub collision: bool,
    pub offroad: bool,
}

/// Result of stepping one scene. Vectors are indexed by controlled slot.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub rewards: Vec<f64>,
    pub dones: Vec<bool>,
    pub events: Vec<StepEvents>,
    pub episode_done: bool,
}

#[derive(Debug, Clone)]
pub struct Scene {
    pub prepared: PreparedScenario,
    /// Agent indices of the controlled agents, in scenario order.
    pub controlled: Vec<usize>,
    pub states: Vec<KinematicState>,
    pub status: Vec<AgentStatus>,
    pub step: usize,
    prev_contact: Vec<(bool, bool)>,
    road_priority: Vec<u64>,
    rng: ChaCha8Rng,
    scratch: ObsScratch,
}

impl Scene {
    pub fn new(prepared: PreparedScenario, cfg: &EnvConfig, rng: ChaCha8Rng) -> Self {
        let controlled =
            prepared.scenario.agents.iter().enumerate().filter(|(_, a)| a.controlled).map(|(i, _)| i).collect();
        let mut scene = Self {
            prepared,
            controlled,
            states: Vec::new(),
            status: Vec::new(),
            step: 0,
            prev_contact: Vec::new(),
            road_priority: Vec::new(),
            rng,
            scratch: ObsScratch::default(),
        };
        scene.reset(cfg);
        scene
    }

    pub fn scenario(&self) -> &Scenario {
        &self.prepared.scenario
    }

    pub fn horizon(&self) -> usize {
        self.prepared.scenario.horizon
    }

    /// Restore initial states and clear all flags. Agents spawned inside the
    /// goal radius count as having reached their goal already.
    pub fn reset(&mut self, cfg: &EnvConfig) {
        let goal_radius = cfg.goal_radius;
        let s = &self.prepared.scenario;
        self.states = s
            .agents
            .iter()
            .map(|a| KinematicState::new(a.x, a.y, a.heading, if a.controlled { a.speed } else { 0.0 }))
            .collect();
        self.status = s
            .agents
            .iter()
            .map(|a| {
                let at_goal = a.controlled && a.goal_distance() < goal_radius;
                AgentStatus {
                    active: a.controlled && !at_goal && s.horizon > 0,
                    goal_achieved: at_goal,
                    ..Default::default()
                }
            })
            .collect();
        self.prev_contact = vec![(false, false); s.agents.len()];
        self.step = 0;
        let n = self.prepared.roads.segments.len();
        self.road_priority = (0..n).map(|_| self.rng.gen()).collect();
    }

    pub fn is_active(&self, slot: usize) -> bool {
        self.status[self.controlled[slot]].active
    }

    pub fn active_count(&self) -> usize {
        self.controlled.iter().filter(|&&i| self.status[i].active).count()
    }

    pub fn episode_done(&self) -> bool {
        self.step >= self.horizon() || self.active_count() == 0
    }

    /// Whether agent `i` is physically present (observable and collidable).
    pub fn present(&self, i: usize, cfg: &EnvConfig) -> bool {
        let a = &self.prepared.scenario.agents[i];
        let st = &self.status[i];
        a.valid && !st.removed && !(st.goal_achieved && !cfg.keep_goal_achieved_collidable)
    }

    fn view(&self, i: usize) -> AgentView {
        let a = &self.prepared.scenario.agents[i];
        let s = &self.states[i];
        AgentView {
            position: s.position(),
            heading: s.heading,
            speed: s.speed,
            length: a.length,
            width: a.width,
            height: a.height,
        }
    }

    fn obb(&self, i: usize) -> Obb {
        let a = &self.prepared.scenario.agents[i];
        let s = &self.states[i];
        Obb::new(s.position(), a.length, a.width, s.heading)
    }

    /// Raw features for controlled slot `slot`, computed regardless of status.
    pub fn raw_observation(&mut self, slot: usize, cfg: &EnvConfig) -> RawObservation {
        let i = self.controlled[slot];
        let partners: Vec<(usize, AgentView)> =
            (0..self.states.len()).filter(|&j| j != i && self.present(j, cfg)).map(|j| (j, self.view(j))).collect();
        let a = &self.prepared.scenario.agents[i];
        raw_observation(
            &self.view(i),
            i,
            a.goal(),
            self.prev_contact[i].0,
            &partners,
            &self.prepared.roads,
            &self.road_priority,
            &cfg.obs,
            &mut self.scratch,
        )
    }

    /// Flat observation for a controlled slot; zero when the agent is inactive.
    pub fn observe(&mut self, slot: usize, cfg: &EnvConfig, out: &mut [f32]) {
        if !self.is_active(slot) {
            out.fill(0.0);
            return;
        }
        let raw = self.raw_observation(slot, cfg);
        write_observation(&raw, &cfg.obs, out);
    }

    /// Advance one tick. `actions` holds one index per active controlled
    /// agent, in controlled-slot order.
    pub fn step(&mut self, actions: &[usize], grid: &ActionGrid, cfg: &EnvConfig) -> Result<StepOutcome, EnvError> {
        let n_ctrl = self.controlled.len();
        let was_active: Vec<bool> = (0..n_ctrl).map(|k| self.is_active(k)).collect();
        let expected = was_active.iter().filter(|&&a| a).count();
        if actions.len() != expected {
            return Err(EnvError::ActionCountMismatch { scene: 0, expected, got: actions.len() });
        }
        let mut controls = Vec::with_capacity(expected);
        for &k in actions {
            controls.push(grid.index_to_controls(k)?);
        }

        let dt = self.prepared.scenario.dt;
        let mut it = controls.into_iter();
        for (slot, &i) in self.controlled.iter().enumerate() {
            if was_active[slot] {
                let (accel, steer) = it.next().expect("counted above");
                let length = self.prepared.scenario.agents[i].length;
                self.states[i] = bicycle_step(&self.states[i], accel, steer, dt, length);
            }
        }

        // Event detection on the post-step snapshot.
        let n = self.states.len();
        let present: Vec<bool> = (0..n).map(|i| self.present(i, cfg)).collect();
        let boxes: Vec<Obb> = (0..n).map(|i| self.obb(i)).collect();
        let mut rewards = vec![0.0; n_ctrl];
        let mut events = vec![StepEvents::default(); n_ctrl];
        let mut near = Vec::new();
        for slot in 0..n_ctrl {
            if !was_active[slot] {
                continue;
            }
            let i = self.controlled[slot];
            let b = &boxes[i];
            let collision = (0..n).any(|j| {
                j != i
                    && present[j]
                    && (boxes[j].center - b.center).norm() <= boxes[j].bounding_radius() + b.bounding_radius()
                    && obb_overlap(b, &boxes[j])
            });
            let roads = &self.prepared.roads;
            roads.edges_near(b.center, b.bounding_radius(), &mut near);
            let offroad = near.iter().any(|&e| {
                let (p0, p1) = roads.edges[e];
                obb_touches_segment(b, p0, p1)
            });
            let agent = &self.prepared.scenario.agents[i];
            let goal = self.states[i].position().distance(agent.goal()) < cfg.goal_radius;
            events[slot] = StepEvents { goal, collision, offroad };

            let (prev_c, prev_o) = self.prev_contact[i];
            self.prev_contact[i] = (collision, offroad);
            let (pen_c, pen_o) =
                if cfg.penalize_onset_only { (collision && !prev_c, offroad && !prev_o) } else { (collision, offroad) };
            let st = &mut self.status[i];
            let new_goal = goal && !st.goal_achieved;
            rewards[slot] = cfg.reward.goal * f64::from(u8::from(new_goal))
                + cfg.reward.collision * f64::from(u8::from(pen_c))
                + cfg.reward.offroad * f64::from(u8::from(pen_o));
            st.collided |= collision;
            st.offroad |= offroad;
            st.goal_achieved |= goal;
        }

        for slot in 0..n_ctrl {
            if !was_active[slot] {
                continue;
            }
            let i = self.controlled[slot];
            let ev = events[slot];
            let st = &mut self.status[i];
            if ev.goal {
                st.active = false;
                self.states[i].speed = 0.0;
            } else if ev.collision || ev.offroad {
                match cfg.collision_behavior {
                    CollisionBehavior::Ignore => {}
                    CollisionBehavior::Remove => {
                        st.removed = true;
                        st.active = false;
                    }
                    CollisionBehavior::Stop => {
                        st.stopped = true;
                        st.active = false;
                        self.states[i].speed = 0.0;
                    }
                }
            }
        }

        self.step += 1;
        let at_horizon = self.step >= self.horizon();
        if at_horizon {
            for &i in &self.controlled {
                self.status[i].active = false;
            }
        }
        let dones = (0..n_ctrl).map(|k| !self.is_active(k)).collect();
        Ok(StepOutcome { rewards, dones, events, episode_done: self.episode_done() })
    }
}

/// Deterministic per-scene generator derived from a base seed.
pub fn scene_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// A fixed set of scenes stepped in lockstep.
#[derive(Debug, Clone)]
pub struct EnvBatch {
    pub cfg: EnvConfig,
    pub grid: ActionGrid,
    pub scenes: Vec<Scene>,
}

impl EnvBatch {
    pub fn new(scenarios: &[PreparedScenario], cfg: EnvConfig, seed: u64) -> Self {
        let scenes =
            scenarios.iter().enumerate().map(|(k, p)| Scene::new(p.clone(), &cfg, scene_rng(seed, k as u64))).collect();
        Self { cfg, grid: ActionGrid::default(), scenes }
    }

    pub fn obs_width(&self) -> usize {
        self.cfg.obs.width()
    }

    /// Reset the listed scenes and return, per scene, one flat observation per
    /// controlled slot.
    pub fn reset(&mut self, indices: &[usize]) -> Result<Vec<Vec<f32>>, EnvError> {
        if let Some(&bad) = indices.iter().find(|&&k| k >= self.scenes.len()) {
            return Err(EnvError::SceneIndex(bad));
        }
        let cfg = &self.cfg;
        let w = cfg.obs.width();
        let mut out = Vec::with_capacity(indices.len());
        for &k in indices {
            let scene = &mut self.scenes[k];
            scene.reset(cfg);
            let mut obs = vec![0.0; scene.controlled.len() * w];
            for slot in 0..scene.controlled.len() {
                scene.observe(slot, cfg, &mut obs[slot * w..(slot + 1) * w]);
            }
            out.push(obs);
        }
        Ok(out)
    }

    /// Step every scene with its action list; observations are returned in the
    /// same layout as [`EnvBatch::reset`].
    #[allow(clippy::type_complexity)]
    pub fn step(&mut self, actions: &[Vec<usize>]) -> Result<Vec<(Vec<f32>, StepOutcome)>, EnvError> {
        if actions.len() != self.scenes.len() {
            return Err(EnvError::ActionCountMismatch {
                scene: usize::MAX,
                expected: self.scenes.len(),
                got: actions.len(),
            });
        }
        let (cfg, grid) = (&self.cfg, &self.grid);
        let w = cfg.obs.width();
        self.scenes
            .par_iter_mut()
            .zip(actions.par_iter())
            .enumerate()
            .map(|(k, (scene, a))| {
                let outcome = scene.step(a, grid, cfg).map_err(|e| match e {
                    EnvError::ActionCountMismatch { expected, got, .. } => {
                        EnvError::ActionCountMismatch { scene: k, expected, got }
                    }
                    other => other,
                })?;
                let mut obs = vec![0.0; scene.controlled.len() * w];
                for slot in 0..scene.controlled.len() {
                    scene.observe(slot, cfg, &mut obs[slot * w..(slot + 1) * w]);
                }
                Ok((obs, outcome))
            })
            .collect()
    }
}

/// Anything that maps an observation to an action index.
pub trait Policy: Sync {
    fn act(&self, obs: &[f32], rng: &mut ChaCha8Rng) -> usize;
}

/// Uniform over the action grid.
#[derive(Debug, Clone, Copy)]
pub struct UniformPolicy {
    pub n_actions: usize,
}

impl Policy for UniformPolicy {
    fn act(&self, _obs: &[f32], rng: &mut ChaCha8Rng) -> usize {
        rng.gen_range(0..self.n_actions)
    }
}

/// One agent's state at the start of a step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AgentFrame {
    pub state: KinematicState,
    pub valid: bool,
    pub controlled: bool,
    pub status: AgentStatus,
    pub action: Option<usize>,
}

/// Full record of one closed-loop episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    pub scenario_id: String,
    /// `frames[t][agent]` is the pre-step snapshot at step `t`.
    pub frames: Vec<Vec<AgentFrame>>,
    /// Final flags, one per controlled slot.
    pub final_status: Vec<AgentStatus>,
    /// Summed reward, one per controlled slot.
    pub returns: Vec<f64>,
    /// Agent index of each controlled slot.
    pub controlled: Vec<usize>,
}

/// Reset every scene and run it to the horizon, sampling actions from
/// `policy`. Scenes run in parallel, each with its own generator stream, so
/// the result depends only on `seed`.
pub fn rollout_episode(batch: &mut EnvBatch, policy: &dyn Policy, seed: u64) -> Result<Vec<EpisodeRecord>, EnvError> {
    let (cfg, grid) = (&batch.cfg, &batch.grid);
    batch
        .scenes
        .par_iter_mut()
        .enumerate()
        .map(|(k, scene)| {
            let mut rng = scene_rng(seed, k as u64);
            scene.reset(cfg);
            run_scene(scene, policy, cfg, grid, &mut rng)
        })
        .collect()
}

fn run_scene(
    scene: &mut Scene,
    policy: &dyn Policy,
    cfg: &EnvConfig,
    grid: &ActionGrid,
    rng: &mut ChaCha8Rng,
) -> Result<EpisodeRecord, EnvError> {
    let w = cfg.obs.width();
    let n_ctrl = scene.controlled.len();
    let mut obs = vec![0.0f32; w];
    let mut frames = Vec::with_capacity(scene.horizon());
    let mut returns = vec![0.0; n_ctrl];
    while scene.step < scene.horizon() {
        let mut actions = Vec::new();
        let mut slot_action = vec![None; scene.states.len()];
        for slot in 0..n_ctrl {
            if scene.is_active(slot) {
                scene.observe(slot, cfg, &mut obs);
                let a = policy.act(&obs, rng);
                actions.push(a);
                slot_action[scene.controlled[slot]] = Some(a);
            }
        }
        let agents = &scene.prepared.scenario.agents;
        frames.push(
            (0..scene.states.len())
                .map(|i| AgentFrame {
                    state: scene.states[i],
                    valid: scene.present(i, cfg),
                    controlled: agents[i].controlled,
                    status: scene.status[i],
                    action: slot_action[i],
                })
                .collect(),
        );
        let out = scene.step(&actions, grid, cfg)?;
        for (r, x) in returns.iter_mut().zip(&out.rewards) {
            *r += x;
        }
    }
    Ok(EpisodeRecord {
        scenario_id: scene.scenario().id.clone(),
        frames,
        final_status: scene.controlled.iter().map(|&i| scene.status[i]).collect(),
        returns,
        controlled: scene.controlled.clone(),
    })
}
