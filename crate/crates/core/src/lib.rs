//! Batched multi-agent driving simulator with a self-play PPO training stack.
//!
//! The crate is organised bottom-up: [`geometry`] and [`dynamics`] are pure
//! math, [`scenario`] holds the data model, [`env`] and [`obs`] implement the
//! partially observed game, [`policy`] and [`ppo`] the learner, and
//! [`metrics`], [`ood`] and [`eval`] the analysis side.

pub mod dynamics;
pub mod env;
pub mod eval;
pub mod geometry;
pub mod metrics;
pub mod obs;
pub mod ood;
pub mod policy;
pub mod ppo;
pub mod scenario;

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use thiserror::Error;

use crate::scenario::RoadKind;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("off-road test needs a road_edge polyline, got {0}")]
    NotRoadEdge(RoadKind),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DynamicsError {
    #[error("action index {index} out of range for a grid of {size}")]
    ActionOutOfRange { index: usize, size: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("malformed scenario JSON: {0}")]
    Parse(String),
    #[error("scenario schema violation: {0}")]
    Schema(String),
    #[error("scenario invariant violated: {0}")]
    Invariant(String),
    #[error("scenario io: {0}")]
    Io(String),
    #[error("agent {0} has its goal at its start position")]
    DegenerateGoal(i64),
    #[error("bad generator spec: {0}")]
    Spec(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnvError {
    #[error("scene {scene}: expected {expected} actions, got {got}")]
    ActionCountMismatch { scene: usize, expected: usize, got: usize },
    #[error(transparent)]
    Action(#[from] DynamicsError),
    #[error("scene index {0} out of range")]
    SceneIndex(usize),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PolicyError {
    #[error("observation width {got} does not match network input {expected}")]
    Shape { expected: usize, got: usize },
    #[error("action index {index} out of range for {size} logits")]
    ActionOutOfRange { index: usize, size: usize },
    #[error("checkpoint mismatch: {0}")]
    CheckpointMismatch(String),
    #[error("checkpoint format: {0}")]
    Format(String),
    #[error("checkpoint io: {0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("io: {0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("scene has no controlled agents")]
    EmptyScene,
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OodError {
    #[error("trajectory has no valid steps")]
    NoValidSteps,
    #[error("trajectory arrays have different lengths")]
    LengthMismatch,
}

/// Scalar type the policy network is generic over: `f32` for training,
/// `f64` for gradient checking.
pub trait Real:
    num_traits::Float
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    fn of(v: f64) -> Self;
    fn f64(self) -> f64;
}

impl Real for f32 {
    fn of(v: f64) -> Self {
        v as f32
    }
    fn f64(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {
    fn of(v: f64) -> Self {
        v
    }
    fn f64(self) -> f64 {
        self
    }
}
