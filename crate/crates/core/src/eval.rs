//! Closed-loop evaluation and the training-set-size sweep.

use serde::Serialize;

use crate::env::{rollout_episode, EnvBatch, EnvConfig, EpisodeRecord, PreparedScenario};
use crate::metrics::{aggregate, AggregateReport, SceneOutcome};
use crate::policy::{ActionMode, NetConfig, NetPolicy, PolicyNet};
use crate::ppo::{train, PpoConfig};
use crate::scenario::Scenario;
use crate::{EnvError, MetricsError, TrainError};

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub outcomes: Vec<SceneOutcome>,
    pub report: AggregateReport,
    pub episodes: Vec<EpisodeRecord>,
}

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

/// Run one episode per scenario with the network choosing actions.
/// `Argmax` mode ignores `seed`.
pub fn evaluate(
    net: &PolicyNet<f32>,
    scenarios: &[PreparedScenario],
    env_cfg: &EnvConfig,
    mode: ActionMode,
    seed: u64,
) -> Result<Evaluation, EvalError> {
    let mut batch = EnvBatch::new(scenarios, env_cfg.clone(), seed);
    let episodes = rollout_episode(&mut batch, &NetPolicy { net, mode }, seed)?;
    let outcomes: Vec<SceneOutcome> =
        episodes.iter().map(|e| SceneOutcome::from_statuses(e.scenario_id.clone(), &e.final_status)).collect();
    let report = aggregate(&outcomes)?;
    Ok(Evaluation { outcomes, report, episodes })
}

pub fn prepare_all(scenarios: &[Scenario], env_cfg: &EnvConfig) -> Vec<PreparedScenario> {
    scenarios.iter().map(|s| PreparedScenario::new(s, env_cfg)).collect()
}

/// Metrics of one policy trained on `size` scenarios.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub size: usize,
    pub train_goal: f64,
    pub test_goal: f64,
    pub gap: f64,
    pub train_collided: f64,
    pub test_collided: f64,
    pub train_offroad: f64,
    pub test_offroad: f64,
}

pub const SWEEP_HEADER: &str = "size,train_goal,test_goal,gap,train_collided,test_collided,train_offroad,test_offroad";

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = format!("{SWEEP_HEADER}\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.size,
            r.train_goal,
            r.test_goal,
            r.gap,
            r.train_collided,
            r.test_collided,
            r.train_offroad,
            r.test_offroad
        ));
    }
    out
}

/// Train one policy per training-set size, then evaluate each on its own
/// training scenes and on the shared held-out set. Percentages are
/// scene-based means; `gap` is train minus test goal rate.
pub fn scaling_sweep(
    sizes: &[usize],
    make_train_set: impl Fn(usize) -> Vec<Scenario>,
    eval_set: &[Scenario],
    ppo: &PpoConfig,
    env_cfg: &EnvConfig,
    net_cfg: &NetConfig,
    eval_mode: ActionMode,
) -> Result<Vec<SweepRow>, TrainError> {
    let test = prepare_all(eval_set, env_cfg);
    let mut rows = Vec::with_capacity(sizes.len());
    for &size in sizes {
        let train_set = prepare_all(&make_train_set(size), env_cfg);
        let mut cfg = ppo.clone();
        cfg.scenario_batch_size = cfg.scenario_batch_size.min(train_set.len());
        let net = PolicyNet::new(net_cfg.clone(), ppo.seed);
        let out = train(&cfg, env_cfg, &train_set, net, 0, |_, _| Ok(()))?;
        let on_train = evaluate(&out.net, &train_set, env_cfg, eval_mode, ppo.seed).map_err(sweep_err)?;
        let on_test = evaluate(&out.net, &test, env_cfg, eval_mode, ppo.seed).map_err(sweep_err)?;
        let (a, b) = (&on_train.report.scene_based, &on_test.report.scene_based);
        rows.push(SweepRow {
            size,
            train_goal: a.goal.mean,
            test_goal: b.goal.mean,
            gap: a.goal.mean - b.goal.mean,
            train_collided: a.collided.mean,
            test_collided: b.collided.mean,
            train_offroad: a.offroad.mean,
            test_offroad: b.offroad.mean,
        });
    }
    Ok(rows)
}

fn sweep_err(e: EvalError) -> TrainError {
    match e {
        EvalError::Env(e) => TrainError::Env(e),
        EvalError::Metrics(m) => TrainError::Config(m.to_string()),
    }
}
