//! Self-play training loop.
//!
//! Environments persist across updates: each rollout continues the episodes
//! left running by the previous one and collects exactly `rollout_batch`
//! agent transitions. Every controlled agent contributes its own trajectory
//! segment; segments cut by the end of a rollout are bootstrapped with the
//! critic's estimate of the next state.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{clip_grad_norm, compute_gae, normalize_advantages, sample_loss, Adam, LossAccumulator, PpoConfig};
use crate::env::{scene_rng, AgentStatus, EnvConfig, PreparedScenario, Scene};
use crate::policy::{Categorical, Checkpoint, ForwardCache, PolicyNet};
use crate::{PolicyError, TrainError};

pub const METRICS_HEADER: &str =
    "update,global_step,mean_reward,goal_rate,collision_rate,offroad_rate,entropy,approx_kl,clip_frac";

/// One row of the training log. Episode statistics cover agent episodes that
/// finished during the update's rollout and are NaN when none did.
#[derive(Debug, Clone, PartialEq)]
pub struct UpdateMetrics {
    pub update: u64,
    pub global_step: u64,
    pub mean_reward: f64,
    pub goal_rate: f64,
    pub collision_rate: f64,
    pub offroad_rate: f64,
    pub entropy: f64,
    pub approx_kl: f64,
    pub clip_frac: f64,
    pub episodes: usize,
}

impl UpdateMetrics {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.update,
            self.global_step,
            self.mean_reward,
            self.goal_rate,
            self.collision_rate,
            self.offroad_rate,
            self.entropy,
            self.approx_kl,
            self.clip_frac
        )
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub net: PolicyNet<f32>,
    pub global_step: u64,
    pub metrics: Vec<UpdateMetrics>,
}

/// Train `net` on `pool`. `on_update` sees every metrics row and the current
/// parameters, e.g. to log or checkpoint.
pub fn train(
    cfg: &PpoConfig,
    env_cfg: &EnvConfig,
    pool: &[PreparedScenario],
    net: PolicyNet<f32>,
    start_step: u64,
    mut on_update: impl FnMut(&UpdateMetrics, &PolicyNet<f32>) -> Result<(), TrainError>,
) -> Result<TrainOutcome, TrainError> {
    cfg.validate()?;
    if pool.len() < cfg.scenario_batch_size {
        return Err(TrainError::Config(format!(
            "scenario_batch_size {} exceeds the {} scenarios available",
            cfg.scenario_batch_size,
            pool.len()
        )));
    }
    if net.obs_width() != env_cfg.obs.width() {
        return Err(PolicyError::Shape { expected: net.obs_width(), got: env_cfg.obs.width() }.into());
    }
    let mut t = Trainer::new(cfg, env_cfg, pool, net, start_step);
    let mut metrics = Vec::new();
    let updates = cfg.total_timesteps.div_ceil(cfg.rollout_batch as u64);
    for u in 0..updates {
        if cfg.anneal_lr {
            t.adam.lr = cfg.learning_rate * (1.0 - u as f64 / updates as f64);
        }
        if t.since_resample >= cfg.resample_interval {
            t.resample();
        }
        let stats = t.collect()?;
        let loss = t.update();
        let m = UpdateMetrics {
            update: u + 1,
            global_step: t.global_step,
            mean_reward: stats.mean_return,
            goal_rate: stats.goal_rate,
            collision_rate: stats.collision_rate,
            offroad_rate: stats.offroad_rate,
            entropy: loss.0,
            approx_kl: loss.1,
            clip_frac: loss.2,
            episodes: stats.episodes,
        };
        on_update(&m, &t.net)?;
        metrics.push(m);
    }
    Ok(TrainOutcome { net: t.net, global_step: t.global_step, metrics })
}

/// Continue training a checkpoint on a new scenario set.
pub fn finetune(
    ckpt: &Checkpoint,
    cfg: &PpoConfig,
    env_cfg: &EnvConfig,
    pool: &[PreparedScenario],
    on_update: impl FnMut(&UpdateMetrics, &PolicyNet<f32>) -> Result<(), TrainError>,
) -> Result<TrainOutcome, TrainError> {
    ckpt.check_compatible(&env_cfg.obs)?;
    train(cfg, env_cfg, pool, ckpt.net.clone(), ckpt.header.global_step, on_update)
}

#[derive(Debug, Default)]
struct EpisodeStats {
    episodes: usize,
    goals: usize,
    collisions: usize,
    offroads: usize,
    returns: f64,
}

struct RolloutStats {
    episodes: usize,
    mean_return: f64,
    goal_rate: f64,
    collision_rate: f64,
    offroad_rate: f64,
}

struct Buffer {
    obs: Vec<f32>,
    actions: Vec<usize>,
    log_probs: Vec<f64>,
    values: Vec<f64>,
    rewards: Vec<f64>,
    dones: Vec<bool>,
    advantages: Vec<f64>,
    returns: Vec<f64>,
}

impl Buffer {
    fn new(n: usize, w: usize) -> Self {
        Self {
            obs: Vec::with_capacity(n * w),
            actions: Vec::with_capacity(n),
            log_probs: Vec::with_capacity(n),
            values: Vec::with_capacity(n),
            rewards: Vec::with_capacity(n),
            dones: Vec::with_capacity(n),
            advantages: vec![0.0; n],
            returns: vec![0.0; n],
        }
    }

    fn clear(&mut self) {
        self.obs.clear();
        self.actions.clear();
        self.log_probs.clear();
        self.values.clear();
        self.rewards.clear();
        self.dones.clear();
    }

    fn len(&self) -> usize {
        self.actions.len()
    }
}

/// Decision taken for one active agent during collection.
struct Decision {
    slot: usize,
    obs: Vec<f32>,
    action: usize,
    log_prob: f64,
    value: f64,
}

struct Trainer<'a> {
    cfg: &'a PpoConfig,
    env_cfg: &'a EnvConfig,
    pool: &'a [PreparedScenario],
    net: PolicyNet<f32>,
    adam: Adam,
    rng: ChaCha8Rng,
    scenes: Vec<Scene>,
    act_rngs: Vec<ChaCha8Rng>,
    returns: Vec<Vec<f64>>,
    draws: u64,
    global_step: u64,
    since_resample: u64,
    buffer: Buffer,
}

impl<'a> Trainer<'a> {
    fn new(
        cfg: &'a PpoConfig,
        env_cfg: &'a EnvConfig,
        pool: &'a [PreparedScenario],
        net: PolicyNet<f32>,
        start: u64,
    ) -> Self {
        let n = net.count_params();
        let w = env_cfg.obs.width();
        let mut t = Self {
            cfg,
            env_cfg,
            pool,
            net,
            adam: Adam::new(n, cfg.learning_rate),
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            scenes: Vec::new(),
            act_rngs: Vec::new(),
            returns: Vec::new(),
            draws: 0,
            global_step: start,
            since_resample: 0,
            buffer: Buffer::new(cfg.rollout_batch, w),
        };
        t.resample();
        t
    }

    /// Draw a fresh scenario batch uniformly without replacement.
    fn resample(&mut self) {
        let picks: Vec<usize> =
            rand::seq::index::sample(&mut self.rng, self.pool.len(), self.cfg.scenario_batch_size).into_vec();
        self.draws += 1;
        let base = self.cfg.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(self.draws);
        self.scenes = picks
            .iter()
            .enumerate()
            .map(|(k, &p)| Scene::new(self.pool[p].clone(), self.env_cfg, scene_rng(base, 2 * k as u64)))
            .collect();
        self.act_rngs = (0..picks.len()).map(|k| scene_rng(base, 2 * k as u64 + 1)).collect();
        self.returns = self.scenes.iter().map(|s| vec![0.0; s.controlled.len()]).collect();
        self.since_resample = 0;
    }

    fn collect(&mut self) -> Result<RolloutStats, TrainError> {
        let cap = self.cfg.rollout_batch;
        let w = self.env_cfg.obs.width();
        self.buffer.clear();
        let mut open: Vec<Vec<Vec<usize>>> = self.scenes.iter().map(|s| vec![Vec::new(); s.controlled.len()]).collect();
        let mut segments: Vec<(Vec<usize>, f64)> = Vec::new();
        let mut ep = EpisodeStats::default();
        let mut idle = 0usize;

        while self.buffer.len() < cap {
            let (net, env_cfg) = (&self.net, self.env_cfg);
            let decisions: Vec<Vec<Decision>> = self
                .scenes
                .par_iter_mut()
                .zip(self.act_rngs.par_iter_mut())
                .map(|(scene, rng)| {
                    let mut cache = ForwardCache::default();
                    let mut out = Vec::new();
                    for slot in 0..scene.controlled.len() {
                        if !scene.is_active(slot) {
                            continue;
                        }
                        let mut obs = vec![0.0f32; w];
                        scene.observe(slot, env_cfg, &mut obs);
                        net.forward_cached(&obs, &mut cache).expect("width checked at start");
                        let dist = Categorical::from_logits(&cache.logits);
                        let action = dist.sample(rng);
                        out.push(Decision {
                            slot,
                            obs,
                            action,
                            log_prob: dist.log_probs[action],
                            value: cache.value as f64,
                        });
                    }
                    out
                })
                .collect();
            if decisions.iter().all(Vec::is_empty) {
                idle += 1;
                if idle > 2 * self.scenes.iter().map(Scene::horizon).max().unwrap_or(0) + 2 {
                    return Err(TrainError::Config("the scenario batch has no controllable agents".into()));
                }
            } else {
                idle = 0;
            }

            // Admit transitions in scene order until the buffer is full; a
            // decision that does not fit closes its agent's segment and lends
            // its value estimate as the bootstrap.
            let mut kept: Vec<Vec<Option<usize>>> = Vec::with_capacity(decisions.len());
            for (s, ds) in decisions.iter().enumerate() {
                let mut row = Vec::with_capacity(ds.len());
                for d in ds {
                    if self.buffer.len() < cap {
                        let idx = self.buffer.len();
                        self.buffer.obs.extend_from_slice(&d.obs);
                        self.buffer.actions.push(d.action);
                        self.buffer.log_probs.push(d.log_prob);
                        self.buffer.values.push(d.value);
                        self.buffer.rewards.push(0.0);
                        self.buffer.dones.push(false);
                        open[s][d.slot].push(idx);
                        row.push(Some(idx));
                    } else {
                        let seg = std::mem::take(&mut open[s][d.slot]);
                        if !seg.is_empty() {
                            segments.push((seg, d.value));
                        }
                        row.push(None);
                    }
                }
                kept.push(row);
            }

            let env_cfg = self.env_cfg;
            let outcomes: Vec<_> = self
                .scenes
                .par_iter_mut()
                .zip(decisions.par_iter())
                .map(|(scene, ds)| {
                    let actions: Vec<usize> = ds.iter().map(|d| d.action).collect();
                    let grid = crate::dynamics::ActionGrid::default();
                    scene.step(&actions, &grid, env_cfg)
                })
                .collect();

            for (s, outcome) in outcomes.into_iter().enumerate() {
                let outcome = outcome?;
                for (d, idx) in decisions[s].iter().zip(&kept[s]) {
                    let r = outcome.rewards[d.slot];
                    self.returns[s][d.slot] += r;
                    if let Some(idx) = *idx {
                        self.buffer.rewards[idx] = r;
                        self.buffer.dones[idx] = outcome.dones[d.slot];
                        if outcome.dones[d.slot] {
                            segments.push((std::mem::take(&mut open[s][d.slot]), 0.0));
                        }
                    }
                }
                if outcome.episode_done {
                    let scene = &mut self.scenes[s];
                    for (slot, &i) in scene.controlled.iter().enumerate() {
                        record(&mut ep, &scene.status[i], self.returns[s][slot]);
                        // Anything still open here ended at the horizon.
                        debug_assert!(open[s][slot].is_empty() || self.buffer.dones[*open[s][slot].last().unwrap()]);
                    }
                    self.returns[s].iter_mut().for_each(|r| *r = 0.0);
                    scene.reset(env_cfg);
                }
            }
        }

        // Bootstrap segments still running when the buffer filled up.
        let mut cache = ForwardCache::default();
        let mut obs = vec![0.0f32; w];
        for (s, scene) in self.scenes.iter_mut().enumerate() {
            for slot in 0..scene.controlled.len() {
                let seg = std::mem::take(&mut open[s][slot]);
                if seg.is_empty() {
                    continue;
                }
                scene.observe(slot, self.env_cfg, &mut obs);
                self.net.forward_cached(&obs, &mut cache)?;
                segments.push((seg, cache.value as f64));
            }
        }

        let b = &mut self.buffer;
        let mut covered = 0;
        for (seg, bootstrap) in &segments {
            let r: Vec<f64> = seg.iter().map(|&i| b.rewards[i]).collect();
            let v: Vec<f64> = seg.iter().map(|&i| b.values[i]).collect();
            let d: Vec<bool> = seg.iter().map(|&i| b.dones[i]).collect();
            let (adv, ret) = compute_gae(&r, &v, &d, *bootstrap, self.cfg.gamma, self.cfg.gae_lambda)?;
            for (k, &i) in seg.iter().enumerate() {
                b.advantages[i] = adv[k];
                b.returns[i] = ret[k];
            }
            covered += seg.len();
        }
        debug_assert_eq!(covered, cap);

        self.global_step += cap as u64;
        self.since_resample += cap as u64;
        let n = ep.episodes as f64;
        let rate = |k: usize| if ep.episodes == 0 { f64::NAN } else { k as f64 / n };
        Ok(RolloutStats {
            episodes: ep.episodes,
            mean_return: if ep.episodes == 0 { f64::NAN } else { ep.returns / n },
            goal_rate: rate(ep.goals),
            collision_rate: rate(ep.collisions),
            offroad_rate: rate(ep.offroads),
        })
    }

    /// Run the PPO epochs over the buffer. Returns mean entropy, approximate
    /// KL and clip fraction over all minibatches.
    fn update(&mut self) -> (f64, f64, f64) {
        let cfg = self.cfg;
        let n = self.buffer.len();
        let w = self.env_cfg.obs.width();
        let mut order: Vec<usize> = (0..n).collect();
        let mut grad = vec![0.0f32; self.net.count_params()];
        let mut cache = ForwardCache::default();
        let mut dlogits = vec![0.0f32; self.net.config.n_actions];
        let (mut ent, mut kl, mut clip, mut batches) = (0.0, 0.0, 0.0, 0usize);
        for _ in 0..cfg.update_epochs {
            order.shuffle(&mut self.rng);
            for mb in order.chunks(cfg.minibatch_size) {
                let mut adv: Vec<f64> = mb.iter().map(|&i| self.buffer.advantages[i]).collect();
                if cfg.norm_adv {
                    normalize_advantages(&mut adv);
                }
                grad.fill(0.0);
                let mut acc = LossAccumulator::default();
                for (k, &i) in mb.iter().enumerate() {
                    let obs = &self.buffer.obs[i * w..(i + 1) * w];
                    self.net.forward_cached(obs, &mut cache).expect("buffer widths match");
                    let dist = Categorical::from_logits(&cache.logits);
                    let s = sample_loss(
                        &dist,
                        cache.value as f64,
                        self.buffer.actions[i],
                        self.buffer.log_probs[i],
                        adv[k],
                        self.buffer.returns[i],
                        cfg,
                        mb.len(),
                    );
                    acc.add(&s, cfg.clip_coef);
                    for (d, &g) in dlogits.iter_mut().zip(&s.dlogits) {
                        *d = g as f32;
                    }
                    self.net.backward(obs, &cache, &dlogits, s.dvalue as f32, &mut grad);
                }
                clip_grad_norm(&mut grad, cfg.max_grad_norm);
                self.adam.step(&mut self.net.params, &grad);
                let stats = acc.finish(cfg);
                ent += stats.entropy;
                kl += stats.approx_kl;
                clip += stats.clip_frac;
                batches += 1;
            }
        }
        let b = batches.max(1) as f64;
        (ent / b, kl / b, clip / b)
    }
}

fn record(ep: &mut EpisodeStats, st: &AgentStatus, ret: f64) {
    ep.episodes += 1;
    ep.goals += usize::from(st.goal_achieved);
    ep.collisions += usize::from(st.collided);
    ep.offroads += usize::from(st.offroad);
    ep.returns += ret;
}
