//! Proximal policy optimization: advantage estimation, the clipped surrogate
//! loss with its gradient, the optimizer, and the self-play training loop.

mod trainer;

pub use trainer::{finetune, train, TrainOutcome, UpdateMetrics, METRICS_HEADER};

use serde::{Deserialize, Serialize};

use crate::policy::Categorical;
use crate::TrainError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PpoConfig {
    pub total_timesteps: u64,
    /// Agent transitions collected per update.
    pub rollout_batch: usize,
    pub minibatch_size: usize,
    pub learning_rate: f64,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub update_epochs: usize,
    pub clip_coef: f64,
    pub ent_coef: f64,
    pub vf_coef: f64,
    pub max_grad_norm: f64,
    pub norm_adv: bool,
    pub anneal_lr: bool,
    pub scenario_batch_size: usize,
    /// Transitions between draws of a fresh scenario batch.
    pub resample_interval: u64,
    /// Write a checkpoint every this many updates (0: only at the end).
    pub checkpoint_interval: usize,
    pub seed: u64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            total_timesteps: 1_000_000_000,
            rollout_batch: 16_384,
            minibatch_size: 2_048,
            learning_rate: 3e-4,
            gamma: 0.99,
            gae_lambda: 0.95,
            update_epochs: 2,
            clip_coef: 0.2,
            ent_coef: 1e-4,
            vf_coef: 0.5,
            max_grad_norm: 0.5,
            norm_adv: true,
            anneal_lr: false,
            scenario_batch_size: 16,
            resample_interval: 200_000,
            checkpoint_interval: 0,
            seed: 0,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::Config(m.to_string()));
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("gamma must be in (0, 1]");
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return bad("gae_lambda must be in [0, 1]");
        }
        if self.rollout_batch == 0 || self.minibatch_size == 0 {
            return bad("rollout_batch and minibatch_size must be positive");
        }
        if self.rollout_batch % self.minibatch_size != 0 {
            return bad("minibatch_size must divide rollout_batch");
        }
        if self.scenario_batch_size == 0 {
            return bad("scenario_batch_size must be positive");
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be finite and non-negative");
        }
        if !(self.clip_coef > 0.0) || !(self.max_grad_norm > 0.0) {
            return bad("clip_coef and max_grad_norm must be positive");
        }
        Ok(())
    }
}

/// Generalized advantage estimates and returns for one trajectory segment.
///
/// `dones[t]` marks that the episode ended after transition `t`; `bootstrap`
/// is the value of the state following the last transition and is ignored
/// when that transition is terminal.
pub fn compute_gae(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    bootstrap: f64,
    gamma: f64,
    lambda: f64,
) -> Result<(Vec<f64>, Vec<f64>), TrainError> {
    let n = rewards.len();
    if values.len() != n || dones.len() != n {
        return Err(TrainError::LengthMismatch(format!("rewards {n}, values {}, dones {}", values.len(), dones.len())));
    }
    let mut adv = vec![0.0; n];
    let mut next_adv = 0.0;
    let mut next_value = bootstrap;
    for t in (0..n).rev() {
        let live = if dones[t] { 0.0 } else { 1.0 };
        let delta = rewards[t] + gamma * live * next_value - values[t];
        next_adv = delta + gamma * lambda * live * next_adv;
        adv[t] = next_adv;
        next_value = values[t];
    }
    let returns = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    Ok((adv, returns))
}

/// Shift to zero mean and scale to unit (sample) standard deviation.
pub fn normalize_advantages(adv: &mut [f64]) {
    let n = adv.len();
    if n == 0 {
        return;
    }
    let mean = adv.iter().sum::<f64>() / n as f64;
    let var = if n > 1 { adv.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1) as f64 } else { 0.0 };
    let std = var.sqrt();
    for a in adv {
        *a = (*a - mean) / (std + 1e-8);
    }
}

/// Loss terms and diagnostics for one minibatch.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LossStats {
    pub loss: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub approx_kl: f64,
    pub clip_frac: f64,
}

/// Per-sample contribution: loss terms plus the gradients with respect to
/// the logits and the value, all already divided by the batch size.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleLoss {
    pub policy: f64,
    pub value: f64,
    pub entropy: f64,
    pub ratio: f64,
    pub dlogits: Vec<f64>,
    pub dvalue: f64,
}

/// Clipped-surrogate loss for a single sample out of a batch of `batch`.
#[allow(clippy::too_many_arguments)]
pub fn sample_loss(
    dist: &Categorical,
    value: f64,
    action: usize,
    old_log_prob: f64,
    advantage: f64,
    ret: f64,
    cfg: &PpoConfig,
    batch: usize,
) -> SampleLoss {
    let b = batch as f64;
    let log_p = dist.log_probs[action];
    let ratio = (log_p - old_log_prob).exp();
    let clipped = ratio.clamp(1.0 - cfg.clip_coef, 1.0 + cfg.clip_coef);
    let unclipped_obj = ratio * advantage;
    let clipped_obj = clipped * advantage;
    let policy = -unclipped_obj.min(clipped_obj);
    // The gradient flows only through the branch the min selects; the
    // clipped branch is constant in the parameters outside the clip range.
    let g_pg = if unclipped_obj <= clipped_obj { -ratio * advantage } else { 0.0 };
    let probs = dist.probs();
    let entropy = dist.entropy();
    let dlogits = probs
        .iter()
        .zip(&dist.log_probs)
        .enumerate()
        .map(|(k, (&p, &lp))| {
            let onehot = if k == action { 1.0 } else { 0.0 };
            let ent_term = if p > 0.0 { p * (lp + entropy) } else { 0.0 };
            (g_pg * (onehot - p) + cfg.ent_coef * ent_term) / b
        })
        .collect();
    let dvalue = 2.0 * cfg.vf_coef * (value - ret) / b;
    SampleLoss { policy, value: (value - ret).powi(2), entropy, ratio, dlogits, dvalue }
}

/// Whole-minibatch loss with per-sample gradients. `advantages` are used as
/// given; normalize them beforehand when the config asks for it.
#[allow(clippy::too_many_arguments)]
pub fn ppo_loss(
    logits: &[Vec<f64>],
    values: &[f64],
    actions: &[usize],
    old_log_probs: &[f64],
    advantages: &[f64],
    returns: &[f64],
    cfg: &PpoConfig,
) -> (LossStats, Vec<SampleLoss>) {
    let n = logits.len();
    let mut acc = LossAccumulator::default();
    let samples: Vec<SampleLoss> = (0..n)
        .map(|i| {
            let dist = Categorical::from_logits(&logits[i]);
            let s = sample_loss(&dist, values[i], actions[i], old_log_probs[i], advantages[i], returns[i], cfg, n);
            acc.add(&s, cfg.clip_coef);
            s
        })
        .collect();
    (acc.finish(cfg), samples)
}

#[derive(Debug, Clone, Default)]
pub(crate) struct LossAccumulator {
    n: usize,
    policy: f64,
    value: f64,
    entropy: f64,
    kl: f64,
    clipped: usize,
}

impl LossAccumulator {
    pub(crate) fn add(&mut self, s: &SampleLoss, clip_coef: f64) {
        self.n += 1;
        self.policy += s.policy;
        self.value += s.value;
        self.entropy += s.entropy;
        self.kl += (s.ratio - 1.0) - s.ratio.ln();
        self.clipped += usize::from((s.ratio - 1.0).abs() > clip_coef);
    }

    pub(crate) fn finish(&self, cfg: &PpoConfig) -> LossStats {
        let n = self.n.max(1) as f64;
        let (p, v, e) = (self.policy / n, self.value / n, self.entropy / n);
        LossStats {
            loss: p + cfg.vf_coef * v - cfg.ent_coef * e,
            policy_loss: p,
            value_loss: v,
            entropy: e,
            approx_kl: self.kl / n,
            clip_frac: self.clipped as f64 / n,
        }
    }
}

/// Scale `grad` in place so its global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_grad_norm(grad: &mut [f32], max_norm: f64) -> f64 {
    let norm = grad.iter().map(|&g| (g as f64) * (g as f64)).sum::<f64>().sqrt();
    if norm > max_norm {
        let scale = (max_norm / (norm + 1e-6)) as f32;
        for g in grad {
            *g *= scale;
        }
    }
    norm
}

/// Adaptive-moment optimizer with bias correction.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f32>,
    v: Vec<f32>,
    t: i32,
}

impl Adam {
    pub fn new(n: usize, lr: f64) -> Self {
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    pub fn step(&mut self, params: &mut [f32], grad: &[f32]) {
        self.t += 1;
        let (b1, b2) = (self.beta1 as f32, self.beta2 as f32);
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        let step = (self.lr / c1) as f32;
        let c2_sqrt = c2.sqrt() as f32;
        let eps = self.eps as f32;
        for (((p, &g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            *p -= step * *m / (v.sqrt() / c2_sqrt + eps);
        }
    }
}
